#pragma once

// The sketcher model: a literal viewer, the informativity mixture of
// diagnosticity and resemblance, utility net of production cost, and the
// softmax production distribution over sketch categories.

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sketchprag/corpus.hpp"

namespace sketchprag {

// theta = (w_i, w_c, w_d, alpha).
struct ParamVector {
  double w_i = 0.0;    // informativity weight
  double w_c = 0.0;    // cost weight
  double w_d = 0.0;    // diagnosticity share of informativity
  double alpha = 0.0;  // viewer optimality

  static constexpr std::size_t kSize = 4;
  double& operator[](std::size_t i);
  double operator[](std::size_t i) const;
  bool operator==(const ParamVector&) const = default;
};

inline constexpr std::array<std::string_view, ParamVector::kSize> kParamNames = {
    "w_i", "w_c", "w_d", "alpha"};
std::size_t param_index(std::string_view name);

enum class Variant {
  kPragmatic,           // S_prag
  kContextInsensitive,  // S_sim: w_d forced to 0
  kCostInsensitive,     // S_nocost: w_c forced to 0
};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view text);
// Index of the parameter a lesion pins to zero, if any.
std::optional<std::size_t> forced_param(Variant v);
ParamVector apply_variant(ParamVector params, Variant v);

namespace rsa {

enum class ViewerForm {
  // V(o|s,O) = softmax over the four objects of alpha * sim(s, o).
  kSoftmax,
  // exp(alpha * sim(s,o)) / sum_i exp(sim(s, o_i)), unnormalized, as the
  // formula is typeset. Kept for sensitivity analysis only.
  kAsPrinted,
};

struct RsaOptions {
  double log_floor = 1e-12;
  ViewerForm viewer = ViewerForm::kSoftmax;
};

// Choice probabilities over ctx.objects() (target first).
std::array<double, 4> viewer_probs(const CorrespondenceTable& table,
                                   SketchCategory s, const Context& ctx,
                                   double alpha, const RsaOptions& opts = {});

struct Informativity {
  double value = 0.0;
  // True when V(t|s,O) fell below the log floor.
  bool floored = false;
};

Informativity informativity(const CorrespondenceTable& table, SketchCategory s,
                            const Context& ctx, double w_d, double alpha,
                            const RsaOptions& opts = {});

double utility(const CorrespondenceTable& table, const CostVector& costs,
               SketchCategory s, const Context& ctx, ParamVector params,
               Variant variant, const RsaOptions& opts = {});

// Per-candidate ingredients of the utility for one context and alpha:
// U = w_i * w_d * diagnosticity + w_i * (1 - w_d) * resemblance - w_c * cost.
struct UtilityTerms {
  std::vector<double> diagnosticity;  // ln V(t|s,O), floored
  std::vector<double> resemblance;    // sim(s, t)
  std::vector<double> cost;           // C(s)
};

UtilityTerms utility_terms(const CorrespondenceTable& table,
                           const CostVector& costs, const Context& ctx,
                           double alpha, std::span<const SketchCategory> candidates,
                           const RsaOptions& opts = {});

struct Coefficients {
  double diagnosticity = 0.0;
  double resemblance = 0.0;
  double cost = 0.0;
};
// Variant forcing is applied first.
Coefficients coefficients(ParamVector params, Variant variant);

struct SketchDistribution {
  Context context;
  ParamVector params;
  Variant variant = Variant::kPragmatic;
  std::vector<SketchCategory> candidates;
  std::vector<double> probs;
  std::vector<double> log_probs;

  // Position of s among the candidates, or -1.
  int position(SketchCategory s) const;
  double prob(SketchCategory s) const;
};

// Every sketch category of the table when `candidates` is empty.
SketchDistribution sketcher_distribution(
    const CorrespondenceTable& table, const CostVector& costs, const Context& ctx,
    ParamVector params, Variant variant,
    std::span<const SketchCategory> candidates = {}, const RsaOptions& opts = {});

std::vector<SketchCategory> default_candidates(const CorrespondenceTable& table);

}  // namespace rsa
}  // namespace sketchprag
