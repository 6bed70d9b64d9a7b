#include "sketchprag/rsa.hpp"

#include <algorithm>
#include <cmath>

#include "sketchprag/error.hpp"
#include "sketchprag/kernels.hpp"

namespace sketchprag {

double& ParamVector::operator[](std::size_t i) {
  switch (i) {
    case 0: return w_i;
    case 1: return w_c;
    case 2: return w_d;
    case 3: return alpha;
  }
  fail(ErrorKind::kInvalidArgument, "parameter index out of range");
}

double ParamVector::operator[](std::size_t i) const {
  return const_cast<ParamVector&>(*this)[i];
}

std::size_t param_index(std::string_view name) {
  for (std::size_t i = 0; i < kParamNames.size(); ++i) {
    if (kParamNames[i] == name) return i;
  }
  fail(ErrorKind::kInvalidArgument, "unknown parameter '" + std::string(name) + "'");
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kPragmatic: return "prag";
    case Variant::kContextInsensitive: return "sim";
    case Variant::kCostInsensitive: return "nocost";
  }
  return "prag";
}

Variant parse_variant(std::string_view text) {
  if (text == "prag") return Variant::kPragmatic;
  if (text == "sim") return Variant::kContextInsensitive;
  if (text == "nocost") return Variant::kCostInsensitive;
  fail(ErrorKind::kParseError, "unknown variant '" + std::string(text) + "'");
}

std::optional<std::size_t> forced_param(Variant v) {
  switch (v) {
    case Variant::kPragmatic: return std::nullopt;
    case Variant::kContextInsensitive: return 2;
    case Variant::kCostInsensitive: return 1;
  }
  return std::nullopt;
}

ParamVector apply_variant(ParamVector params, Variant v) {
  if (const auto i = forced_param(v)) params[*i] = 0.0;
  return params;
}

namespace rsa {

std::array<double, 4> viewer_probs(const CorrespondenceTable& table,
                                   SketchCategory s, const Context& ctx,
                                   double alpha, const RsaOptions& opts) {
  const auto objs = ctx.objects();
  std::array<double, 4> out{};
  if (opts.viewer == ViewerForm::kAsPrinted) {
    std::array<double, 4> raw{};
    for (std::size_t i = 0; i < 4; ++i) raw[i] = table.sim(s, objs[i]);
    const double lse = kernels::scalar_table().logsumexp(raw.data(), 4);
    for (std::size_t i = 0; i < 4; ++i) out[i] = std::exp(alpha * raw[i] - lse);
    return out;
  }
  std::array<double, 4> scaled{};
  for (std::size_t i = 0; i < 4; ++i) scaled[i] = alpha * table.sim(s, objs[i]);
  const double lse = kernels::scalar_table().logsumexp(scaled.data(), 4);
  for (std::size_t i = 0; i < 4; ++i) out[i] = std::exp(scaled[i] - lse);
  return out;
}

namespace {

// ln V(t|s,O) computed in log space, floored at ln(log_floor).
double log_viewer_target(const CorrespondenceTable& table, SketchCategory s,
                         const Context& ctx, double alpha, const RsaOptions& opts,
                         bool* floored) {
  const auto objs = ctx.objects();
  std::array<double, 4> scaled{};
  const double sim_t = table.sim(s, objs[0]);
  double log_v = 0.0;
  if (opts.viewer == ViewerForm::kAsPrinted) {
    for (std::size_t i = 0; i < 4; ++i) scaled[i] = table.sim(s, objs[i]);
    log_v = alpha * sim_t - kernels::scalar_table().logsumexp(scaled.data(), 4);
  } else {
    for (std::size_t i = 0; i < 4; ++i) scaled[i] = alpha * table.sim(s, objs[i]);
    log_v = scaled[0] - kernels::scalar_table().logsumexp(scaled.data(), 4);
  }
  const double floor = std::log(opts.log_floor);
  if (log_v < floor) {
    if (floored != nullptr) *floored = true;
    return floor;
  }
  return log_v;
}

}  // namespace

Informativity informativity(const CorrespondenceTable& table, SketchCategory s,
                            const Context& ctx, double w_d, double alpha,
                            const RsaOptions& opts) {
  Informativity out;
  const double diag = log_viewer_target(table, s, ctx, alpha, opts, &out.floored);
  out.value = w_d * diag + (1.0 - w_d) * table.sim(s, ctx.target);
  return out;
}

double utility(const CorrespondenceTable& table, const CostVector& costs,
               SketchCategory s, const Context& ctx, ParamVector params,
               Variant variant, const RsaOptions& opts) {
  params = apply_variant(params, variant);
  const double info = informativity(table, s, ctx, params.w_d, params.alpha, opts).value;
  return params.w_i * info - params.w_c * costs[s];
}

UtilityTerms utility_terms(const CorrespondenceTable& table,
                           const CostVector& costs, const Context& ctx,
                           double alpha, std::span<const SketchCategory> candidates,
                           const RsaOptions& opts) {
  UtilityTerms t;
  t.diagnosticity.reserve(candidates.size());
  t.resemblance.reserve(candidates.size());
  t.cost.reserve(candidates.size());
  for (SketchCategory s : candidates) {
    t.diagnosticity.push_back(log_viewer_target(table, s, ctx, alpha, opts, nullptr));
    t.resemblance.push_back(table.sim(s, ctx.target));
    t.cost.push_back(costs[s]);
  }
  return t;
}

Coefficients coefficients(ParamVector params, Variant variant) {
  params = apply_variant(params, variant);
  return {params.w_i * params.w_d, params.w_i * (1.0 - params.w_d), -params.w_c};
}

int SketchDistribution::position(SketchCategory s) const {
  const auto it = std::find(candidates.begin(), candidates.end(), s);
  return it == candidates.end() ? -1 : static_cast<int>(it - candidates.begin());
}

double SketchDistribution::prob(SketchCategory s) const {
  const int pos = position(s);
  return pos < 0 ? 0.0 : probs[static_cast<std::size_t>(pos)];
}

std::vector<SketchCategory> default_candidates(const CorrespondenceTable& table) {
  std::vector<SketchCategory> out;
  out.reserve(table.num_rows());
  for (std::size_t i = 0; i < table.num_rows(); ++i) {
    out.push_back(SketchCategory::from_index(static_cast<int>(i)));
  }
  return out;
}

SketchDistribution sketcher_distribution(const CorrespondenceTable& table,
                                         const CostVector& costs, const Context& ctx,
                                         ParamVector params, Variant variant,
                                         std::span<const SketchCategory> candidates,
                                         const RsaOptions& opts) {
  SketchDistribution d;
  d.context = ctx;
  d.params = params;
  d.variant = variant;
  if (candidates.empty()) {
    d.candidates = default_candidates(table);
  } else {
    d.candidates.assign(candidates.begin(), candidates.end());
  }
  const Coefficients k = coefficients(params, variant);
  const UtilityTerms terms = utility_terms(table, costs, ctx, params.alpha, d.candidates, opts);
  const std::size_t n = d.candidates.size();
  d.log_probs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.log_probs[i] = k.diagnosticity * terms.diagnosticity[i] +
                     k.resemblance * terms.resemblance[i] + k.cost * terms.cost[i];
  }
  const double lse = kernels::logsumexp(d.log_probs);
  d.probs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.log_probs[i] -= lse;
    d.probs[i] = std::exp(d.log_probs[i]);
  }
  return d;
}

}  // namespace rsa
}  // namespace sketchprag
