#pragma once

// Posterior-predictive diagnostics: target rank, context congruity, and
// expected production cost, with bootstrap standard errors per fold and
// inverse-variance aggregation across folds.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "sketchprag/corpus.hpp"
#include "sketchprag/inference.hpp"
#include "sketchprag/rsa.hpp"

namespace sketchprag::metrics {

enum class Metric { kTargetRank, kContextCongruity, kCostClose, kCostFar };

inline constexpr Metric kAllMetrics[] = {Metric::kTargetRank, Metric::kContextCongruity,
                                         Metric::kCostClose, Metric::kCostFar};
std::string_view metric_name(Metric m);

// Normal quantile for a two-sided 95% interval.
inline constexpr double kZ95 = 1.959964;

struct MetricSummary {
  Metric metric = Metric::kTargetRank;
  double mean = 0.0;
  double se = 0.0;
  double ci95_halfwidth = 0.0;
};

// 1-based rank of the context-congruent target category. Ties go to the
// lower sketch-category index.
int target_rank(std::span<const double> probs,
                std::span<const SketchCategory> candidates, const Context& ctx);
int target_rank(const rsa::SketchDistribution& dist);

// P(congruent version of target) > P(incongruent version), strictly.
bool context_congruity(std::span<const double> probs,
                       std::span<const SketchCategory> candidates, const Context& ctx);
bool context_congruity(const rsa::SketchDistribution& dist);

double expected_cost(std::span<const double> probs,
                     std::span<const SketchCategory> candidates, const CostVector& costs);
double expected_cost(const rsa::SketchDistribution& dist, const CostVector& costs);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

// Mean and s.d. of n_boot resampled means.
Estimate bootstrap_summary(std::span<const double> values, int n_boot, std::uint64_t seed);

// Weights 1/se^2; all-zero se falls back to the plain mean.
MetricSummary ivw_aggregate(Metric metric, std::span<const Estimate> folds);

enum class PredictMode {
  // Metrics of the sample-averaged distribution.
  kAveragedDistribution,
  // Metrics per posterior sample, then averaged.
  kPerSample,
};

struct TrialPrediction {
  Context context;
  std::vector<double> probs;  // sample-averaged, over `candidates`
  double rank = 0.0;
  double congruent = 0.0;
  double expected_cost = 0.0;
};

struct PredictiveResult {
  int fold_id = 0;
  PredictMode mode = PredictMode::kAveragedDistribution;
  std::vector<SketchCategory> candidates;
  std::vector<TrialPrediction> trials;
};

PredictiveResult posterior_predict(const inference::McmcChain& chain,
                                   const CorrespondenceTable& table, const CostVector& costs,
                                   std::span<const TrialRecord> trials, Variant variant,
                                   PredictMode mode = PredictMode::kAveragedDistribution,
                                   int fold_id = 0, const rsa::RsaOptions& opts = {});

// Bootstrap (mean, se) for every metric over one fold's trials; the cost
// metrics use only the trials of their condition.
std::vector<std::pair<Metric, Estimate>> fold_estimates(const PredictiveResult& result,
                                                        int n_boot, std::uint64_t seed);

}  // namespace sketchprag::metrics
