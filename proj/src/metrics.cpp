#include "sketchprag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "sketchprag/error.hpp"

namespace sketchprag::metrics {

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kTargetRank: return "target_rank";
    case Metric::kContextCongruity: return "context_congruity";
    case Metric::kCostClose: return "cost_close";
    case Metric::kCostFar: return "cost_far";
  }
  return "target_rank";
}

namespace {

std::size_t find_candidate(std::span<const SketchCategory> candidates, SketchCategory s) {
  const auto it = std::find(candidates.begin(), candidates.end(), s);
  if (it == candidates.end()) {
    fail(ErrorKind::kInvalidArgument, "sketch category is not among the candidates");
  }
  return static_cast<std::size_t>(it - candidates.begin());
}

}  // namespace

int target_rank(std::span<const double> probs, std::span<const SketchCategory> candidates,
                const Context& ctx) {
  const SketchCategory target = ctx.congruent();
  const std::size_t t = find_candidate(candidates, target);
  const double pt = probs[t];
  int rank = 1;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (j == t) continue;
    if (probs[j] > pt || (probs[j] == pt && candidates[j].index() < target.index())) ++rank;
  }
  return rank;
}

int target_rank(const rsa::SketchDistribution& dist) {
  return target_rank(dist.probs, dist.candidates, dist.context);
}

bool context_congruity(std::span<const double> probs,
                       std::span<const SketchCategory> candidates, const Context& ctx) {
  return probs[find_candidate(candidates, ctx.congruent())] >
         probs[find_candidate(candidates, ctx.incongruent())];
}

bool context_congruity(const rsa::SketchDistribution& dist) {
  return context_congruity(dist.probs, dist.candidates, dist.context);
}

double expected_cost(std::span<const double> probs,
                     std::span<const SketchCategory> candidates, const CostVector& costs) {
  double total = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) total += probs[j] * costs[candidates[j]];
  return total;
}

double expected_cost(const rsa::SketchDistribution& dist, const CostVector& costs) {
  return expected_cost(dist.probs, dist.candidates, costs);
}

Estimate bootstrap_summary(std::span<const double> values, int n_boot, std::uint64_t seed) {
  if (values.empty()) fail(ErrorKind::kInvalidArgument, "bootstrap needs at least one value");
  if (n_boot < 1) fail(ErrorKind::kInvalidArgument, "n_boot must be positive");
  if (values.size() == 1) return {values[0], 0.0};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means(static_cast<std::size_t>(n_boot));
  const auto n = static_cast<double>(values.size());
  for (double& m : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) sum += values[pick(rng)];
    m = sum / n;
  }
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(n_boot);
  double ss = 0.0;
  for (double m : means) ss += (m - mean) * (m - mean);
  const double se = n_boot > 1 ? std::sqrt(ss / static_cast<double>(n_boot - 1)) : 0.0;
  return {mean, se};
}

MetricSummary ivw_aggregate(Metric metric, std::span<const Estimate> folds) {
  if (folds.empty()) fail(ErrorKind::kInvalidArgument, "no fold estimates to aggregate");
  const auto zero = std::count_if(folds.begin(), folds.end(),
                                  [](const Estimate& e) { return e.se == 0.0; });
  MetricSummary out;
  out.metric = metric;
  if (zero == static_cast<std::ptrdiff_t>(folds.size())) {
    for (const Estimate& e : folds) out.mean += e.mean;
    out.mean /= static_cast<double>(folds.size());
    return out;
  }
  if (zero > 0) {
    fail(ErrorKind::kDegenerateWeights, "some folds have zero standard error and others do not");
  }
  double wsum = 0.0;
  double wmean = 0.0;
  for (const Estimate& e : folds) {
    if (!(e.se > 0.0) || !std::isfinite(e.se)) {
      fail(ErrorKind::kDegenerateWeights, "invalid fold standard error");
    }
    const double w = 1.0 / (e.se * e.se);
    wsum += w;
    wmean += w * e.mean;
  }
  out.mean = wmean / wsum;
  out.se = 1.0 / std::sqrt(wsum);
  out.ci95_halfwidth = kZ95 * out.se;
  return out;
}

PredictiveResult posterior_predict(const inference::McmcChain& chain,
                                   const CorrespondenceTable& table, const CostVector& costs,
                                   std::span<const TrialRecord> trials, Variant variant,
                                   PredictMode mode, int fold_id, const rsa::RsaOptions& opts) {
  if (chain.samples.empty()) fail(ErrorKind::kInvalidArgument, "posterior chain is empty");
  PredictiveResult result;
  result.fold_id = fold_id;
  result.mode = mode;
  result.candidates = rsa::default_candidates(table);
  const std::size_t n_cand = result.candidates.size();
  const double n_samples = static_cast<double>(chain.samples.size());

  // The predictive distribution depends only on the context.
  std::map<std::string, TrialPrediction> cache;
  for (const TrialRecord& t : trials) {
    const std::string key = t.context.key();
    if (cache.contains(key)) continue;
    TrialPrediction p;
    p.context = t.context;
    p.probs.assign(n_cand, 0.0);
    for (const ParamVector& theta : chain.samples) {
      const rsa::SketchDistribution d = rsa::sketcher_distribution(
          table, costs, t.context, theta, variant, result.candidates, opts);
      for (std::size_t j = 0; j < n_cand; ++j) p.probs[j] += d.probs[j];
      if (mode == PredictMode::kPerSample) {
        p.rank += target_rank(d);
        p.congruent += context_congruity(d) ? 1.0 : 0.0;
        p.expected_cost += expected_cost(d, costs);
      }
    }
    for (double& v : p.probs) v /= n_samples;
    if (mode == PredictMode::kPerSample) {
      p.rank /= n_samples;
      p.congruent /= n_samples;
      p.expected_cost /= n_samples;
    } else {
      p.rank = target_rank(p.probs, result.candidates, p.context);
      p.congruent = context_congruity(p.probs, result.candidates, p.context) ? 1.0 : 0.0;
      p.expected_cost = expected_cost(p.probs, result.candidates, costs);
    }
    cache.emplace(key, std::move(p));
  }
  result.trials.reserve(trials.size());
  for (const TrialRecord& t : trials) result.trials.push_back(cache.at(t.context.key()));
  return result;
}

std::vector<std::pair<Metric, Estimate>> fold_estimates(const PredictiveResult& result,
                                                        int n_boot, std::uint64_t seed) {
  std::vector<double> rank, congruent, close_cost, far_cost;
  for (const TrialPrediction& p : result.trials) {
    rank.push_back(p.rank);
    congruent.push_back(p.congruent);
    (p.context.condition == Condition::kClose ? close_cost : far_cost).push_back(p.expected_cost);
  }
  std::vector<std::pair<Metric, Estimate>> out;
  // Distinct seed streams per metric keep the resamples independent.
  out.emplace_back(Metric::kTargetRank, bootstrap_summary(rank, n_boot, seed));
  out.emplace_back(Metric::kContextCongruity, bootstrap_summary(congruent, n_boot, seed + 1));
  if (!close_cost.empty()) {
    out.emplace_back(Metric::kCostClose, bootstrap_summary(close_cost, n_boot, seed + 2));
  }
  if (!far_cost.empty()) {
    out.emplace_back(Metric::kCostFar, bootstrap_summary(far_cost, n_boot, seed + 3));
  }
  return out;
}

}  // namespace sketchprag::metrics
