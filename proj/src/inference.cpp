#include "sketchprag/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "sketchprag/error.hpp"
#include "sketchprag/kernels.hpp"

namespace sketchprag::inference {

Axis Axis::uniform(double lo, double hi, int n) {
  if (n < 1) fail(ErrorKind::kConfigError, "grid axis needs at least one point");
  Axis a{lo, hi, {}};
  a.points.reserve(static_cast<std::size_t>(n));
  if (n == 1) {
    a.points.push_back(lo);
    return a;
  }
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (int i = 0; i < n; ++i) {
    a.points.push_back(i == n - 1 ? hi : lo + step * static_cast<double>(i));
  }
  return a;
}

Axis Axis::midpoints(double lo, double hi, int n) {
  if (n < 1) fail(ErrorKind::kConfigError, "grid axis needs at least one point");
  Axis a{lo, hi, {}};
  const double step = (hi - lo) / static_cast<double>(n);
  for (int i = 0; i < n; ++i) a.points.push_back(lo + step * (static_cast<double>(i) + 0.5));
  return a;
}

PriorSpec PriorSpec::wide(int points) {
  PriorSpec p;
  for (auto& axis : p.axes) axis = Axis::uniform(0.0, 50.0, points);
  return p;
}

PriorSpec PriorSpec::unit_diagnosticity(int points) {
  PriorSpec p = wide(points);
  p.axes[2] = Axis::uniform(0.0, 1.0, points);
  return p;
}

void PriorSpec::validate() const {
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const Axis& a = axes[i];
    const std::string name(kParamNames[i]);
    if (a.points.empty()) fail(ErrorKind::kConfigError, name + ": empty grid axis");
    if (!(a.hi > a.lo)) fail(ErrorKind::kConfigError, name + ": support must have positive width");
    if (a.lo != 0.0) {
      fail(ErrorKind::kConfigError, name + ": support must start at the lesion point 0");
    }
    for (double v : a.points) {
      if (!(v >= a.lo && v <= a.hi)) {
        fail(ErrorKind::kConfigError, name + ": grid point outside support");
      }
    }
  }
}

GridPosterior::GridPosterior(Axes axes, Support support, std::vector<double> log_lik,
                             Variant variant)
    : axes_(std::move(axes)),
      support_(support),
      log_lik_(std::move(log_lik)),
      variant_(variant) {
  std::size_t n = 1;
  for (const auto& a : axes_) n *= a.size();
  if (n != log_lik_.size() || n == 0) {
    fail(ErrorKind::kShapeError, "log-likelihood tensor does not match grid axes");
  }
  const double lse = kernels::scalar_table().logsumexp(log_lik_.data(), n);
  if (!std::isfinite(lse)) {
    fail(ErrorKind::kDegenerateLikelihood, "every grid point has zero likelihood");
  }
  weights_.resize(n);
  for (std::size_t i = 0; i < n; ++i) weights_[i] = std::exp(log_lik_[i] - lse);
  log_prior_ = -std::log(static_cast<double>(n));
}

std::size_t GridPosterior::flat_index(
    const std::array<std::size_t, ParamVector::kSize>& idx) const {
  std::size_t flat = 0;
  for (std::size_t p = 0; p < ParamVector::kSize; ++p) flat = flat * axes_[p].size() + idx[p];
  return flat;
}

std::array<std::size_t, ParamVector::kSize> GridPosterior::unflatten(std::size_t flat) const {
  std::array<std::size_t, ParamVector::kSize> idx{};
  for (std::size_t p = ParamVector::kSize; p-- > 0;) {
    idx[p] = flat % axes_[p].size();
    flat /= axes_[p].size();
  }
  return idx;
}

ParamVector GridPosterior::point(std::size_t flat) const {
  const auto idx = unflatten(flat);
  ParamVector v;
  for (std::size_t p = 0; p < ParamVector::kSize; ++p) v[p] = axes_[p][idx[p]];
  return v;
}

ParamVector GridPosterior::mode() const {
  const auto it = std::max_element(weights_.begin(), weights_.end());
  return point(static_cast<std::size_t>(it - weights_.begin()));
}

std::vector<double> GridPosterior::marginal(std::size_t param) const {
  std::vector<double> out(axes_.at(param).size(), 0.0);
  for (std::size_t i = 0; i < weights_.size(); ++i) out[unflatten(i)[param]] += weights_[i];
  return out;
}

LikelihoodModel::LikelihoodModel(const CorrespondenceTable& table,
                                 const CostVector& costs,
                                 std::span<const TrialRecord> trials,
                                 std::span<const SketchCategory> candidates,
                                 const rsa::RsaOptions& opts)
    : table_(&table), costs_(&costs), opts_(opts) {
  if (candidates.empty()) {
    candidates_ = rsa::default_candidates(table);
  } else {
    candidates_.assign(candidates.begin(), candidates.end());
  }
  if (costs.size() != table.num_rows()) {
    fail(ErrorKind::kShapeError, "cost vector and correspondence table disagree in size");
  }
  std::vector<int> position(table.num_rows(), -1);
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    position[static_cast<std::size_t>(candidates_[i].index())] = static_cast<int>(i);
  }

  std::map<std::string, std::size_t> by_key;
  for (const TrialRecord& t : trials) {
    const auto sk = static_cast<std::size_t>(t.sketch.index());
    if (sk >= position.size() || position[sk] < 0) {
      fail(ErrorKind::kInvalidArgument, "observed sketch is not a candidate");
    }
    const std::string key = t.context.key();
    auto [it, inserted] = by_key.emplace(key, groups_.size());
    if (inserted) groups_.push_back(Group{t.context, 0.0, {}});
    Group& g = groups_[it->second];
    g.count += 1.0;
    const auto pos = static_cast<std::size_t>(position[sk]);
    auto obs = std::find_if(g.observed.begin(), g.observed.end(),
                            [&](const auto& e) { return e.first == pos; });
    if (obs == g.observed.end()) {
      g.observed.emplace_back(pos, 1.0);
    } else {
      obs->second += 1.0;
    }
    ++num_trials_;
  }
}

LikelihoodModel::GroupTerms LikelihoodModel::terms(std::size_t group, double alpha) const {
  const Group& g = groups_[group];
  GroupTerms out;
  out.terms = rsa::utility_terms(*table_, *costs_, g.context, alpha, candidates_, opts_);
  out.count = g.count;
  for (const auto& [pos, n] : g.observed) {
    out.obs_diagnosticity += n * out.terms.diagnosticity[pos];
    out.obs_resemblance += n * out.terms.resemblance[pos];
    out.obs_cost += n * out.terms.cost[pos];
  }
  return out;
}

double LikelihoodModel::group_log_lik(const GroupTerms& g, const rsa::Coefficients& k) {
  const double lse = kernels::lse_affine3(k.diagnosticity, g.terms.diagnosticity,
                                          k.resemblance, g.terms.resemblance, k.cost,
                                          g.terms.cost);
  return k.diagnosticity * g.obs_diagnosticity + k.resemblance * g.obs_resemblance +
         k.cost * g.obs_cost - g.count * lse;
}

double LikelihoodModel::log_lik(ParamVector params, Variant variant) const {
  const rsa::Coefficients k = rsa::coefficients(params, variant);
  double total = 0.0;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    total += group_log_lik(terms(g, params.alpha), k);
  }
  return total;
}

double trial_loglik(const CorrespondenceTable& table, const CostVector& costs,
                    const TrialRecord& trial, ParamVector params, Variant variant,
                    std::span<const SketchCategory> candidates,
                    const rsa::RsaOptions& opts) {
  const rsa::SketchDistribution d =
      rsa::sketcher_distribution(table, costs, trial.context, params, variant, candidates, opts);
  const int pos = d.position(trial.sketch);
  if (pos < 0) fail(ErrorKind::kInvalidArgument, "observed sketch is not a candidate");
  return d.log_probs[static_cast<std::size_t>(pos)];
}

GridPosterior grid_loglik(const CorrespondenceTable& table, const CostVector& costs,
                          std::span<const TrialRecord> trials, const PriorSpec& prior,
                          Variant variant, std::span<const SketchCategory> candidates,
                          const rsa::RsaOptions& opts) {
  prior.validate();
  if (trials.empty()) fail(ErrorKind::kEmptyCorpus, "grid likelihood needs at least one trial");
  const LikelihoodModel model(table, costs, trials, candidates, opts);

  GridPosterior::Axes axes;
  GridPosterior::Support support;
  const auto forced = forced_param(variant);
  for (std::size_t p = 0; p < ParamVector::kSize; ++p) {
    axes[p] = forced == p ? std::vector<double>{0.0} : prior.axes[p].points;
    support[p] = {prior.axes[p].lo, prior.axes[p].hi};
  }
  const std::size_t n_wi = axes[0].size(), n_wc = axes[1].size(),
                    n_wd = axes[2].size(), n_alpha = axes[3].size();
  std::vector<double> log_lik(n_wi * n_wc * n_wd * n_alpha);

  std::vector<LikelihoodModel::GroupTerms> terms(model.num_contexts());
  for (std::size_t ia = 0; ia < n_alpha; ++ia) {
    const double alpha = axes[3][ia];
    for (std::size_t g = 0; g < terms.size(); ++g) terms[g] = model.terms(g, alpha);
    for (std::size_t i0 = 0; i0 < n_wi; ++i0) {
      for (std::size_t i1 = 0; i1 < n_wc; ++i1) {
        for (std::size_t i2 = 0; i2 < n_wd; ++i2) {
          const ParamVector theta{axes[0][i0], axes[1][i1], axes[2][i2], alpha};
          const rsa::Coefficients k = rsa::coefficients(theta, variant);
          double total = 0.0;
          for (const auto& g : terms) total += LikelihoodModel::group_log_lik(g, k);
          log_lik[((i0 * n_wc + i1) * n_wd + i2) * n_alpha + ia] = total;
        }
      }
    }
  }
  return GridPosterior(std::move(axes), support, std::move(log_lik), variant);
}

double marginal_loglik(const GridPosterior& gp) {
  const auto& ll = gp.log_lik();
  return kernels::scalar_table().logsumexp(ll.data(), ll.size()) + gp.log_prior();
}

double bayes_factor(const GridPosterior& gp1, const GridPosterior& gp2) {
  return marginal_loglik(gp1) - marginal_loglik(gp2);
}

double savage_dickey(const GridPosterior& full, std::size_t param, double value) {
  if (param >= ParamVector::kSize) fail(ErrorKind::kInvalidArgument, "parameter index out of range");
  const auto& axis = full.axes()[param];
  const auto [lo, hi] = full.support()[param];
  if (axis.size() < 2) {
    fail(ErrorKind::kInvalidArgument,
         std::string(kParamNames[param]) + " is fixed in this posterior");
  }
  const double tol = 1e-9 * std::max(1.0, hi - lo);
  std::size_t plane = axis.size();
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (std::abs(axis[i] - value) <= tol) plane = i;
  }
  if (plane == axis.size()) {
    fail(ErrorKind::kOffGridPoint, std::string(kParamNames[param]) + " = " +
                                       std::to_string(value) + " is not a grid plane");
  }
  const double mass = full.marginal(param)[plane];
  const double cell = (hi - lo) / static_cast<double>(axis.size());
  const double posterior_density = mass / cell;
  const double prior_density = 1.0 / (hi - lo);
  return std::log(posterior_density) - std::log(prior_density);
}

namespace {

double reflect(double x, double lo, double hi) {
  const double width = hi - lo;
  if (width <= 0.0) return lo;
  // Fold onto [lo, lo + 2 * width) then mirror the upper half.
  double y = std::fmod(x - lo, 2.0 * width);
  if (y < 0.0) y += 2.0 * width;
  if (y > width) y = 2.0 * width - y;
  return lo + y;
}

}  // namespace

McmcChain random_walk_metropolis(const LogDensity& log_density, const PriorSpec& prior,
                                 Variant variant, const McmcConfig& cfg) {
  if (cfg.n_samples < 1 || cfg.burn_in < 0 || !(cfg.proposal_scale > 0.0)) {
    fail(ErrorKind::kConfigError, "invalid MCMC configuration");
  }
  const auto forced = forced_param(variant);
  std::array<bool, ParamVector::kSize> free{};
  ParamVector current;
  for (std::size_t p = 0; p < ParamVector::kSize; ++p) {
    const Axis& a = prior.axes[p];
    free[p] = forced != p && a.hi > a.lo;
    current[p] = forced == p ? 0.0 : 0.5 * (a.lo + a.hi);
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  double current_lp = log_density(current);
  McmcChain chain;
  chain.config = cfg;
  chain.variant = variant;
  chain.samples.reserve(static_cast<std::size_t>(cfg.n_samples));
  const int total = cfg.burn_in + cfg.n_samples;
  int accepted = 0;
  for (int it = 0; it < total; ++it) {
    ParamVector proposal = current;
    for (std::size_t p = 0; p < ParamVector::kSize; ++p) {
      if (!free[p]) continue;
      const Axis& a = prior.axes[p];
      proposal[p] = reflect(current[p] + cfg.proposal_scale * a.width() * normal(rng), a.lo, a.hi);
    }
    const double lp = log_density(proposal);
    const double u = unif(rng);
    if (std::log(u) < lp - current_lp) {
      current = proposal;
      current_lp = lp;
      ++accepted;
    }
    if (it >= cfg.burn_in) chain.samples.push_back(current);
  }
  chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(total);
  if (chain.acceptance_rate < 0.01) {
    chain.warnings.push_back("PoorMixing: acceptance rate " +
                             std::to_string(chain.acceptance_rate));
  }
  return chain;
}

McmcChain mcmc_sample(const CorrespondenceTable& table, const CostVector& costs,
                      std::span<const TrialRecord> trials, const PriorSpec& prior,
                      Variant variant, const McmcConfig& cfg,
                      const rsa::RsaOptions& opts) {
  prior.validate();
  const LikelihoodModel model(table, costs, trials, {}, opts);
  return random_walk_metropolis(
      [&](const ParamVector& theta) { return model.log_lik(theta, variant); }, prior,
      variant, cfg);
}

}  // namespace sketchprag::inference
