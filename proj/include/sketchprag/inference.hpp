#pragma once

// Bayesian model comparison for the sketcher: exact likelihoods on a
// parameter grid, marginal likelihoods and Bayes factors, Savage-Dickey
// density ratios for nested lesions, and random-walk Metropolis-Hastings for
// posterior predictives.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sketchprag/corpus.hpp"
#include "sketchprag/rsa.hpp"

namespace sketchprag::inference {

struct Axis {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> points;

  // n evenly spaced points including both endpoints.
  static Axis uniform(double lo, double hi, int n);
  // n cell midpoints of [lo, hi].
  static Axis midpoints(double lo, double hi, int n);
  double width() const { return hi - lo; }
};

struct PriorSpec {
  // Ordered as ParamVector: w_i, w_c, w_d, alpha.
  std::array<Axis, ParamVector::kSize> axes;
  std::vector<Source> sources = {Source::kHumanRecog, Source::kEncoderHigh,
                                 Source::kEncoderMid, Source::kEncoderLow};

  // Unif(0, 50) on every parameter.
  static PriorSpec wide(int points = 21);
  // As wide() but w_d restricted to [0, 1], its interpolation range.
  static PriorSpec unit_diagnosticity(int points = 21);

  // Throws kConfigError on empty axes, inverted supports, or a support that
  // does not include 0 (the lesion point) on its lower boundary.
  void validate() const;
};

class GridPosterior {
 public:
  using Axes = std::array<std::vector<double>, ParamVector::kSize>;
  using Support = std::array<std::pair<double, double>, ParamVector::kSize>;

  GridPosterior(Axes axes, Support support, std::vector<double> log_lik,
                Variant variant);

  const Axes& axes() const { return axes_; }
  const Support& support() const { return support_; }
  const std::vector<double>& log_lik() const { return log_lik_; }
  const std::vector<double>& weights() const { return weights_; }
  Variant variant() const { return variant_; }
  std::size_t size() const { return log_lik_.size(); }
  // Uniform prior mass of each grid point, in log space.
  double log_prior() const { return log_prior_; }

  std::size_t flat_index(const std::array<std::size_t, ParamVector::kSize>& idx) const;
  std::array<std::size_t, ParamVector::kSize> unflatten(std::size_t flat) const;
  ParamVector point(std::size_t flat) const;
  ParamVector mode() const;
  // Posterior mass on each point of one axis.
  std::vector<double> marginal(std::size_t param) const;

 private:
  Axes axes_;
  Support support_;
  std::vector<double> log_lik_;
  std::vector<double> weights_;
  double log_prior_ = 0.0;
  Variant variant_;
};

// Trials grouped by context so each group's normalizer is computed once.
class LikelihoodModel {
 public:
  LikelihoodModel(const CorrespondenceTable& table, const CostVector& costs,
                  std::span<const TrialRecord> trials,
                  std::span<const SketchCategory> candidates = {},
                  const rsa::RsaOptions& opts = {});

  double log_lik(ParamVector params, Variant variant) const;
  std::size_t num_trials() const { return num_trials_; }
  std::size_t num_contexts() const { return groups_.size(); }

  struct Group {
    Context context;
    double count = 0.0;
    // (candidate position, number of trials that produced it)
    std::vector<std::pair<std::size_t, double>> observed;
  };

  struct GroupTerms {
    rsa::UtilityTerms terms;
    double obs_diagnosticity = 0.0;
    double obs_resemblance = 0.0;
    double obs_cost = 0.0;
    double count = 0.0;
  };

  GroupTerms terms(std::size_t group, double alpha) const;
  static double group_log_lik(const GroupTerms& g, const rsa::Coefficients& k);

 private:
  const CorrespondenceTable* table_;
  const CostVector* costs_;
  rsa::RsaOptions opts_;
  std::vector<SketchCategory> candidates_;
  std::vector<Group> groups_;
  std::size_t num_trials_ = 0;
};

// ln S(observed sketch | context; theta).
double trial_loglik(const CorrespondenceTable& table, const CostVector& costs,
                    const TrialRecord& trial, ParamVector params, Variant variant,
                    std::span<const SketchCategory> candidates = {},
                    const rsa::RsaOptions& opts = {});

// The lesioned parameter's axis collapses to the single point 0.
GridPosterior grid_loglik(const CorrespondenceTable& table, const CostVector& costs,
                          std::span<const TrialRecord> trials,
                          const PriorSpec& prior, Variant variant,
                          std::span<const SketchCategory> candidates = {},
                          const rsa::RsaOptions& opts = {});

// Log of the prior-weighted mean likelihood (log-mean-exp over the grid).
double marginal_loglik(const GridPosterior& gp);

// log BF of model 1 over model 2.
double bayes_factor(const GridPosterior& gp1, const GridPosterior& gp2);

// log BF of the nested model (param fixed at value) over the full model:
// log of posterior density / prior density at the nested point. Densities are
// plane mass divided by the cell width (support width / points on the axis).
double savage_dickey(const GridPosterior& full, std::size_t param, double value);

struct McmcConfig {
  int n_samples = 1000;
  int burn_in = 3000;
  // Gaussian proposal s.d. as a fraction of each support width.
  double proposal_scale = 0.05;
  std::uint64_t seed = 0;
};

struct McmcChain {
  std::vector<ParamVector> samples;
  double acceptance_rate = 0.0;
  McmcConfig config;
  Variant variant = Variant::kPragmatic;
  std::vector<std::string> warnings;
};

using LogDensity = std::function<double(const ParamVector&)>;

// Random-walk Metropolis-Hastings inside the prior box, reflecting at the
// boundaries, started at the box midpoint. Parameters a variant pins to zero
// are never proposed.
McmcChain random_walk_metropolis(const LogDensity& log_density,
                                 const PriorSpec& prior, Variant variant,
                                 const McmcConfig& cfg);

McmcChain mcmc_sample(const CorrespondenceTable& table, const CostVector& costs,
                      std::span<const TrialRecord> trials, const PriorSpec& prior,
                      Variant variant, const McmcConfig& cfg,
                      const rsa::RsaOptions& opts = {});

}  // namespace sketchprag::inference
