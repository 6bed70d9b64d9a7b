#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "sketchprag/inference.hpp"
#include "sketchprag/synth.hpp"
#include "support.hpp"

using namespace sketchprag;
using namespace sketchprag::inference;
using sketchprag::testing::random_costs;
using sketchprag::testing::random_table;

namespace {

// Trials over a 16-object inventory (4 categories of 4) with random sketches.
std::vector<TrialRecord> random_trials(std::size_t n, std::mt19937_64& rng) {
  std::vector<TrialRecord> out;
  std::uniform_int_distribution<int> obj(0, 3), sk(0, 31), cond(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    TrialRecord t;
    const int k = obj(rng);
    if (cond(rng) == 0) {
      const int c = obj(rng);
      std::array<int, 3> d{};
      int j = 0;
      for (int o = 4 * c; o < 4 * c + 4; ++o) {
        if (o != 4 * c + k) d[static_cast<std::size_t>(j++)] = o;
      }
      t.context = {4 * c + k, d, Condition::kClose};
    } else {
      t.context = {k, {4 + k, 8 + k, 12 + k}, Condition::kFar};
    }
    t.sketch = SketchCategory::from_index(sk(rng));
    if (i % 3 == 0) t.sketch = t.context.congruent();
    out.push_back(t);
  }
  return out;
}

PriorSpec small_prior(int points) {
  PriorSpec p;
  p.axes = {Axis::uniform(0, 10, points), Axis::uniform(0, 5, points), Axis::uniform(0, 1, points),
            Axis::uniform(0, 20, points)};
  return p;
}

GridPosterior two_point(double l0, double l1) {
  GridPosterior::Axes axes = {std::vector<double>{0.0}, std::vector<double>{0.0, 1.0},
                              std::vector<double>{0.0}, std::vector<double>{0.0}};
  GridPosterior::Support support = {std::pair{0.0, 1.0}, std::pair{0.0, 1.0},
                                    std::pair{0.0, 1.0}, std::pair{0.0, 1.0}};
  return GridPosterior(axes, support, {l0, l1}, Variant::kPragmatic);
}

}  // namespace

TEST_CASE("trial log-likelihood worked examples") {
  std::mt19937_64 rng(2);
  const auto table = random_table(32, rng);
  const auto costs = random_costs(32, rng);
  TrialRecord t;
  t.context = {0, {1, 2, 3}, Condition::kClose};
  t.sketch = {0, Condition::kClose};
  CHECK(trial_loglik(table, costs, t, {0, 0, 0.4, 3}, Variant::kPragmatic) ==
        doctest::Approx(-4.158883).epsilon(1e-7));
  const std::vector<SketchCategory> one = {t.sketch};
  CHECK(trial_loglik(table, costs, t, {4, 2, 0.4, 3}, Variant::kPragmatic, one) == 0.0);

  std::vector<double> scores(8 * 4, 0.0);
  scores[0] = 1.0;
  scores[1 * 4 + 1] = 1.0;
  for (std::size_t r = 2; r < 8; ++r) scores[r * 4 + 2] = 1.0;
  const CorrespondenceTable t2(Source::kHumanRecog, 4, scores);
  const CostVector zero(std::vector<double>(8, 0.0));
  const std::vector<SketchCategory> two = {{0, Condition::kClose}, {0, Condition::kFar}};
  CHECK(trial_loglik(t2, zero, t, {1, 0, 0, 1}, Variant::kPragmatic, two) ==
        doctest::Approx(-0.3132617).epsilon(1e-7));
}

TEST_CASE("grid posterior normalization and two-point example") {
  const GridPosterior gp = two_point(std::log(0.2), std::log(0.4));
  CHECK(gp.weights()[0] == doctest::Approx(1.0 / 3));
  CHECK(gp.weights()[1] == doctest::Approx(2.0 / 3));
  CHECK(marginal_loglik(gp) == doctest::Approx(std::log(0.3)));
  CHECK(bayes_factor(gp, gp) == 0.0);

  const GridPosterior flat = two_point(std::log(0.7), std::log(0.7));
  CHECK(marginal_loglik(flat) == doctest::Approx(std::log(0.7)));
  CHECK(flat.weights()[0] == doctest::Approx(0.5));

  const GridPosterior shifted = two_point(std::log(0.2) + 40.0, std::log(0.4) + 40.0);
  CHECK(shifted.weights()[0] == doctest::Approx(gp.weights()[0]).epsilon(1e-14));

  const double ninf = -std::numeric_limits<double>::infinity();
  CHECK_THROWS_KIND(two_point(ninf, ninf), ErrorKind::kDegenerateLikelihood);
}

TEST_CASE("Savage-Dickey worked examples") {
  const double ninf = -std::numeric_limits<double>::infinity();
  CHECK(savage_dickey(two_point(0.0, 0.0), 1, 0.0) == doctest::Approx(0.0));
  CHECK(savage_dickey(two_point(0.0, ninf), 1, 0.0) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_KIND(savage_dickey(two_point(0.0, 0.0), 1, 0.5), ErrorKind::kOffGridPoint);
}

TEST_CASE("grid likelihood matches the exhaustive oracle and is additive") {
  std::mt19937_64 rng(31);
  const PriorSpec prior = small_prior(5);
  for (int rep = 0; rep < 4; ++rep) {
    const auto table = random_table(16, rng);
    const auto costs = random_costs(16, rng);
    const auto trials = random_trials(30, rng);
    for (Variant v : {Variant::kPragmatic, Variant::kContextInsensitive, Variant::kCostInsensitive}) {
      const GridPosterior fast = grid_loglik(table, costs, trials, prior, v);
      const GridPosterior slow = synth::exhaustive_posterior(table, costs, trials, prior, v);
      REQUIRE(fast.size() == slow.size());
      double worst = 0.0;
      for (std::size_t g = 0; g < fast.size(); ++g) {
        worst = std::max(worst, std::abs(fast.log_lik()[g] - slow.log_lik()[g]));
      }
      CHECK(worst < 1e-9);
    }

    const std::span<const TrialRecord> all(trials);
    const auto a = grid_loglik(table, costs, all.subspan(0, 12), prior, Variant::kPragmatic);
    const auto b = grid_loglik(table, costs, all.subspan(12), prior, Variant::kPragmatic);
    const auto ab = grid_loglik(table, costs, all, prior, Variant::kPragmatic);
    for (std::size_t g = 0; g < ab.size(); ++g) {
      CHECK(ab.log_lik()[g] == doctest::Approx(a.log_lik()[g] + b.log_lik()[g]).epsilon(1e-12));
    }
  }
}

TEST_CASE("lesioned variants collapse their axis to zero") {
  std::mt19937_64 rng(5);
  const auto table = random_table(16, rng);
  const auto costs = random_costs(16, rng);
  const auto trials = random_trials(10, rng);
  const auto gp = grid_loglik(table, costs, trials, small_prior(4), Variant::kContextInsensitive);
  CHECK(gp.axes()[2] == std::vector<double>{0.0});
  CHECK(gp.size() == 4 * 4 * 4);
  const auto gc = grid_loglik(table, costs, trials, small_prior(4), Variant::kCostInsensitive);
  CHECK(gc.axes()[1] == std::vector<double>{0.0});
  double total = 0.0;
  for (double w : gc.weights()) total += w;
  CHECK(std::abs(total - 1.0) < 1e-9);
}

TEST_CASE("marginal likelihood is stable under grid refinement") {
  synth::SynthSpec spec;
  spec.n_categories = 4;
  spec.n_objects_per_category = 4;
  const auto w = synth::gen_world(spec);
  auto trials = synth::simulate_trials(w, {3, 1, 0.5, 8}, Variant::kPragmatic, 1, 12);
  trials.resize(4);
  const double m21 = marginal_loglik(grid_loglik(w.table, w.costs, trials, small_prior(21), Variant::kPragmatic));
  const double m41 = marginal_loglik(grid_loglik(w.table, w.costs, trials, small_prior(41), Variant::kPragmatic));
  CHECK(std::abs(std::exp(m41 - m21) - 1.0) < 0.05);
}

TEST_CASE("marginal likelihood is invariant to grid-point order") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 3.0);
  GridPosterior::Axes axes = {std::vector<double>{0.0, 1.0, 2.0}, std::vector<double>{0.0, 1.0},
                              std::vector<double>{0.0, 0.5}, std::vector<double>{0.0, 1.0}};
  GridPosterior::Support support = {std::pair{0.0, 2.0}, std::pair{0.0, 1.0}, std::pair{0.0, 1.0},
                                    std::pair{0.0, 1.0}};
  std::vector<double> ll(24);
  for (double& x : ll) x = g(rng);
  const double m = marginal_loglik(GridPosterior(axes, support, ll, Variant::kPragmatic));
  std::shuffle(ll.begin(), ll.end(), rng);
  CHECK(marginal_loglik(GridPosterior(axes, support, ll, Variant::kPragmatic)) ==
        doctest::Approx(m).epsilon(1e-12));
}

TEST_CASE("Bayes factors are antisymmetric") {
  std::mt19937_64 rng(41);
  const auto table = random_table(16, rng);
  const auto costs = random_costs(16, rng);
  const auto trials = random_trials(20, rng);
  const auto full = grid_loglik(table, costs, trials, small_prior(6), Variant::kPragmatic);
  const auto sim = grid_loglik(table, costs, trials, small_prior(6), Variant::kContextInsensitive);
  CHECK(bayes_factor(full, sim) == doctest::Approx(-bayes_factor(sim, full)));
}

TEST_CASE("MCMC on a flat density accepts every proposal") {
  const PriorSpec prior = small_prior(3);
  McmcConfig cfg;
  cfg.n_samples = 500;
  cfg.burn_in = 100;
  cfg.seed = 3;
  const McmcChain chain = random_walk_metropolis([](const ParamVector&) { return 0.0; }, prior,
                                                 Variant::kPragmatic, cfg);
  CHECK(chain.acceptance_rate == 1.0);
  CHECK(chain.samples.size() == 500);
  for (const ParamVector& p : chain.samples) {
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(p[i] >= prior.axes[i].lo);
      CHECK(p[i] <= prior.axes[i].hi);
    }
  }
  CHECK(chain.warnings.empty());

  const McmcChain sim = random_walk_metropolis([](const ParamVector&) { return 0.0; }, prior,
                                               Variant::kContextInsensitive, cfg);
  for (const ParamVector& p : sim.samples) CHECK(p.w_d == 0.0);
}

TEST_CASE("MCMC is deterministic per seed") {
  std::mt19937_64 rng(6);
  const auto table = random_table(16, rng);
  const auto costs = random_costs(16, rng);
  const auto trials = random_trials(15, rng);
  McmcConfig cfg;
  cfg.n_samples = 200;
  cfg.burn_in = 200;
  cfg.seed = 77;
  const auto a = mcmc_sample(table, costs, trials, small_prior(5), Variant::kPragmatic, cfg);
  const auto b = mcmc_sample(table, costs, trials, small_prior(5), Variant::kPragmatic, cfg);
  CHECK(a.samples == b.samples);
  CHECK(a.acceptance_rate == b.acceptance_rate);
}

TEST_CASE("MCMC balances flow between two regions") {
  // Density 3x higher where w_i > 5; stationary mass there is 3/4 and the
  // number of crossings each way must agree.
  const PriorSpec prior = small_prior(3);
  McmcConfig cfg;
  cfg.n_samples = 100000;
  cfg.burn_in = 1000;
  cfg.proposal_scale = 0.3;
  cfg.seed = 19;
  const auto chain = random_walk_metropolis(
      [](const ParamVector& p) { return p.w_i > 5.0 ? std::log(3.0) : 0.0; }, prior,
      Variant::kPragmatic, cfg);
  int in_b = 0, ab = 0, ba = 0;
  for (std::size_t i = 0; i < chain.samples.size(); ++i) {
    const bool b = chain.samples[i].w_i > 5.0;
    in_b += b;
    if (i > 0) {
      const bool prev = chain.samples[i - 1].w_i > 5.0;
      ab += !prev && b;
      ba += prev && !b;
    }
  }
  const double frac = in_b / static_cast<double>(chain.samples.size());
  CHECK(frac == doctest::Approx(0.75).epsilon(0.03));
  CHECK(std::abs(ab - ba) <= 1);
  CHECK(ab > 1000);
}

TEST_CASE("prior presets") {
  const PriorSpec p = PriorSpec::wide();
  for (const Axis& a : p.axes) {
    CHECK(a.points.size() == 21);
    CHECK(a.hi == 50.0);
  }
  const PriorSpec u = PriorSpec::unit_diagnosticity(11);
  CHECK(u.axes[2].hi == 1.0);
  CHECK(u.axes[2].points.back() == 1.0);
  PriorSpec bad = p;
  bad.axes[1] = Axis::uniform(1.0, 5.0, 3);
  CHECK_THROWS_KIND(bad.validate(), ErrorKind::kConfigError);
}
