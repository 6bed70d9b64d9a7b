#include <doctest.h>

#include <cmath>
#include <random>

#include "sketchprag/metrics.hpp"
#include "support.hpp"

using namespace sketchprag;
using namespace sketchprag::metrics;
using sketchprag::testing::random_costs;
using sketchprag::testing::random_table;

namespace {

std::vector<SketchCategory> four_candidates() {
  return {{0, Condition::kClose}, {0, Condition::kFar}, {1, Condition::kClose}, {1, Condition::kFar}};
}

}  // namespace

TEST_CASE("target rank") {
  const auto cands = four_candidates();
  const Context close{0, {1, 2, 3}, Condition::kClose};
  const Context far{0, {8, 16, 24}, Condition::kFar};
  CHECK(target_rank(std::vector<double>{0.7, 0.1, 0.1, 0.1}, cands, close) == 1);
  CHECK(target_rank(std::vector<double>{0.1, 0.2, 0.3, 0.4}, cands, close) == 4);
  CHECK(target_rank(std::vector<double>{0.1, 0.2, 0.3, 0.4}, cands, far) == 3);
  // Equal probabilities: categories with a lower index rank ahead.
  const std::vector<double> flat(4, 0.25);
  CHECK(target_rank(flat, cands, close) == 1);
  CHECK(target_rank(flat, cands, far) == 2);
  CHECK(target_rank(std::vector<double>{0.3, 0.3, 0.2, 0.2}, cands, far) == 2);

  std::mt19937_64 rng(1);
  const auto table = random_table(32, rng);
  const auto costs = random_costs(32, rng);
  const Context ctx{9, {8, 10, 11}, Condition::kFar};
  const auto uni = rsa::sketcher_distribution(table, costs, ctx, {0, 0, 0, 1}, Variant::kPragmatic);
  CHECK(target_rank(uni) == SketchCategory{9, Condition::kFar}.index() + 1);
}

TEST_CASE("property: rank 1 iff strict maximum") {
  const auto cands = four_candidates();
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> level(0, 3);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> p(4);
    for (double& x : p) x = 0.1 * level(rng);
    const Context ctx{0, {1, 2, 3}, rep % 2 ? Condition::kFar : Condition::kClose};
    const std::size_t t = static_cast<std::size_t>(ctx.congruent().index());
    bool strict = true;
    for (std::size_t k = 0; k < 4; ++k) {
      if (k != t && p[k] >= p[t]) strict = false;
    }
    const bool tie_wins_by_index = [&] {
      for (std::size_t k = 0; k < 4; ++k) {
        if (p[k] > p[t] || (k < t && p[k] == p[t])) return false;
      }
      return true;
    }();
    CHECK((target_rank(p, cands, ctx) == 1) == tie_wins_by_index);
    if (strict) CHECK(target_rank(p, cands, ctx) == 1);
  }
}

TEST_CASE("context congruity is strict") {
  const auto cands = four_candidates();
  const Context close{0, {1, 2, 3}, Condition::kClose};
  CHECK(context_congruity(std::vector<double>{0.10, 0.05, 0.5, 0.35}, cands, close));
  CHECK_FALSE(context_congruity(std::vector<double>{0.10, 0.10, 0.4, 0.4}, cands, close));
  const Context far{0, {8, 16, 24}, Condition::kFar};
  CHECK_FALSE(context_congruity(std::vector<double>{0.10, 0.05, 0.5, 0.35}, cands, far));
}

TEST_CASE("expected cost") {
  const auto cands = four_candidates();
  const CostVector costs({0.3, 0.9, 0.0, 1.0});
  CHECK(expected_cost(std::vector<double>{1, 0, 0, 0}, cands, costs) == 0.3);
  CHECK(expected_cost(std::vector<double>(4, 0.25), cands, costs) == doctest::Approx(costs.mean()));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 300; ++rep) {
    auto p = sketchprag::testing::random_simplex(4, rng);
    const double before = expected_cost(p, cands, costs);
    // Move mass from the cheapest (index 2) to the costliest (index 3).
    const double m = p[2] * u(rng);
    p[2] -= m;
    p[3] += m;
    CHECK(expected_cost(p, cands, costs) >= before - 1e-15);
  }
}

TEST_CASE("bootstrap summary") {
  const std::vector<double> same(20, 0.4);
  const Estimate e = bootstrap_summary(same, 200, 1);
  CHECK(e.mean == doctest::Approx(0.4));
  CHECK(e.se == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(bootstrap_summary(std::vector<double>{2.5}, 100, 1).se == 0.0);

  std::vector<double> coin(400);
  for (std::size_t i = 0; i < coin.size(); ++i) coin[i] = static_cast<double>(i % 2);
  const Estimate b = bootstrap_summary(coin, 4000, 7);
  CHECK(b.se == doctest::Approx(0.5 / std::sqrt(400.0)).epsilon(0.1));
  const Estimate b2 = bootstrap_summary(coin, 4000, 7);
  CHECK(b2.mean == b.mean);
  CHECK(b2.se == b.se);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(3.0, 2.0);
  std::vector<double> sample(50);
  double mean = 0.0;
  for (double& x : sample) mean += (x = g(rng));
  mean /= 50.0;
  CHECK(bootstrap_summary(sample, 100000, 3).mean == doctest::Approx(mean).epsilon(0.01));
}

TEST_CASE("inverse-variance aggregation") {
  const std::vector<Estimate> equal = {{1.0, 0.5}, {3.0, 0.5}};
  const auto s = ivw_aggregate(Metric::kTargetRank, equal);
  CHECK(s.mean == doctest::Approx(2.0));
  CHECK(s.ci95_halfwidth == doctest::Approx(kZ95 * s.se));

  const std::vector<Estimate> worked = {{0.0, 1.0}, {1.0, 1.0 / std::sqrt(3.0)}};
  const auto w = ivw_aggregate(Metric::kCostClose, worked);
  CHECK(w.mean == doctest::Approx(0.75));
  CHECK(w.se == doctest::Approx(0.5));

  const std::vector<Estimate> single = {{0.42, 0.1}};
  CHECK(ivw_aggregate(Metric::kCostFar, single).mean == doctest::Approx(0.42));
  CHECK(ivw_aggregate(Metric::kCostFar, single).se == doctest::Approx(0.1));

  const std::vector<Estimate> zeros = {{1.0, 0.0}, {2.0, 0.0}};
  CHECK(ivw_aggregate(Metric::kTargetRank, zeros).mean == doctest::Approx(1.5));
  const std::vector<Estimate> mixed = {{1.0, 0.0}, {2.0, 0.3}};
  CHECK_THROWS_KIND(ivw_aggregate(Metric::kTargetRank, mixed), ErrorKind::kDegenerateWeights);

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<Estimate> e(5);
    double m = 0.0;
    for (auto& x : e) {
      x = {u(rng), 0.2};
      m += x.mean;
    }
    CHECK(ivw_aggregate(Metric::kTargetRank, e).mean == doctest::Approx(m / 5));
  }
}

TEST_CASE("posterior predictive averages sample distributions") {
  std::mt19937_64 rng(7);
  const auto table = random_table(32, rng);
  const auto costs = random_costs(32, rng);
  TrialRecord t;
  t.context = {4, {5, 6, 7}, Condition::kClose};
  t.sketch = t.context.congruent();
  const std::vector<TrialRecord> trials = {t, t};

  const ParamVector a{3, 1, 0.5, 4}, b{10, 0.2, 0.9, 20};
  inference::McmcChain one;
  one.samples = {a};
  const auto r1 = posterior_predict(one, table, costs, trials, Variant::kPragmatic);
  const auto direct = rsa::sketcher_distribution(table, costs, t.context, a, Variant::kPragmatic);
  REQUIRE(r1.trials.size() == 2);
  for (std::size_t k = 0; k < 64; ++k) CHECK(r1.trials[0].probs[k] == doctest::Approx(direct.probs[k]).epsilon(1e-14));
  CHECK(r1.trials[0].rank == target_rank(direct));

  inference::McmcChain same;
  same.samples = {a, a, a};
  const auto r3 = posterior_predict(same, table, costs, trials, Variant::kPragmatic);
  for (std::size_t k = 0; k < 64; ++k) CHECK(r3.trials[1].probs[k] == doctest::Approx(direct.probs[k]).epsilon(1e-14));

  inference::McmcChain two;
  two.samples = {a, b};
  const auto r2 = posterior_predict(two, table, costs, trials, Variant::kPragmatic);
  const auto db = rsa::sketcher_distribution(table, costs, t.context, b, Variant::kPragmatic);
  double total = 0.0;
  for (std::size_t k = 0; k < 64; ++k) {
    CHECK(r2.trials[0].probs[k] == doctest::Approx(0.5 * (direct.probs[k] + db.probs[k])).epsilon(1e-14));
    total += r2.trials[0].probs[k];
  }
  CHECK(std::abs(total - 1.0) < 1e-9);

  const auto per = posterior_predict(two, table, costs, trials, Variant::kPragmatic, PredictMode::kPerSample);
  CHECK(per.trials[0].expected_cost ==
        doctest::Approx(0.5 * (expected_cost(direct, costs) + expected_cost(db, costs))));
  CHECK(per.trials[0].rank == doctest::Approx(0.5 * (target_rank(direct) + target_rank(db))));

  const auto est = fold_estimates(r2, 100, 1);
  bool has_far = false;
  for (const auto& [m, e] : est) has_far |= m == Metric::kCostFar;
  CHECK_FALSE(has_far);
  CHECK(est.size() == 3);
}

TEST_CASE("metric names") {
  CHECK(metric_name(Metric::kTargetRank) == "target_rank");
  CHECK(metric_name(Metric::kContextCongruity) == "context_congruity");
}
