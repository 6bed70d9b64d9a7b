#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "sketchprag/inference.hpp"
#include "sketchprag/synth.hpp"
#include "support.hpp"

using namespace sketchprag;
using namespace sketchprag::synth;

namespace {

// Own-object score minus the mean score of the other same-category objects.
double contrast(const World& w, SketchCategory s) {
  const int per = w.spec.n_objects_per_category;
  const int cat = w.inventory.category_of(s.object);
  double others = 0.0;
  for (int k = 0; k < per; ++k) {
    if (cat * per + k != s.object) others += w.table.sim(s, cat * per + k);
  }
  return w.table.sim(s, s.object) - others / (per - 1);
}

std::map<int, int> counts_for_context(const std::vector<TrialRecord>& trials, std::size_t ctx) {
  std::map<int, int> c;
  for (const auto& t : trials) {
    if (static_cast<std::size_t>(t.trial_index) == ctx) ++c[t.sketch.index()];
  }
  return c;
}

}  // namespace

TEST_CASE("gen_world is deterministic and well formed") {
  SynthSpec spec;
  spec.seed = 12;
  spec.n_sets = 2;
  const World a = gen_world(spec);
  const World b = gen_world(spec);
  CHECK(a.table.scores() == b.table.scores());
  CHECK(a.costs.values() == b.costs.values());
  REQUIRE(a.contexts.size() == b.contexts.size());
  for (std::size_t i = 0; i < a.contexts.size(); ++i) CHECK(a.contexts[i].key() == b.contexts[i].key());

  CHECK(a.table.num_objects() == 32);
  CHECK(a.table.max_row_sum_error() < 1e-9);
  for (double x : a.table.scores()) CHECK((x >= 0.0 && x <= 1.0));
  const auto [lo, hi] = std::minmax_element(a.costs.values().begin(), a.costs.values().end());
  CHECK(*lo == 0.0);
  CHECK(*hi == 1.0);

  // Every object is a target once per condition per set, in a valid context.
  CHECK(a.contexts.size() == 2 * 32 * 2);
  std::map<std::pair<int, int>, int> targets;
  for (const Context& c : a.contexts) {
    CHECK_NOTHROW(validate_context(a.inventory, c));
    ++targets[{c.target, static_cast<int>(c.condition)}];
  }
  CHECK(targets.size() == 64);
  for (const auto& [k, n] : targets) CHECK(n == 2);
}

TEST_CASE("detail bonus sharpens close rows") {
  SynthSpec spec;
  spec.detail_bonus = 0.0;
  spec.noise = 0.0;
  const World flat = gen_world(spec);
  for (int o = 0; o < 32; ++o) {
    const auto close = flat.table.row({o, Condition::kClose});
    const auto far = flat.table.row({o, Condition::kFar});
    for (std::size_t k = 0; k < close.size(); ++k) CHECK(close[k] == far[k]);
  }

  spec.detail_bonus = 1.0;
  spec.noise = 0.1;
  const World w = gen_world(spec);
  for (int o = 0; o < 32; ++o) {
    CHECK(contrast(w, {o, Condition::kClose}) > contrast(w, {o, Condition::kFar}));
  }
}

TEST_CASE("spec validation and JSON") {
  SynthSpec bad;
  bad.n_categories = 0;
  bad.noise = -1.0;
  try {
    bad.validate();
    FAIL("expected SpecError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSpecError);
    const std::string msg = e.what();
    CHECK(msg.find("n_categories") != std::string::npos);
    CHECK(msg.find("noise") != std::string::npos);
  }
  SynthSpec small;
  small.n_objects_per_category = 3;
  CHECK_THROWS_KIND(gen_world(small), ErrorKind::kSpecError);

  SynthSpec spec;
  spec.cost_gap = 0.8;
  spec.seed = 99;
  const SynthSpec back = spec_from_json(spec_to_json(spec));
  CHECK(back.cost_gap == 0.8);
  CHECK(back.seed == 99);
  auto j = spec_to_json(spec);
  j["bogus"] = 1;
  CHECK_THROWS_KIND(spec_from_json(j), ErrorKind::kSpecError);
}

TEST_CASE("simulate_trials with zero weights is uniform") {
  World w = gen_world(SynthSpec{});
  w.contexts.resize(1);
  const int n = 10000;
  const auto trials = simulate_trials(w, {0, 0, 0.5, 5}, Variant::kPragmatic, n, 3);
  REQUIRE(trials.size() == static_cast<std::size_t>(n));
  const auto counts = counts_for_context(trials, 0);
  const double expected = n / 64.0;
  double chi2 = 0.0;
  for (int k = 0; k < 64; ++k) {
    const auto it = counts.find(k);
    const double obs = it == counts.end() ? 0.0 : it->second;
    chi2 += (obs - expected) * (obs - expected) / expected;
  }
  // 63 degrees of freedom; 110 is past the 0.9998 quantile.
  CHECK(chi2 < 110.0);

  const auto again = simulate_trials(w, {0, 0, 0.5, 5}, Variant::kPragmatic, 50, 3);
  const auto first = simulate_trials(w, {0, 0, 0.5, 5}, Variant::kPragmatic, 50, 3);
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].sketch == first[i].sketch);
    CHECK(again[i].draw_time_s == first[i].draw_time_s);
  }
}

TEST_CASE("simulate_trials saturates on one dominant utility") {
  World w = gen_world(SynthSpec{});
  std::vector<double> costs(64, 1.0);
  const Context ctx = w.contexts[5];
  costs[static_cast<std::size_t>(ctx.congruent().index())] = 0.0;
  w.costs = CostVector(costs);
  const auto trials = simulate_trials(w, {0, 1000, 0.5, 5}, Variant::kPragmatic, 200, 8);
  for (const auto& t : trials) {
    if (t.trial_index == 5) CHECK(t.sketch == ctx.congruent());
  }
}

TEST_CASE("simulated frequencies converge to the sketcher distribution") {
  World w = gen_world(SynthSpec{});
  w.contexts.resize(1);
  const ParamVector p{4, 2, 0.6, 8};
  const int n = 100000;
  const auto trials = simulate_trials(w, p, Variant::kPragmatic, n, 21);
  const auto counts = counts_for_context(trials, 0);
  const auto dist = rsa::sketcher_distribution(w.table, w.costs, w.contexts[0], p, Variant::kPragmatic);
  double tv = 0.0;
  for (std::size_t k = 0; k < 64; ++k) {
    const auto it = counts.find(static_cast<int>(k));
    const double freq = it == counts.end() ? 0.0 : it->second / static_cast<double>(n);
    tv += std::abs(freq - dist.probs[k]);
  }
  CHECK(0.5 * tv < 0.02);
}

TEST_CASE("simulated recognition follows correspondence rows") {
  const World w = gen_world(SynthSpec{});
  const auto rec = simulate_recognition(w, 20, 4);
  CHECK(rec.size() == 64 * 20);
  for (const auto& r : rec) {
    CHECK(r.rt_ms >= 1000.0);
    CHECK(r.rt_ms <= 30000.0);
  }
  const auto table = corpus::estimate_correspondence(w.inventory, rec);
  CHECK(table.max_row_sum_error() < 1e-9);
}

TEST_CASE("feature banks are complete and deterministic") {
  const World w = gen_world(SynthSpec{});
  FeatureSpec fs;
  fs.level = encoder::Level::kLow;
  fs.dims = {4, 3, 3};
  const auto a = gen_feature_bank(w, fs);
  const auto b = gen_feature_bank(w, fs);
  CHECK(a.complete());
  CHECK(a.sketch_ids() == b.sketch_ids());
  CHECK(a.sketch_ids().size() == 64 * 4);
  const auto id = a.sketch_ids()[17];
  const auto fa = a.feature(a.sketch(id));
  const auto fb = b.feature(b.sketch(id));
  CHECK(std::equal(fa.begin(), fa.end(), fb.begin()));
}

TEST_CASE("exhaustive oracle edge cases") {
  const World w = gen_world(SynthSpec{});
  inference::PriorSpec prior;
  prior.axes = {inference::Axis::uniform(0, 4, 3), inference::Axis::uniform(0, 2, 3),
                inference::Axis::uniform(0, 1, 3), inference::Axis::uniform(0, 10, 3)};
  const std::vector<TrialRecord> none;
  const auto empty = exhaustive_posterior(w.table, w.costs, none, prior, Variant::kPragmatic);
  for (double x : empty.weights()) CHECK(x == doctest::Approx(1.0 / 81));
  for (double x : empty.log_lik()) CHECK(x == 0.0);

  inference::PriorSpec zero = prior;
  zero.axes[0] = inference::Axis{0.0, 4.0, {0.0}};
  zero.axes[1] = inference::Axis{0.0, 2.0, {0.0}};
  const auto one = simulate_trials(w, {1, 1, 0.5, 5}, Variant::kPragmatic, 1, 2);
  const std::vector<TrialRecord> single(one.begin(), one.begin() + 1);
  const auto flat = exhaustive_posterior(w.table, w.costs, single, zero, Variant::kPragmatic);
  for (double x : flat.weights()) CHECK(x == doctest::Approx(1.0 / 9));
  for (double x : flat.log_lik()) CHECK(x == doctest::Approx(std::log(1.0 / 64)));

  CHECK_THROWS_KIND(exhaustive_posterior(w.table, w.costs, single, inference::PriorSpec::wide(11),
                                         Variant::kPragmatic),
                    ErrorKind::kOracleTooLarge);
}
