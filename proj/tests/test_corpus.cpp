#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "sketchprag/corpus.hpp"
#include "sketchprag/corpus_io.hpp"
#include "support.hpp"

using namespace sketchprag;
using sketchprag::testing::TempDir;

namespace {

TrialRecord trial(const std::string& pair, int target, std::array<int, 3> d, Condition cond,
                  double time = 10.0) {
  TrialRecord t;
  t.pair_id = pair;
  t.context = Context{target, d, cond};
  t.sketch = {target, cond};
  t.draw_time_s = time;
  return t;
}

// 40 contexts over the standard inventory: per category 5 close and 5 far.
std::vector<TrialRecord> forty_contexts() {
  std::vector<TrialRecord> out;
  for (int c = 0; c < 4; ++c) {
    const int base = 8 * c;
    for (int k = 0; k < 5; ++k) {
      const int t = base + k;
      std::array<int, 3> d{};
      int j = 0;
      for (int o = base; o < base + 8 && j < 3; ++o) {
        if (o != t) d[static_cast<std::size_t>(j++)] = o;
      }
      out.push_back(trial("p" + std::to_string(k), t, d, Condition::kClose));
    }
    for (int k = 0; k < 5; ++k) {
      const int t = base + k;
      std::array<int, 3> d{};
      int j = 0;
      for (int oc = 0; oc < 4; ++oc) {
        if (oc != c) d[static_cast<std::size_t>(j++)] = 8 * oc + k;
      }
      out.push_back(trial("p" + std::to_string(k), t, d, Condition::kFar));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("standard inventory has 4 categories of 8 objects") {
  const Inventory inv = Inventory::standard();
  CHECK(inv.num_objects() == 32);
  CHECK(inv.num_categories() == 4);
  CHECK(inv.num_sketch_categories() == 64);
  CHECK(inv.category_of(9) == 1);
  CHECK(inv.parse_object("dog_7") == 31);
  CHECK(inv.parse_object("5") == 5);
  const SketchCategory s{12, Condition::kFar};
  CHECK(inv.parse_sketch_key(inv.sketch_key(s)) == s);
  CHECK(SketchCategory::from_index(s.index()) == s);
}

TEST_CASE("context validation enforces the condition's category structure") {
  const Inventory inv = Inventory::standard();
  CHECK_NOTHROW(validate_context(inv, Context{0, {1, 2, 3}, Condition::kClose}));
  CHECK_NOTHROW(validate_context(inv, Context{0, {8, 16, 24}, Condition::kFar}));
  CHECK_THROWS_KIND(validate_context(inv, Context{0, {1, 2, 8}, Condition::kClose}),
                    ErrorKind::kInvalidArgument);
  CHECK_THROWS_KIND(validate_context(inv, Context{0, {1, 16, 24}, Condition::kFar}),
                    ErrorKind::kInvalidArgument);
  CHECK_THROWS_KIND(validate_context(inv, Context{0, {0, 2, 3}, Condition::kClose}),
                    ErrorKind::kInvalidArgument);
  CHECK(Context{0, {3, 1, 2}, Condition::kClose}.key() ==
        Context{0, {1, 2, 3}, Condition::kClose}.key());
}

TEST_CASE("filter_trials keeps correct, unannotated trials in order") {
  std::vector<TrialRecord> raw;
  for (int i = 0; i < 100; ++i) {
    TrialRecord t = trial("p", 0, {1, 2, 3}, Condition::kClose);
    t.trial_index = i;
    if (i < 6) t.viewer_correct = false;
    if (i >= 6 && i < 10) t.has_text_annotation = true;
    raw.push_back(t);
  }
  const auto kept = corpus::filter_trials(raw);
  REQUIRE(kept.size() == 90);
  for (std::size_t i = 0; i < kept.size(); ++i) CHECK(kept[i].trial_index == static_cast<int>(i) + 10);

  std::vector<TrialRecord> clean(raw.begin() + 10, raw.end());
  CHECK(corpus::filter_trials(clean).size() == clean.size());

  std::vector<TrialRecord> bad(raw.begin(), raw.begin() + 10);
  CHECK_THROWS_KIND(corpus::filter_trials(bad), ErrorKind::kEmptyCorpus);
}

TEST_CASE("filter_recognition keeps both threshold values") {
  std::vector<RecognitionTrial> raw;
  for (double rt : {999.0, 1000.0, 15000.0, 30000.0, 30001.0}) raw.push_back({{0, Condition::kClose}, 0, rt});
  const auto kept = corpus::filter_recognition(raw);
  REQUIRE(kept.size() == 3);
  CHECK(kept[0].rt_ms == 1000.0);
  CHECK(kept[2].rt_ms == 30000.0);
}

TEST_CASE("estimate_correspondence computes match proportions") {
  const Inventory inv = Inventory::uniform(2, 2);
  std::vector<RecognitionTrial> trials;
  for (int i = 0; i < 7; ++i) trials.push_back({{0, Condition::kClose}, 0, 2000});
  for (int i = 0; i < 3; ++i) trials.push_back({{0, Condition::kClose}, 1, 2000});
  for (const auto& s : inv.all_sketch_categories()) {
    if (s.index() != 0) trials.push_back({s, s.object, 2000});
  }
  const CorrespondenceTable table = corpus::estimate_correspondence(inv, trials);
  CHECK(table.sim({0, Condition::kClose}, 0) == doctest::Approx(0.7));
  CHECK(table.sim({0, Condition::kClose}, 1) == doctest::Approx(0.3));
  CHECK(table.sim({0, Condition::kClose}, 2) == 0.0);
  CHECK(table.sim({2, Condition::kFar}, 2) == 1.0);
  CHECK(table.max_row_sum_error() < 1e-12);

  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    auto shuffled = trials;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(corpus::estimate_correspondence(inv, shuffled).scores() == table.scores());
  }

  trials.pop_back();
  CHECK_THROWS_KIND(corpus::estimate_correspondence(inv, trials), ErrorKind::kMissingCategory);
}

TEST_CASE("draw times are z-scored within participant with population sd") {
  std::vector<TrialRecord> trials = {trial("a", 0, {1, 2, 3}, Condition::kClose, 10.0),
                                     trial("a", 1, {0, 2, 3}, Condition::kClose, 20.0),
                                     trial("a", 2, {0, 1, 3}, Condition::kClose, 30.0)};
  const auto z = corpus::normalized_draw_times(trials);
  REQUIRE(z[0].has_value());
  CHECK(*z[0] == doctest::Approx(-1.2247449).epsilon(1e-7));
  CHECK(*z[1] == doctest::Approx(0.0));
  CHECK(*z[2] == doctest::Approx(1.2247449).epsilon(1e-7));

  // A participant with constant times contributes zeros.
  std::vector<TrialRecord> flat = {trial("b", 0, {1, 2, 3}, Condition::kClose, 5.0),
                                   trial("b", 1, {0, 2, 3}, Condition::kClose, 5.0)};
  for (const auto& v : corpus::normalized_draw_times(flat)) CHECK(*v == 0.0);
}

TEST_CASE("global draw-time outliers are removed before z-scoring") {
  std::vector<TrialRecord> trials;
  for (int i = 0; i < 60; ++i) {
    trials.push_back(trial("p", 0, {1, 2, 3}, Condition::kClose, 10.0 + (i % 5)));
  }
  trials.push_back(trial("p", 0, {1, 2, 3}, Condition::kClose, 1000.0));
  const auto z = corpus::normalized_draw_times(trials);
  CHECK_FALSE(z.back().has_value());
  CHECK(z.front().has_value());
}

TEST_CASE("estimate_costs maps category means onto [0,1]") {
  const Inventory inv = Inventory::uniform(1, 4);
  std::vector<TrialRecord> trials;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(5.0, 40.0);
  for (int p = 0; p < 6; ++p) {
    for (const auto& s : inv.all_sketch_categories()) {
      std::array<int, 3> d{};
      int j = 0;
      for (int o = 0; o < 4; ++o) {
        if (o != s.object) d[static_cast<std::size_t>(j++)] = o;
      }
      TrialRecord t = trial("p" + std::to_string(p), s.object, d, Condition::kClose, u(rng));
      t.sketch = s;
      trials.push_back(t);
    }
  }
  const CostVector costs = corpus::estimate_costs(inv, trials);
  REQUIRE(costs.size() == 8);
  CHECK(*std::min_element(costs.values().begin(), costs.values().end()) == 0.0);
  CHECK(*std::max_element(costs.values().begin(), costs.values().end()) == 1.0);

  // Rescaling each participant's times by its own positive factor changes nothing.
  auto scaled = trials;
  for (auto& t : scaled) t.draw_time_s *= 1.0 + 0.5 * (t.pair_id.back() - '0');
  const CostVector again = corpus::estimate_costs(inv, scaled);
  for (std::size_t k = 0; k < 8; ++k) CHECK(again.values()[k] == doctest::Approx(costs.values()[k]).epsilon(1e-12));

  for (auto& t : trials) t.draw_time_s = 12.0;
  CHECK_THROWS_KIND(corpus::estimate_costs(inv, trials), ErrorKind::kDegenerateCosts);
}

TEST_CASE("make_splits on 40 balanced contexts puts 2 close and 2 far in each test set") {
  const Inventory inv = Inventory::standard();
  const auto trials = forty_contexts();
  const auto splits = corpus::make_splits(inv, trials, 5, 17);
  REQUIRE(splits.size() == 5);
  CHECK(corpus::check_splits(inv, trials, splits).empty());

  std::set<std::string> all_test;
  for (const SplitSet& s : splits) {
    CHECK(s.test.size() == 4);
    CHECK(s.val.size() == 4);
    CHECK(s.train.size() == 32);
    int close = 0;
    for (const auto& k : s.test) {
      for (const auto& t : trials) {
        if (t.context.key() == k && t.context.condition == Condition::kClose) ++close;
      }
      all_test.insert(k);
    }
    CHECK(close == 2);
    for (const auto& k : s.test) {
      CHECK_FALSE(std::count(s.train.begin(), s.train.end(), k));
      CHECK_FALSE(std::count(s.val.begin(), s.val.end(), k));
    }
  }
  CHECK(all_test.size() == 20);

  const auto again = corpus::make_splits(inv, trials, 5, 17);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(again[k].train == splits[k].train);
    CHECK(again[k].test == splits[k].test);
  }
  const auto test0 = corpus::select(trials, splits[0], Partition::kTest);
  CHECK(test0.size() == 4);
}

TEST_CASE("make_splits rejects too few contexts") {
  const Inventory inv = Inventory::standard();
  auto trials = forty_contexts();
  trials.resize(6);
  CHECK_THROWS_KIND(corpus::make_splits(inv, trials, 5, 1), ErrorKind::kSplitInfeasible);
}

TEST_CASE("corpus files round-trip") {
  TempDir dir("corpus_io");
  const Inventory inv = Inventory::standard();
  auto trials = forty_contexts();
  trials[3].viewer_correct = false;
  trials[4].num_strokes = 7;
  trials[4].ink = 0.125;
  corpus::write_trials_csv(dir.path() / "trials.csv", trials, inv);
  const auto back = corpus::read_trials_csv(dir.path() / "trials.csv", inv);
  REQUIRE(back.size() == trials.size());
  CHECK_FALSE(back[3].viewer_correct);
  CHECK(back[4].num_strokes == 7);
  CHECK(back[4].ink == 0.125);
  CHECK(back[10].context.key() == trials[10].context.key());

  std::mt19937_64 rng(5);
  const CorrespondenceTable table = sketchprag::testing::random_table(32, rng);
  const auto t2 = corpus::correspondence_from_json(corpus::correspondence_to_json(table, inv), inv);
  CHECK(t2.scores() == table.scores());

  const CostVector costs = sketchprag::testing::random_costs(32, rng);
  CHECK(corpus::costs_from_json(corpus::costs_to_json(costs, inv), inv).values() == costs.values());
  CHECK(corpus::inventory_from_json(corpus::inventory_to_json(inv)) == inv);

  const auto splits = corpus::make_splits(inv, forty_contexts(), 5, 2);
  const auto s2 = corpus::splits_from_json(corpus::splits_to_json(splits));
  REQUIRE(s2.size() == splits.size());
  CHECK(s2[1].val == splits[1].val);
}
