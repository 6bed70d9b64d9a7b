#include "sketchprag/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "sketchprag/error.hpp"

namespace sketchprag {

std::string_view condition_name(Condition c) {
  return c == Condition::kClose ? "close" : "far";
}

Condition parse_condition(std::string_view text) {
  if (text == "close" || text == "Close" || text == "closer") return Condition::kClose;
  if (text == "far" || text == "Far" || text == "further") return Condition::kFar;
  fail(ErrorKind::kParseError, "unknown condition '" + std::string(text) + "'");
}

std::string_view source_name(Source s) {
  switch (s) {
    case Source::kHumanRecog: return "humanrecog";
    case Source::kEncoderHigh: return "high";
    case Source::kEncoderMid: return "mid";
    case Source::kEncoderLow: return "low";
  }
  return "humanrecog";
}

Source parse_source(std::string_view text) {
  if (text == "humanrecog") return Source::kHumanRecog;
  if (text == "high") return Source::kEncoderHigh;
  if (text == "mid") return Source::kEncoderMid;
  if (text == "low") return Source::kEncoderLow;
  fail(ErrorKind::kParseError, "unknown correspondence source '" +
                                   std::string(text) + "'");
}

Inventory::Inventory(std::vector<std::string> category_names,
                     std::vector<ObjectInfo> objects)
    : category_names_(std::move(category_names)), objects_(std::move(objects)) {
  std::set<std::string> labels;
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    const ObjectInfo& o = objects_[i];
    if (o.id != static_cast<int>(i)) {
      fail(ErrorKind::kInvalidArgument, "object ids must be 0..N-1 in order");
    }
    if (o.category < 0 || o.category >= static_cast<int>(category_names_.size())) {
      fail(ErrorKind::kInvalidArgument, "object '" + o.label + "' has no category");
    }
    if (!labels.insert(o.label).second) {
      fail(ErrorKind::kInvalidArgument, "duplicate object label '" + o.label + "'");
    }
  }
}

Inventory Inventory::standard() {
  std::vector<std::string> names = {"bird", "car", "chair", "dog"};
  std::vector<ObjectInfo> objects;
  for (int c = 0; c < 4; ++c) {
    for (int k = 0; k < 8; ++k) {
      const int id = static_cast<int>(objects.size());
      objects.push_back({id, c, names[c] + "_" + std::to_string(k)});
    }
  }
  return Inventory(std::move(names), std::move(objects));
}

Inventory Inventory::uniform(int n_categories, int per_category) {
  if (n_categories <= 0 || per_category <= 0) {
    fail(ErrorKind::kInvalidArgument, "inventory sizes must be positive");
  }
  if (n_categories == 4 && per_category == 8) return standard();
  std::vector<std::string> names;
  std::vector<ObjectInfo> objects;
  for (int c = 0; c < n_categories; ++c) {
    names.push_back("cat" + std::to_string(c));
    for (int k = 0; k < per_category; ++k) {
      const int id = static_cast<int>(objects.size());
      objects.push_back({id, c, names.back() + "_" + std::to_string(k)});
    }
  }
  return Inventory(std::move(names), std::move(objects));
}

const ObjectInfo& Inventory::object(int id) const {
  if (id < 0 || id >= static_cast<int>(objects_.size())) {
    fail(ErrorKind::kInvalidArgument, "object id " + std::to_string(id) + " out of range");
  }
  return objects_[static_cast<std::size_t>(id)];
}

int Inventory::parse_object(std::string_view text) const {
  for (const ObjectInfo& o : objects_) {
    if (o.label == text) return o.id;
  }
  int id = -1;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
  if (ec == std::errc() && ptr == text.data() + text.size() && id >= 0 &&
      id < static_cast<int>(objects_.size())) {
    return id;
  }
  fail(ErrorKind::kParseError, "unknown object '" + std::string(text) + "'");
}

std::string Inventory::sketch_key(SketchCategory s) const {
  return object(s.object).label + "/" + std::string(condition_name(s.condition));
}

SketchCategory Inventory::parse_sketch_key(std::string_view key) const {
  const auto slash = key.rfind('/');
  if (slash == std::string_view::npos) {
    fail(ErrorKind::kParseError, "sketch key '" + std::string(key) +
                                     "' is not <object>/<condition>");
  }
  return {parse_object(key.substr(0, slash)), parse_condition(key.substr(slash + 1))};
}

std::vector<SketchCategory> Inventory::all_sketch_categories() const {
  std::vector<SketchCategory> out;
  out.reserve(num_sketch_categories());
  for (std::size_t i = 0; i < num_sketch_categories(); ++i) {
    out.push_back(SketchCategory::from_index(static_cast<int>(i)));
  }
  return out;
}

std::string Context::key() const {
  std::array<int, 3> d = distractors;
  std::sort(d.begin(), d.end());
  return std::to_string(target) + "|" + std::to_string(d[0]) + "," +
         std::to_string(d[1]) + "," + std::to_string(d[2]) + "|" +
         std::string(condition_name(condition));
}

void validate_context(const Inventory& inventory, const Context& ctx) {
  const auto objs = ctx.objects();
  std::set<int> distinct(objs.begin(), objs.end());
  if (distinct.size() != 4) {
    fail(ErrorKind::kInvalidArgument, "context " + ctx.key() + " repeats an object");
  }
  std::set<int> categories;
  for (int o : objs) categories.insert(inventory.category_of(o));
  if (ctx.condition == Condition::kClose && categories.size() != 1) {
    fail(ErrorKind::kInvalidArgument,
         "close context " + ctx.key() + " mixes categories");
  }
  if (ctx.condition == Condition::kFar && categories.size() != 4) {
    fail(ErrorKind::kInvalidArgument,
         "far context " + ctx.key() + " shares a category");
  }
}

CorrespondenceTable::CorrespondenceTable(Source source, std::size_t num_objects,
                                         std::vector<double> scores)
    : source_(source), num_objects_(num_objects), scores_(std::move(scores)) {
  if (scores_.size() != 2 * num_objects_ * num_objects_) {
    fail(ErrorKind::kShapeError, "correspondence table needs " +
                                     std::to_string(2 * num_objects_ * num_objects_) +
                                     " scores, got " + std::to_string(scores_.size()));
  }
  for (double v : scores_) {
    if (!std::isfinite(v) || v < -1e-12 || v > 1.0 + 1e-12) {
      fail(ErrorKind::kInvalidArgument, "correspondence score outside [0,1]");
    }
  }
}

double CorrespondenceTable::max_row_sum_error() const {
  double worst = 0.0;
  for (std::size_t r = 0; r < num_rows(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < num_objects_; ++c) sum += scores_[r * num_objects_ + c];
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

CostVector::CostVector(std::vector<double> costs) : costs_(std::move(costs)) {
  for (double v : costs_) {
    if (!std::isfinite(v)) fail(ErrorKind::kInvalidArgument, "non-finite cost");
  }
}

double CostVector::mean() const {
  if (costs_.empty()) return 0.0;
  return std::accumulate(costs_.begin(), costs_.end(), 0.0) /
         static_cast<double>(costs_.size());
}

const std::vector<std::string>& SplitSet::keys(Partition p) const {
  switch (p) {
    case Partition::kTrain: return train;
    case Partition::kVal: return val;
    case Partition::kTest: return test;
  }
  return test;
}

bool SplitSet::contains(Partition p, const std::string& context_key) const {
  const auto& k = keys(p);
  return std::binary_search(k.begin(), k.end(), context_key);
}

namespace corpus {

std::vector<TrialRecord> filter_trials(std::span<const TrialRecord> raw) {
  std::vector<TrialRecord> out;
  for (const TrialRecord& t : raw) {
    if (t.viewer_correct && !t.has_text_annotation) out.push_back(t);
  }
  if (out.empty()) fail(ErrorKind::kEmptyCorpus, "no trials survive filtering");
  return out;
}

std::vector<RecognitionTrial> filter_recognition(
    std::span<const RecognitionTrial> raw) {
  std::vector<RecognitionTrial> out;
  for (const RecognitionTrial& t : raw) {
    if (t.rt_ms < kMinRecognitionRtMs || t.rt_ms > kMaxRecognitionRtMs) continue;
    out.push_back(t);
  }
  return out;
}

CorrespondenceTable estimate_correspondence(
    const Inventory& inventory, std::span<const RecognitionTrial> trials) {
  const std::size_t n = inventory.num_objects();
  std::vector<double> counts(2 * n * n, 0.0);
  std::vector<double> totals(2 * n, 0.0);
  for (const RecognitionTrial& t : trials) {
    inventory.object(t.sketch.object);
    inventory.object(t.chosen);
    const auto row = static_cast<std::size_t>(t.sketch.index());
    counts[row * n + static_cast<std::size_t>(t.chosen)] += 1.0;
    totals[row] += 1.0;
  }
  for (std::size_t r = 0; r < 2 * n; ++r) {
    if (totals[r] == 0.0) {
      fail(ErrorKind::kMissingCategory,
           "no recognition trials for sketch category " +
               inventory.sketch_key(SketchCategory::from_index(static_cast<int>(r))));
    }
    for (std::size_t c = 0; c < n; ++c) counts[r * n + c] /= totals[r];
  }
  return CorrespondenceTable(Source::kHumanRecog, n, std::move(counts));
}

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

template <typename Range>
Moments population_moments(const Range& values) {
  Moments m;
  double n = 0.0;
  for (double v : values) {
    m.mean += v;
    n += 1.0;
  }
  if (n == 0.0) return m;
  m.mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.sd = std::sqrt(ss / n);
  return m;
}

}  // namespace

std::vector<std::optional<double>> normalized_draw_times(
    std::span<const TrialRecord> trials, const CostOptions& options) {
  std::vector<double> times;
  times.reserve(trials.size());
  for (const TrialRecord& t : trials) times.push_back(t.draw_time_s);
  const Moments global = population_moments(times);

  std::vector<bool> kept(trials.size(), true);
  if (global.sd > 0.0) {
    for (std::size_t i = 0; i < trials.size(); ++i) {
      kept[i] = std::abs(times[i] - global.mean) <= options.outlier_sd * global.sd;
    }
  }

  std::map<std::string, std::vector<std::size_t>> by_participant;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (kept[i]) by_participant[trials[i].pair_id].push_back(i);
  }

  std::vector<std::optional<double>> z(trials.size());
  for (const auto& [pair, idx] : by_participant) {
    std::vector<double> own;
    own.reserve(idx.size());
    for (std::size_t i : idx) own.push_back(times[i]);
    const Moments m = population_moments(own);
    for (std::size_t i : idx) {
      z[i] = m.sd > 0.0 ? (times[i] - m.mean) / m.sd : 0.0;
    }
  }
  return z;
}

CostVector estimate_costs(const Inventory& inventory,
                          std::span<const TrialRecord> trials,
                          const CostOptions& options) {
  if (trials.empty()) fail(ErrorKind::kEmptyCorpus, "no trials for cost estimation");
  const auto z = normalized_draw_times(trials, options);
  const std::size_t n_cat = inventory.num_sketch_categories();
  std::vector<double> sum(n_cat, 0.0);
  std::vector<double> count(n_cat, 0.0);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (!z[i]) continue;
    const auto k = static_cast<std::size_t>(trials[i].sketch.index());
    if (k >= n_cat) fail(ErrorKind::kInvalidArgument, "sketch category out of range");
    sum[k] += *z[i];
    count[k] += 1.0;
  }
  std::vector<double> means(n_cat);
  for (std::size_t k = 0; k < n_cat; ++k) {
    if (count[k] == 0.0) {
      fail(ErrorKind::kMissingCategory,
           "no retained trials for sketch category " +
               inventory.sketch_key(SketchCategory::from_index(static_cast<int>(k))));
    }
    means[k] = sum[k] / count[k];
  }
  const auto [lo_it, hi_it] = std::minmax_element(means.begin(), means.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  if (!(span > 1e-12)) {
    fail(ErrorKind::kDegenerateCosts, "all sketch-category mean costs are equal");
  }
  for (double& m : means) m = (m - lo) / span;
  return CostVector(std::move(means));
}

namespace {

struct ContextInfo {
  std::string key;
  int category = 0;
  Condition condition = Condition::kClose;
};

std::vector<ContextInfo> unique_contexts(const Inventory& inventory,
                                         std::span<const TrialRecord> trials) {
  std::map<std::string, ContextInfo> seen;
  for (const TrialRecord& t : trials) {
    const std::string key = t.context.key();
    if (!seen.contains(key)) {
      seen.emplace(key, ContextInfo{key, inventory.category_of(t.context.target),
                                    t.context.condition});
    }
  }
  std::vector<ContextInfo> out;
  out.reserve(seen.size());
  for (auto& [k, v] : seen) out.push_back(std::move(v));
  return out;
}

void sort_split(SplitSet& s) {
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
}

}  // namespace

std::vector<SplitSet> make_splits(const Inventory& inventory,
                                  std::span<const TrialRecord> trials,
                                  int n_folds, std::uint64_t seed) {
  if (n_folds < 1) fail(ErrorKind::kInvalidArgument, "n_folds must be positive");
  const std::vector<ContextInfo> contexts = unique_contexts(inventory, trials);
  const std::size_t n_chunks = 2 * static_cast<std::size_t>(n_folds);
  if (contexts.size() < n_chunks) {
    fail(ErrorKind::kSplitInfeasible,
         std::to_string(contexts.size()) + " contexts cannot fill " +
             std::to_string(n_chunks) + " validation/test partitions");
  }

  const int n_categories = static_cast<int>(inventory.num_categories());
  // strata[category][condition] holds indices into `contexts`.
  std::vector<std::array<std::vector<std::size_t>, 2>> strata(
      static_cast<std::size_t>(n_categories));
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    strata[static_cast<std::size_t>(contexts[i].category)]
          [static_cast<std::size_t>(contexts[i].condition)]
              .push_back(i);
  }

  std::mt19937_64 rng(seed);
  constexpr int kMaxAttempts = 256;
  std::vector<std::string> last_violations;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<int> order(static_cast<std::size_t>(n_categories));
    std::iota(order.begin(), order.end(), 0);
    std::size_t offset = 0;
    if (attempt > 0) {
      std::shuffle(order.begin(), order.end(), rng);
      offset = static_cast<std::size_t>(rng() % n_chunks);
    }
    auto shuffled = strata;
    for (auto& per_cat : shuffled) {
      for (auto& s : per_cat) std::shuffle(s.begin(), s.end(), rng);
    }

    // Deal contexts round-robin into chunks, alternating which condition of a
    // category goes first so each category's two strata land in complementary
    // chunks.
    std::vector<std::vector<std::size_t>> chunks(n_chunks);
    std::size_t cursor = offset;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const auto cat = static_cast<std::size_t>(order[pos]);
      const std::size_t first = pos % 2;
      for (std::size_t c : {first, 1 - first}) {
        for (std::size_t idx : shuffled[cat][c]) {
          chunks[cursor % n_chunks].push_back(idx);
          ++cursor;
        }
      }
    }

    std::vector<SplitSet> splits;
    for (int k = 0; k < n_folds; ++k) {
      SplitSet s;
      s.fold_id = k;
      for (std::size_t j = 0; j < n_chunks; ++j) {
        auto& dest = j == 2 * static_cast<std::size_t>(k)       ? s.test
                     : j == 2 * static_cast<std::size_t>(k) + 1 ? s.val
                                                                : s.train;
        for (std::size_t idx : chunks[j]) dest.push_back(contexts[idx].key);
      }
      sort_split(s);
      splits.push_back(std::move(s));
    }
    last_violations = check_splits(inventory, trials, splits);
    if (last_violations.empty()) return splits;
  }
  fail(ErrorKind::kSplitInfeasible,
       "could not balance splits: " + last_violations.front());
}

std::vector<std::string> check_splits(const Inventory& inventory,
                                      std::span<const TrialRecord> trials,
                                      std::span<const SplitSet> splits) {
  std::vector<std::string> violations;
  const std::vector<ContextInfo> contexts = unique_contexts(inventory, trials);
  std::unordered_map<std::string, const ContextInfo*> by_key;
  for (const ContextInfo& c : contexts) by_key.emplace(c.key, &c);
  const auto n_total = static_cast<double>(contexts.size());
  std::vector<double> cat_total(inventory.num_categories(), 0.0);
  double close_total = 0.0;
  for (const ContextInfo& c : contexts) {
    cat_total[static_cast<std::size_t>(c.category)] += 1.0;
    if (c.condition == Condition::kClose) close_total += 1.0;
  }
  const double close_frac = n_total > 0.0 ? close_total / n_total : 0.0;

  for (const SplitSet& s : splits) {
    const std::string fold = "fold " + std::to_string(s.fold_id);
    std::unordered_set<std::string> seen;
    for (Partition p : {Partition::kTrain, Partition::kVal, Partition::kTest}) {
      for (const std::string& k : s.keys(p)) {
        if (!by_key.contains(k)) violations.push_back(fold + ": unknown context " + k);
        if (!seen.insert(k).second) {
          violations.push_back(fold + ": context " + k + " in two partitions");
        }
      }
    }
    if (seen.size() != contexts.size()) {
      violations.push_back(fold + ": partitions do not cover every context");
    }

    for (Partition p : {Partition::kTrain, Partition::kVal, Partition::kTest}) {
      const auto& keys = s.keys(p);
      const char* pname = p == Partition::kTrain ? "train"
                          : p == Partition::kVal ? "val"
                                                 : "test";
      if (keys.empty()) {
        violations.push_back(fold + ": empty " + pname + " partition");
        continue;
      }
      const auto size = static_cast<double>(keys.size());
      // Train is the complement of two balanced partitions, so its rounding
      // slack is twice theirs.
      const double cat_tol = (p == Partition::kTrain ? 2.0 : 1.0) + 1e-9;
      std::vector<double> cat_count(inventory.num_categories(), 0.0);
      double close = 0.0;
      for (const std::string& k : keys) {
        auto it = by_key.find(k);
        if (it == by_key.end()) continue;
        cat_count[static_cast<std::size_t>(it->second->category)] += 1.0;
        if (it->second->condition == Condition::kClose) close += 1.0;
      }
      for (std::size_t c = 0; c < cat_count.size(); ++c) {
        const double expected = size * cat_total[c] / n_total;
        if (std::abs(cat_count[c] - expected) > cat_tol) {
          violations.push_back(fold + ": " + pname + " category " +
                               inventory.category_names()[c] + " has " +
                               std::to_string(static_cast<int>(cat_count[c])) +
                               " contexts, expected about " + std::to_string(expected));
        }
      }
      const double close_tol = std::max(0.05 * size, 1.0) + 1e-9;
      if (std::abs(close - close_frac * size) > close_tol) {
        violations.push_back(fold + ": " + pname + " close/far proportion off balance");
      }
    }
  }
  return violations;
}

std::vector<TrialRecord> select(std::span<const TrialRecord> trials,
                                const SplitSet& split, Partition partition) {
  std::vector<TrialRecord> out;
  for (const TrialRecord& t : trials) {
    if (split.contains(partition, t.context.key())) out.push_back(t);
  }
  return out;
}

}  // namespace corpus
}  // namespace sketchprag
