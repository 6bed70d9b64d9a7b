#pragma once

// Domain types shared by every module, and the preprocessing that turns raw
// communication/recognition trials into a correspondence table, a cost
// vector, and context-disjoint crossvalidation splits.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sketchprag {

enum class Condition : std::uint8_t { kClose = 0, kFar = 1 };

std::string_view condition_name(Condition c);
Condition parse_condition(std::string_view text);
inline Condition other(Condition c) {
  return c == Condition::kClose ? Condition::kFar : Condition::kClose;
}

struct ObjectInfo {
  int id = 0;
  int category = 0;
  std::string label;

  bool operator==(const ObjectInfo&) const = default;
};

// An object's sketches, aggregated over every trial with the same object and
// context condition. Index layout is 2 * object + condition.
struct SketchCategory {
  int object = 0;
  Condition condition = Condition::kClose;

  int index() const { return 2 * object + static_cast<int>(condition); }
  static SketchCategory from_index(int index) {
    return {index / 2, static_cast<Condition>(index % 2)};
  }
  auto operator<=>(const SketchCategory&) const = default;
};

// The object set of an experiment: categories and the objects in each.
class Inventory {
 public:
  Inventory(std::vector<std::string> category_names,
            std::vector<ObjectInfo> objects);

  // 4 basic-level categories x 8 objects.
  static Inventory standard();
  static Inventory uniform(int n_categories, int per_category);

  std::size_t num_objects() const { return objects_.size(); }
  std::size_t num_categories() const { return category_names_.size(); }
  std::size_t num_sketch_categories() const { return 2 * objects_.size(); }

  const ObjectInfo& object(int id) const;
  const std::vector<ObjectInfo>& objects() const { return objects_; }
  const std::vector<std::string>& category_names() const {
    return category_names_;
  }
  int category_of(int object_id) const { return object(object_id).category; }

  // Accepts a label or a decimal index.
  int parse_object(std::string_view text) const;
  std::string sketch_key(SketchCategory s) const;
  SketchCategory parse_sketch_key(std::string_view key) const;
  std::vector<SketchCategory> all_sketch_categories() const;

  bool operator==(const Inventory&) const = default;

 private:
  std::vector<std::string> category_names_;
  std::vector<ObjectInfo> objects_;
};

// O = {t, D}: a target and three distractors.
struct Context {
  int target = 0;
  std::array<int, 3> distractors{};
  Condition condition = Condition::kClose;

  std::array<int, 4> objects() const {
    return {target, distractors[0], distractors[1], distractors[2]};
  }
  // Target, then the distractor set in ascending order, then the condition.
  std::string key() const;
  SketchCategory congruent() const { return {target, condition}; }
  SketchCategory incongruent() const { return {target, other(condition)}; }
};

// Throws kInvalidArgument unless the four objects are distinct and the
// condition matches the category structure.
void validate_context(const Inventory& inventory, const Context& ctx);

struct TrialRecord {
  std::string pair_id;
  int trial_index = 0;
  Context context;
  SketchCategory sketch;
  double draw_time_s = 0.0;
  int num_strokes = 0;
  double ink = 0.0;
  bool viewer_correct = true;
  bool has_text_annotation = false;
};

struct RecognitionTrial {
  SketchCategory sketch;
  int chosen = 0;
  double rt_ms = 0.0;
};

enum class Source { kHumanRecog, kEncoderHigh, kEncoderMid, kEncoderLow };

std::string_view source_name(Source s);
Source parse_source(std::string_view text);

// sim(s, o) for every sketch category and object.
class CorrespondenceTable {
 public:
  CorrespondenceTable() = default;
  // scores is row-major, 2N rows (sketch categories) by N columns (objects).
  CorrespondenceTable(Source source, std::size_t num_objects,
                      std::vector<double> scores);

  Source source() const { return source_; }
  std::size_t num_objects() const { return num_objects_; }
  std::size_t num_rows() const { return 2 * num_objects_; }

  double sim(SketchCategory s, int object) const {
    return scores_[static_cast<std::size_t>(s.index()) * num_objects_ +
                   static_cast<std::size_t>(object)];
  }
  std::span<const double> row(SketchCategory s) const {
    return {scores_.data() + static_cast<std::size_t>(s.index()) * num_objects_,
            num_objects_};
  }
  const std::vector<double>& scores() const { return scores_; }

  // Largest |row sum - 1| over all rows.
  double max_row_sum_error() const;

 private:
  Source source_ = Source::kHumanRecog;
  std::size_t num_objects_ = 0;
  std::vector<double> scores_;
};

// Normalized production cost per sketch category, indexed like SketchCategory.
class CostVector {
 public:
  CostVector() = default;
  explicit CostVector(std::vector<double> costs);

  double operator[](SketchCategory s) const {
    return costs_[static_cast<std::size_t>(s.index())];
  }
  std::size_t size() const { return costs_.size(); }
  const std::vector<double>& values() const { return costs_; }
  double mean() const;

 private:
  std::vector<double> costs_;
};

enum class Partition { kTrain, kVal, kTest };

struct SplitSet {
  int fold_id = 0;
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;

  const std::vector<std::string>& keys(Partition p) const;
  bool contains(Partition p, const std::string& context_key) const;
};

namespace corpus {

// Keeps trials the viewer identified correctly and that carry no drawn text.
std::vector<TrialRecord> filter_trials(std::span<const TrialRecord> raw);

inline constexpr double kMinRecognitionRtMs = 1000.0;
inline constexpr double kMaxRecognitionRtMs = 30000.0;

// Drops trials with rt < 1000 ms or rt > 30 s; both thresholds are kept.
std::vector<RecognitionTrial> filter_recognition(
    std::span<const RecognitionTrial> raw);

// Proportion of recognition trials on which a sketch category was matched to
// each object.
CorrespondenceTable estimate_correspondence(
    const Inventory& inventory, std::span<const RecognitionTrial> trials);

struct CostOptions {
  double outlier_sd = 5.0;
};

// Per-trial normalized draw time: nullopt for global outliers, otherwise the
// within-participant z-score (population s.d.; 0 for zero-variance
// participants).
std::vector<std::optional<double>> normalized_draw_times(
    std::span<const TrialRecord> trials, const CostOptions& options = {});

CostVector estimate_costs(const Inventory& inventory,
                          std::span<const TrialRecord> trials,
                          const CostOptions& options = {});

std::vector<SplitSet> make_splits(const Inventory& inventory,
                                  std::span<const TrialRecord> trials,
                                  int n_folds, std::uint64_t seed);

// Empty when the splits satisfy the balance and disjointness rules; otherwise
// one message per violation.
std::vector<std::string> check_splits(const Inventory& inventory,
                                      std::span<const TrialRecord> trials,
                                      std::span<const SplitSet> splits);

std::vector<TrialRecord> select(std::span<const TrialRecord> trials,
                                const SplitSet& split, Partition partition);

}  // namespace corpus
}  // namespace sketchprag
