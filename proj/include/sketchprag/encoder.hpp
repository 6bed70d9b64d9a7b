#pragma once

// Adaptor networks that map a frozen (sketch, object) feature pair to a
// correspondence score, their soft-target training loop, and the conversion
// of raw scores into a CorrespondenceTable.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sketchprag/corpus.hpp"

namespace sketchprag::encoder {

enum class Level { kHigh, kMid, kLow };

std::string_view level_name(Level l);
Level parse_level(std::string_view text);
Source source_for(Level l);

// High-level features are vectors: height = width = 1.
struct Dims {
  std::size_t channels = 0;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t spatial() const { return height * width; }
  std::size_t size() const { return channels * height * width; }
  bool operator==(const Dims&) const = default;
};

Dims default_dims(Level l);

enum class ImageKind { kSketch, kObject };

struct ImageEntry {
  std::string id;
  ImageKind kind = ImageKind::kSketch;
  SketchCategory sketch;  // sketches only
  int object = -1;        // objects only
  std::size_t offset = 0;
};

class FeatureBank {
 public:
  FeatureBank() = default;
  FeatureBank(Level level, Dims dims, std::size_t num_objects);

  Level level() const { return level_; }
  const Dims& dims() const { return dims_; }
  std::size_t num_objects() const { return num_objects_; }

  void add_sketch(std::string id, SketchCategory category, std::span<const double> feat);
  void add_object(std::string id, int object, std::span<const double> feat);

  const std::vector<ImageEntry>& entries() const { return entries_; }
  std::vector<std::string> sketch_ids() const;
  const ImageEntry& sketch(std::string_view id) const;
  // Feature of object o; MissingFeature if absent.
  std::span<const double> object_feature(int o) const;
  std::span<const double> feature(const ImageEntry& e) const;
  bool complete() const;

 private:
  Level level_ = Level::kHigh;
  Dims dims_;
  std::size_t num_objects_ = 0;
  std::vector<ImageEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<std::ptrdiff_t> object_entry_;
  std::vector<double> data_;
};

double swish(double x);

// out[c] = sum_ij w_ij feat[c, i, j]
std::vector<double> attention_pool(std::span<const double> feat, std::span<const double> weights,
                                   const Dims& dims);

struct Layout {
  std::size_t w1_sketch = 0;  // hidden x C, row-major
  std::size_t w1_object = 0;  // hidden x C
  std::size_t b1 = 0;
  std::size_t w2 = 0;
  std::size_t b2 = 0;
  std::size_t att_sketch = 0;  // mid/low only
  std::size_t att_object = 0;
  std::size_t total = 0;
};

class AdaptorParams {
 public:
  AdaptorParams() = default;
  AdaptorParams(Level level, Dims dims, std::size_t hidden, double dropout = 0.5);

  // Fan-in scaled uniform weights, zero output bias, mean-pooling attention.
  static AdaptorParams initialized(Level level, Dims dims, std::size_t hidden,
                                   double dropout, std::uint64_t seed);

  Level level() const { return level_; }
  const Dims& dims() const { return dims_; }
  std::size_t hidden() const { return hidden_; }
  double dropout() const { return dropout_; }
  const Layout& layout() const { return layout_; }
  bool has_attention() const { return level_ != Level::kHigh; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  std::span<const double> w1_sketch() const {
    return view(layout_.w1_sketch, hidden_ * dims_.channels);
  }
  std::span<const double> w1_object() const {
    return view(layout_.w1_object, hidden_ * dims_.channels);
  }
  std::span<const double> b1() const { return view(layout_.b1, hidden_); }
  std::span<const double> w2() const { return view(layout_.w2, hidden_); }
  double b2() const { return values_[layout_.b2]; }
  std::span<const double> att_sketch() const { return view(layout_.att_sketch, dims_.spatial()); }
  std::span<const double> att_object() const { return view(layout_.att_object, dims_.spatial()); }

 private:
  std::span<const double> view(std::size_t off, std::size_t n) const {
    return {values_.data() + off, n};
  }

  Level level_ = Level::kHigh;
  Dims dims_;
  std::size_t hidden_ = 0;
  double dropout_ = 0.5;
  Layout layout_;
  std::vector<double> values_;
};

std::size_t param_count(Level level, const Dims& dims, std::size_t hidden);
// Penultimate width giving the parameter count closest to `target`.
std::size_t solve_hidden(Level level, const Dims& dims, std::size_t target);
// 128 / 1021 / 7875.
std::size_t default_hidden(Level level);

// Dropout mask for one forward pass: 0 or 1/(1 - rate) per hidden unit.
std::vector<double> dropout_mask(std::size_t hidden, double rate, std::uint64_t& state);

// With mask empty the network runs in evaluation mode.
double forward(const AdaptorParams& params, std::span<const double> sketch_feat,
               std::span<const double> object_feat, std::span<const double> mask = {});
// Draws a fresh mask when train_mode is set.
double forward(const AdaptorParams& params, std::span<const double> sketch_feat,
               std::span<const double> object_feat, bool train_mode, std::uint64_t& rng_state);

std::vector<double> softmax(std::span<const double> scores);

// Evaluation-mode scores of one sketch against objects 0..N-1.
std::vector<double> score_objects(const AdaptorParams& params, const FeatureBank& bank,
                                  std::string_view sketch_id);
std::vector<double> predict_distribution(const AdaptorParams& params, const FeatureBank& bank,
                                         std::string_view sketch_id);

inline constexpr double kLogFloor = 1e-12;

double xent_loss(std::span<const double> p, std::span<const double> q);

// Mean cross-entropy over `sketch_ids` times `scale`, and its gradient with
// respect to every parameter. Masks hold one hidden-length vector per
// (sketch, object) pair in sketch-major order; empty means evaluation mode.
struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};
LossGrad loss_and_gradient(const AdaptorParams& params, const FeatureBank& bank,
                           const CorrespondenceTable& targets,
                           std::span<const std::string> sketch_ids, double scale,
                           std::span<const std::vector<double>> masks = {});

double mean_loss(const AdaptorParams& params, const FeatureBank& bank,
                 const CorrespondenceTable& targets, std::span<const std::string> sketch_ids);

// Fraction of sketches whose highest-probability object is their own object.
double top1_accuracy(const AdaptorParams& params, const FeatureBank& bank,
                     std::span<const std::string> sketch_ids);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 10;
  int epochs = 100;
  double loss_scale = 1e4;
  double dropout = 0.5;
  std::size_t hidden = 0;  // 0 picks the level default
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

struct TrainResult {
  AdaptorParams params;  // lowest validation loss
  int best_epoch = 0;    // 0 is the initialization
  std::vector<double> val_loss;    // index 0 before training
  std::vector<double> train_loss;  // unscaled, per epoch, index 0 before training
};

TrainResult train_adaptor(const FeatureBank& bank, const CorrespondenceTable& targets,
                          std::span<const std::string> train_ids,
                          std::span<const std::string> val_ids, const TrainConfig& cfg);

// Raw evaluation-mode scores, one row of N per sketch.
std::vector<std::vector<double>> raw_scores(const AdaptorParams& params, const FeatureBank& bank,
                                            std::span<const std::string> sketch_ids);

// z-score across every entry, then logistic. Zero variance maps to 0.5.
std::vector<std::vector<double>> logistic_normalize(const std::vector<std::vector<double>>& raw);

// Averages normalized rows within sketch category. Rows of categories with
// no sketch raise MissingCategory.
CorrespondenceTable aggregate_correspondence(const FeatureBank& bank,
                                             std::span<const std::string> sketch_ids,
                                             const std::vector<std::vector<double>>& normalized,
                                             Source source, bool renormalize = true);

CorrespondenceTable encoder_correspondence(const AdaptorParams& params, const FeatureBank& bank,
                                           std::span<const std::string> test_ids,
                                           bool renormalize = true);

struct ImageSplit {
  int fold_id = 0;
  std::vector<std::string> train, val, test;
};

// Sketch images stratified by sketch category: fold k tests chunk k and
// validates on chunk k+1.
std::vector<ImageSplit> make_image_splits(const FeatureBank& bank, int n_folds,
                                          std::uint64_t seed);

}  // namespace sketchprag::encoder
