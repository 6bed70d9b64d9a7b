#include "sketchprag/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "sketchprag/error.hpp"
#include "sketchprag/kernels.hpp"

namespace sketchprag::encoder {

std::string_view level_name(Level l) {
  switch (l) {
    case Level::kHigh: return "high";
    case Level::kMid: return "mid";
    case Level::kLow: return "low";
  }
  return "high";
}

Level parse_level(std::string_view text) {
  if (text == "high") return Level::kHigh;
  if (text == "mid") return Level::kMid;
  if (text == "low") return Level::kLow;
  fail(ErrorKind::kParseError, "unknown encoder level '" + std::string(text) + "'");
}

Source source_for(Level l) {
  switch (l) {
    case Level::kHigh: return Source::kEncoderHigh;
    case Level::kMid: return Source::kEncoderMid;
    case Level::kLow: return Source::kEncoderLow;
  }
  return Source::kEncoderHigh;
}

Dims default_dims(Level l) {
  switch (l) {
    case Level::kHigh: return {4096, 1, 1};
    case Level::kMid: return {512, 28, 28};
    case Level::kLow: return {64, 112, 112};
  }
  return {};
}

// ---- FeatureBank ----

FeatureBank::FeatureBank(Level level, Dims dims, std::size_t num_objects)
    : level_(level), dims_(dims), num_objects_(num_objects),
      object_entry_(num_objects, -1) {
  if (dims.size() == 0) fail(ErrorKind::kShapeError, "feature dims must be positive");
  if (level == Level::kHigh && dims.spatial() != 1) {
    fail(ErrorKind::kShapeError, "high-level features have no spatial extent");
  }
}

namespace {

void check_feature(const Dims& dims, std::span<const double> feat, const std::string& id) {
  if (feat.size() != dims.size()) {
    fail(ErrorKind::kShapeError, "feature '" + id + "' has " + std::to_string(feat.size()) +
                                     " entries, expected " + std::to_string(dims.size()));
  }
  for (double v : feat) {
    if (!std::isfinite(v)) fail(ErrorKind::kShapeError, "feature '" + id + "' is not finite");
  }
}

}  // namespace

void FeatureBank::add_sketch(std::string id, SketchCategory category,
                             std::span<const double> feat) {
  check_feature(dims_, feat, id);
  if (static_cast<std::size_t>(category.object) >= num_objects_ || category.object < 0) {
    fail(ErrorKind::kShapeError, "sketch '" + id + "' refers to an unknown object");
  }
  if (by_id_.contains(id)) fail(ErrorKind::kShapeError, "duplicate image id '" + id + "'");
  ImageEntry e{id, ImageKind::kSketch, category, -1, data_.size()};
  data_.insert(data_.end(), feat.begin(), feat.end());
  by_id_.emplace(id, entries_.size());
  entries_.push_back(std::move(e));
}

void FeatureBank::add_object(std::string id, int object, std::span<const double> feat) {
  check_feature(dims_, feat, id);
  if (object < 0 || static_cast<std::size_t>(object) >= num_objects_) {
    fail(ErrorKind::kShapeError, "object image '" + id + "' has an out-of-range index");
  }
  if (by_id_.contains(id)) fail(ErrorKind::kShapeError, "duplicate image id '" + id + "'");
  if (object_entry_[static_cast<std::size_t>(object)] >= 0) {
    fail(ErrorKind::kShapeError, "object " + std::to_string(object) + " already has a feature");
  }
  ImageEntry e{id, ImageKind::kObject, {}, object, data_.size()};
  data_.insert(data_.end(), feat.begin(), feat.end());
  object_entry_[static_cast<std::size_t>(object)] = static_cast<std::ptrdiff_t>(entries_.size());
  by_id_.emplace(id, entries_.size());
  entries_.push_back(std::move(e));
}

std::vector<std::string> FeatureBank::sketch_ids() const {
  std::vector<std::string> ids;
  for (const ImageEntry& e : entries_) {
    if (e.kind == ImageKind::kSketch) ids.push_back(e.id);
  }
  return ids;
}

const ImageEntry& FeatureBank::sketch(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  if (it == by_id_.end() || entries_[it->second].kind != ImageKind::kSketch) {
    fail(ErrorKind::kMissingFeature, "no sketch feature for '" + std::string(id) + "'");
  }
  return entries_[it->second];
}

std::span<const double> FeatureBank::object_feature(int o) const {
  if (o < 0 || static_cast<std::size_t>(o) >= num_objects_ ||
      object_entry_[static_cast<std::size_t>(o)] < 0) {
    fail(ErrorKind::kMissingFeature, "no object feature for object " + std::to_string(o));
  }
  return feature(entries_[static_cast<std::size_t>(object_entry_[static_cast<std::size_t>(o)])]);
}

std::span<const double> FeatureBank::feature(const ImageEntry& e) const {
  return {data_.data() + e.offset, dims_.size()};
}

bool FeatureBank::complete() const {
  return std::all_of(object_entry_.begin(), object_entry_.end(),
                     [](std::ptrdiff_t i) { return i >= 0; });
}

// ---- network pieces ----

double swish(double x) { return x / (1.0 + std::exp(-x)); }

std::vector<double> attention_pool(std::span<const double> feat, std::span<const double> weights,
                                   const Dims& dims) {
  if (feat.size() != dims.size() || weights.size() != dims.spatial()) {
    fail(ErrorKind::kShapeError, "attention weights do not match the feature map");
  }
  std::vector<double> out(dims.channels);
  kernels::active().gemv(feat.data(), weights.data(), out.data(), dims.channels, dims.spatial());
  return out;
}

namespace {

Layout make_layout(Level level, const Dims& dims, std::size_t hidden) {
  Layout l;
  const std::size_t block = hidden * dims.channels;
  l.w1_sketch = 0;
  l.w1_object = block;
  l.b1 = 2 * block;
  l.w2 = l.b1 + hidden;
  l.b2 = l.w2 + hidden;
  l.att_sketch = l.b2 + 1;
  const std::size_t att = level == Level::kHigh ? 0 : dims.spatial();
  l.att_object = l.att_sketch + att;
  l.total = l.att_object + att;
  return l;
}

}  // namespace

AdaptorParams::AdaptorParams(Level level, Dims dims, std::size_t hidden, double dropout)
    : level_(level), dims_(dims), hidden_(hidden), dropout_(dropout),
      layout_(make_layout(level, dims, hidden)), values_(layout_.total, 0.0) {
  if (hidden == 0 || dims.channels == 0) {
    fail(ErrorKind::kShapeError, "adaptor needs positive width and channels");
  }
  if (level == Level::kHigh && dims.spatial() != 1) {
    fail(ErrorKind::kShapeError, "high-level adaptor takes vector features");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    fail(ErrorKind::kInvalidArgument, "dropout rate must lie in [0, 1)");
  }
}

AdaptorParams AdaptorParams::initialized(Level level, Dims dims, std::size_t hidden,
                                         double dropout, std::uint64_t seed) {
  AdaptorParams p(level, dims, hidden, dropout);
  std::mt19937_64 rng(seed);
  const double r1 = 1.0 / std::sqrt(2.0 * static_cast<double>(dims.channels));
  const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> u1(-r1, r1);
  std::uniform_real_distribution<double> u2(-r2, r2);
  auto& v = p.values_;
  const Layout& l = p.layout_;
  for (std::size_t i = l.w1_sketch; i < l.w2; ++i) v[i] = u1(rng);
  for (std::size_t i = l.w2; i < l.b2; ++i) v[i] = u2(rng);
  v[l.b2] = 0.0;
  for (std::size_t i = l.att_sketch; i < l.total; ++i) {
    v[i] = 1.0 / static_cast<double>(dims.spatial());
  }
  return p;
}

std::size_t param_count(Level level, const Dims& dims, std::size_t hidden) {
  return make_layout(level, dims, hidden).total;
}

std::size_t solve_hidden(Level level, const Dims& dims, std::size_t target) {
  const std::size_t fixed = param_count(level, dims, 1) - (2 * dims.channels + 2);
  if (target <= fixed + 2 * dims.channels + 2) return 1;
  const double h = static_cast<double>(target - fixed) / static_cast<double>(2 * dims.channels + 2);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(h)));
}

std::size_t default_hidden(Level level) {
  switch (level) {
    case Level::kHigh: return 128;
    case Level::kMid: return 1021;
    case Level::kLow: return 7875;
  }
  return 128;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<double> dropout_mask(std::size_t hidden, double rate, std::uint64_t& state) {
  std::vector<double> mask(hidden, 1.0);
  if (rate <= 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask) {
    const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    m = u < rate ? 0.0 : keep;
  }
  return mask;
}

namespace {

// Pooled features and their first-layer projection for one image.
struct Projected {
  std::vector<double> pooled;
  std::vector<double> hidden;  // W * pooled (+ b1 for objects)
};

Projected project(const AdaptorParams& params, std::span<const double> feat, bool is_sketch) {
  const Dims& d = params.dims();
  if (feat.size() != d.size()) fail(ErrorKind::kShapeError, "feature size does not match adaptor");
  Projected out;
  if (params.has_attention()) {
    out.pooled = attention_pool(feat, is_sketch ? params.att_sketch() : params.att_object(), d);
  } else {
    out.pooled.assign(feat.begin(), feat.end());
  }
  out.hidden.assign(params.hidden(), 0.0);
  const auto w = is_sketch ? params.w1_sketch() : params.w1_object();
  kernels::active().gemv(w.data(), out.pooled.data(), out.hidden.data(), params.hidden(),
                         d.channels);
  if (!is_sketch) {
    const auto b1 = params.b1();
    for (std::size_t h = 0; h < params.hidden(); ++h) out.hidden[h] += b1[h];
  }
  return out;
}

// Output score from the two projections; fills swish activations and
// sigmoids when requested.
double head(const AdaptorParams& params, const std::vector<double>& hs,
            const std::vector<double>& ho, std::span<const double> mask, double* z,
            double* act, double* sig) {
  const std::size_t n = params.hidden();
  for (std::size_t h = 0; h < n; ++h) z[h] = hs[h] + ho[h];
  kernels::active().swish(z, act, sig, n);
  if (!mask.empty()) {
    for (std::size_t h = 0; h < n; ++h) act[h] *= mask[h];
  }
  return kernels::active().dot(params.w2().data(), act, n) + params.b2();
}

}  // namespace

double forward(const AdaptorParams& params, std::span<const double> sketch_feat,
               std::span<const double> object_feat, std::span<const double> mask) {
  if (!mask.empty() && mask.size() != params.hidden()) {
    fail(ErrorKind::kShapeError, "dropout mask length does not match the hidden width");
  }
  const Projected s = project(params, sketch_feat, true);
  const Projected o = project(params, object_feat, false);
  std::vector<double> z(params.hidden()), act(params.hidden()), sig(params.hidden());
  return head(params, s.hidden, o.hidden, mask, z.data(), act.data(), sig.data());
}

double forward(const AdaptorParams& params, std::span<const double> sketch_feat,
               std::span<const double> object_feat, bool train_mode, std::uint64_t& rng_state) {
  if (!train_mode) return forward(params, sketch_feat, object_feat);
  const auto mask = dropout_mask(params.hidden(), params.dropout(), rng_state);
  return forward(params, sketch_feat, object_feat, mask);
}

std::vector<double> softmax(std::span<const double> scores) {
  const double lse = kernels::logsumexp(scores);
  std::vector<double> q(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) q[i] = std::exp(scores[i] - lse);
  return q;
}

namespace {

std::vector<Projected> project_objects(const AdaptorParams& params, const FeatureBank& bank) {
  if (bank.dims() != params.dims()) fail(ErrorKind::kShapeError, "bank dims do not match adaptor");
  std::vector<Projected> out;
  out.reserve(bank.num_objects());
  for (std::size_t o = 0; o < bank.num_objects(); ++o) {
    out.push_back(project(params, bank.object_feature(static_cast<int>(o)), false));
  }
  return out;
}

std::vector<double> scores_against(const AdaptorParams& params, const Projected& sketch,
                                   const std::vector<Projected>& objects) {
  const std::size_t n = params.hidden();
  std::vector<double> z(n), act(n), sig(n);
  std::vector<double> scores(objects.size());
  for (std::size_t o = 0; o < objects.size(); ++o) {
    scores[o] = head(params, sketch.hidden, objects[o].hidden, {}, z.data(), act.data(),
                     sig.data());
  }
  return scores;
}

}  // namespace

std::vector<double> score_objects(const AdaptorParams& params, const FeatureBank& bank,
                                  std::string_view sketch_id) {
  const ImageEntry& e = bank.sketch(sketch_id);
  const auto objects = project_objects(params, bank);
  return scores_against(params, project(params, bank.feature(e), true), objects);
}

std::vector<double> predict_distribution(const AdaptorParams& params, const FeatureBank& bank,
                                         std::string_view sketch_id) {
  return softmax(score_objects(params, bank, sketch_id));
}

double xent_loss(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) fail(ErrorKind::kShapeError, "distributions differ in length");
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] != 0.0) loss -= p[i] * std::log(std::max(q[i], kLogFloor));
  }
  return loss;
}

LossGrad loss_and_gradient(const AdaptorParams& params, const FeatureBank& bank,
                           const CorrespondenceTable& targets,
                           std::span<const std::string> sketch_ids, double scale,
                           std::span<const std::vector<double>> masks) {
  if (sketch_ids.empty()) fail(ErrorKind::kInvalidArgument, "empty minibatch");
  if (targets.num_objects() != bank.num_objects()) {
    fail(ErrorKind::kShapeError, "targets and feature bank disagree on the object count");
  }
  const std::size_t n_obj = bank.num_objects();
  if (!masks.empty() && masks.size() != sketch_ids.size() * n_obj) {
    fail(ErrorKind::kShapeError, "need one dropout mask per sketch-object pair");
  }
  const kernels::KernelTable& k = kernels::active();
  const Dims& d = params.dims();
  const std::size_t nh = params.hidden();
  const std::size_t nc = d.channels;
  const Layout& lay = params.layout();
  const auto w2 = params.w2();

  LossGrad out;
  out.grad.assign(params.size(), 0.0);
  double* g = out.grad.data();

  const auto objects = project_objects(params, bank);
  // Hidden-layer gradient summed over the batch, per object.
  std::vector<std::vector<double>> g_obj(n_obj, std::vector<double>(nh, 0.0));
  std::vector<double> z(nh), act(nh), sig(nh), gz(nh), g_sk(nh), dpool(nc);
  std::vector<double> scores(n_obj);
  const double per = scale / static_cast<double>(sketch_ids.size());

  for (std::size_t si = 0; si < sketch_ids.size(); ++si) {
    const ImageEntry& e = bank.sketch(sketch_ids[si]);
    const auto feat = bank.feature(e);
    const Projected s = project(params, feat, true);
    auto mask_for = [&](std::size_t o) -> std::span<const double> {
      if (masks.empty()) return {};
      return masks[si * n_obj + o];
    };
    for (std::size_t o = 0; o < n_obj; ++o) {
      scores[o] = head(params, s.hidden, objects[o].hidden, mask_for(o), z.data(), act.data(),
                       sig.data());
    }
    const auto q = softmax(scores);
    const auto p = targets.row(e.sketch);
    out.loss += per * xent_loss(p, q);
    const double p_mass = std::accumulate(p.begin(), p.end(), 0.0);

    std::fill(g_sk.begin(), g_sk.end(), 0.0);
    for (std::size_t o = 0; o < n_obj; ++o) {
      const double g_score = per * (q[o] * p_mass - p[o]);
      const auto mask = mask_for(o);
      head(params, s.hidden, objects[o].hidden, mask, z.data(), act.data(), sig.data());
      k.axpy(g_score, act.data(), g + lay.w2, nh);
      g[lay.b2] += g_score;
      for (std::size_t h = 0; h < nh; ++h) {
        const double m = mask.empty() ? 1.0 : mask[h];
        const double dswish = sig[h] * (1.0 + z[h] * (1.0 - sig[h]));
        gz[h] = g_score * w2[h] * m * dswish;
      }
      k.axpy(1.0, gz.data(), g_sk.data(), nh);
      k.axpy(1.0, gz.data(), g_obj[o].data(), nh);
    }
    k.axpy(1.0, g_sk.data(), g + lay.b1, nh);
    k.ger(1.0, g_sk.data(), s.pooled.data(), g + lay.w1_sketch, nh, nc);
    if (params.has_attention()) {
      std::fill(dpool.begin(), dpool.end(), 0.0);
      k.gemv_t_acc(params.w1_sketch().data(), g_sk.data(), dpool.data(), nh, nc);
      k.gemv_t_acc(feat.data(), dpool.data(), g + lay.att_sketch, nc, d.spatial());
    }
  }
  for (std::size_t o = 0; o < n_obj; ++o) {
    k.ger(1.0, g_obj[o].data(), objects[o].pooled.data(), g + lay.w1_object, nh, nc);
    if (params.has_attention()) {
      std::fill(dpool.begin(), dpool.end(), 0.0);
      k.gemv_t_acc(params.w1_object().data(), g_obj[o].data(), dpool.data(), nh, nc);
      const auto feat = bank.object_feature(static_cast<int>(o));
      k.gemv_t_acc(feat.data(), dpool.data(), g + lay.att_object, nc, d.spatial());
    }
  }
  return out;
}

double mean_loss(const AdaptorParams& params, const FeatureBank& bank,
                 const CorrespondenceTable& targets, std::span<const std::string> sketch_ids) {
  if (sketch_ids.empty()) return 0.0;
  const auto objects = project_objects(params, bank);
  double total = 0.0;
  for (const std::string& id : sketch_ids) {
    const ImageEntry& e = bank.sketch(id);
    const auto q = softmax(scores_against(params, project(params, bank.feature(e), true), objects));
    total += xent_loss(targets.row(e.sketch), q);
  }
  return total / static_cast<double>(sketch_ids.size());
}

double top1_accuracy(const AdaptorParams& params, const FeatureBank& bank,
                     std::span<const std::string> sketch_ids) {
  if (sketch_ids.empty()) return 0.0;
  const auto objects = project_objects(params, bank);
  std::size_t hits = 0;
  for (const std::string& id : sketch_ids) {
    const ImageEntry& e = bank.sketch(id);
    const auto s = scores_against(params, project(params, bank.feature(e), true), objects);
    const auto best = std::max_element(s.begin(), s.end()) - s.begin();
    if (best == e.sketch.object) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(sketch_ids.size());
}

// ---- training ----

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

TrainResult train_adaptor(const FeatureBank& bank, const CorrespondenceTable& targets,
                          std::span<const std::string> train_ids,
                          std::span<const std::string> val_ids, const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) || cfg.batch_size == 0 || cfg.epochs <= 0 ||
      !(cfg.loss_scale > 0.0)) {
    fail(ErrorKind::kConfigError, "training settings must be positive");
  }
  if (train_ids.empty() || val_ids.empty()) {
    fail(ErrorKind::kSplitInfeasible, "training needs non-empty train and validation sketches");
  }
  for (const std::string& v : val_ids) {
    if (std::find(train_ids.begin(), train_ids.end(), v) != train_ids.end()) {
      fail(ErrorKind::kSplitInfeasible, "sketch '" + v + "' is in both train and validation");
    }
  }
  std::size_t hidden = cfg.hidden;
  if (hidden == 0) {
    if (bank.dims() != default_dims(bank.level())) {
      fail(ErrorKind::kConfigError, "hidden width must be given for non-default feature dims");
    }
    hidden = default_hidden(bank.level());
  }

  TrainResult result;
  AdaptorParams params =
      AdaptorParams::initialized(bank.level(), bank.dims(), hidden, cfg.dropout, cfg.seed);
  Adam adam(params.size(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5bd1e995ULL);
  std::uint64_t mask_state = cfg.seed * 0x2545f4914f6cdd1dULL + 1;

  result.val_loss.push_back(mean_loss(params, bank, targets, val_ids));
  result.train_loss.push_back(mean_loss(params, bank, targets, train_ids));
  result.params = params;
  double best = result.val_loss.front();

  std::vector<std::string> order(train_ids.begin(), train_ids.end());
  std::vector<std::vector<double>> masks;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::string> batch(order.data() + start, end - start);
      masks.clear();
      if (params.dropout() > 0.0) {
        for (std::size_t i = 0; i < batch.size() * bank.num_objects(); ++i) {
          masks.push_back(dropout_mask(hidden, params.dropout(), mask_state));
        }
      }
      const LossGrad lg =
          loss_and_gradient(params, bank, targets, batch, cfg.loss_scale, masks);
      if (!std::isfinite(lg.loss)) {
        fail(ErrorKind::kTrainingDiverged,
             "training loss is not finite at epoch " + std::to_string(epoch));
      }
      adam.step(params.values(), lg.grad);
    }
    const double val = mean_loss(params, bank, targets, val_ids);
    if (!std::isfinite(val)) {
      fail(ErrorKind::kTrainingDiverged,
           "validation loss is not finite at epoch " + std::to_string(epoch));
    }
    result.val_loss.push_back(val);
    result.train_loss.push_back(mean_loss(params, bank, targets, train_ids));
    if (val < best) {
      best = val;
      result.best_epoch = epoch;
      result.params = params;
    }
  }
  return result;
}

// ---- correspondence ----

std::vector<std::vector<double>> raw_scores(const AdaptorParams& params, const FeatureBank& bank,
                                            std::span<const std::string> sketch_ids) {
  const auto objects = project_objects(params, bank);
  std::vector<std::vector<double>> out;
  out.reserve(sketch_ids.size());
  for (const std::string& id : sketch_ids) {
    const ImageEntry& e = bank.sketch(id);
    out.push_back(scores_against(params, project(params, bank.feature(e), true), objects));
  }
  return out;
}

std::vector<std::vector<double>> logistic_normalize(const std::vector<std::vector<double>>& raw) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& row : raw) {
    for (double v : row) sum += v;
    n += row.size();
  }
  if (n == 0) return raw;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& row : raw) {
    for (double v : row) ss += (v - mean) * (v - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  auto out = raw;
  for (auto& row : out) {
    for (double& v : row) {
      const double zs = sd > 0.0 ? (v - mean) / sd : 0.0;
      v = 1.0 / (1.0 + std::exp(-zs));
    }
  }
  return out;
}

CorrespondenceTable aggregate_correspondence(const FeatureBank& bank,
                                             std::span<const std::string> sketch_ids,
                                             const std::vector<std::vector<double>>& normalized,
                                             Source source, bool renormalize) {
  const std::size_t n_obj = bank.num_objects();
  if (normalized.size() != sketch_ids.size()) {
    fail(ErrorKind::kShapeError, "one score row is needed per sketch");
  }
  std::vector<double> scores(2 * n_obj * n_obj, 0.0);
  std::vector<std::size_t> counts(2 * n_obj, 0);
  for (std::size_t i = 0; i < sketch_ids.size(); ++i) {
    const ImageEntry& e = bank.sketch(sketch_ids[i]);
    if (normalized[i].size() != n_obj) fail(ErrorKind::kShapeError, "score row has wrong length");
    const auto r = static_cast<std::size_t>(e.sketch.index());
    for (std::size_t o = 0; o < n_obj; ++o) scores[r * n_obj + o] += normalized[i][o];
    ++counts[r];
  }
  for (std::size_t r = 0; r < 2 * n_obj; ++r) {
    if (counts[r] == 0) {
      const SketchCategory s = SketchCategory::from_index(static_cast<int>(r));
      fail(ErrorKind::kMissingCategory,
           "no scored sketch for object " + std::to_string(s.object) + " " +
               std::string(condition_name(s.condition)));
    }
    double row_sum = 0.0;
    for (std::size_t o = 0; o < n_obj; ++o) {
      scores[r * n_obj + o] /= static_cast<double>(counts[r]);
      row_sum += scores[r * n_obj + o];
    }
    if (renormalize) {
      for (std::size_t o = 0; o < n_obj; ++o) scores[r * n_obj + o] /= row_sum;
    }
  }
  return CorrespondenceTable(source, n_obj, std::move(scores));
}

CorrespondenceTable encoder_correspondence(const AdaptorParams& params, const FeatureBank& bank,
                                           std::span<const std::string> test_ids,
                                           bool renormalize) {
  return aggregate_correspondence(bank, test_ids,
                                  logistic_normalize(raw_scores(params, bank, test_ids)),
                                  source_for(params.level()), renormalize);
}

std::vector<ImageSplit> make_image_splits(const FeatureBank& bank, int n_folds,
                                          std::uint64_t seed) {
  if (n_folds < 3) fail(ErrorKind::kSplitInfeasible, "image splits need at least 3 folds");
  std::map<int, std::vector<std::string>> by_category;
  for (const ImageEntry& e : bank.entries()) {
    if (e.kind == ImageKind::kSketch) by_category[e.sketch.index()].push_back(e.id);
  }
  std::mt19937_64 rng(seed);
  const auto folds = static_cast<std::size_t>(n_folds);
  std::vector<std::vector<std::string>> chunks(folds);
  std::size_t offset = 0;
  for (auto& [cat, ids] : by_category) {
    std::sort(ids.begin(), ids.end());
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t i = 0; i < ids.size(); ++i) chunks[(i + offset) % folds].push_back(ids[i]);
    offset += ids.size();
  }
  std::vector<ImageSplit> out;
  for (std::size_t k = 0; k < folds; ++k) {
    ImageSplit s;
    s.fold_id = static_cast<int>(k);
    s.test = chunks[k];
    s.val = chunks[(k + 1) % folds];
    for (std::size_t j = 0; j < folds; ++j) {
      if (j != k && j != (k + 1) % folds) s.train.insert(s.train.end(), chunks[j].begin(), chunks[j].end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace sketchprag::encoder
