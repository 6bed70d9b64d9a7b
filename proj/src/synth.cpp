#include "sketchprag/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sketchprag/error.hpp"

namespace sketchprag::synth {

void SynthSpec::validate() const {
  std::vector<std::string> problems;
  if (n_categories < 4) problems.push_back("n_categories must be at least 4 for far contexts");
  if (n_objects_per_category < 4) {
    problems.push_back("n_objects_per_category must be at least 4 for close contexts");
  }
  if (n_sets < 1) problems.push_back("n_sets must be positive");
  if (!(noise >= 0.0)) problems.push_back("noise must be non-negative");
  if (!(cost_spread >= 0.0)) problems.push_back("cost_spread must be non-negative");
  for (double v : {target_strength, within_category_similarity, detail_bonus, cost_gap}) {
    if (!std::isfinite(v)) {
      problems.push_back("logit and cost settings must be finite");
      break;
    }
  }
  if (problems.empty()) return;
  std::string msg = "invalid synth spec:";
  for (const auto& p : problems) msg += " " + p + ";";
  fail(ErrorKind::kSpecError, msg);
}

io::Json spec_to_json(const SynthSpec& spec) {
  return {{"n_categories", spec.n_categories},
          {"n_objects_per_category", spec.n_objects_per_category},
          {"target_strength", spec.target_strength},
          {"within_category_similarity", spec.within_category_similarity},
          {"detail_bonus", spec.detail_bonus},
          {"cost_gap", spec.cost_gap},
          {"cost_spread", spec.cost_spread},
          {"noise", spec.noise},
          {"n_sets", spec.n_sets},
          {"seed", spec.seed}};
}

SynthSpec spec_from_json(const io::Json& j) {
  if (!j.is_object()) fail(ErrorKind::kSpecError, "synth spec must be a JSON object");
  SynthSpec s;
  try {
    s.n_categories = j.value("n_categories", s.n_categories);
    s.n_objects_per_category = j.value("n_objects_per_category", s.n_objects_per_category);
    s.target_strength = j.value("target_strength", s.target_strength);
    s.within_category_similarity =
        j.value("within_category_similarity", s.within_category_similarity);
    s.detail_bonus = j.value("detail_bonus", s.detail_bonus);
    s.cost_gap = j.value("cost_gap", s.cost_gap);
    s.cost_spread = j.value("cost_spread", s.cost_spread);
    s.noise = j.value("noise", s.noise);
    s.n_sets = j.value("n_sets", s.n_sets);
    s.seed = j.value("seed", s.seed);
  } catch (const io::Json::exception& e) {
    fail(ErrorKind::kSpecError, std::string("synth spec: ") + e.what());
  }
  for (const auto& [key, _] : j.items()) {
    if (!spec_to_json(s).contains(key)) {
      fail(ErrorKind::kSpecError, "synth spec has unknown field '" + key + "'");
    }
  }
  s.validate();
  return s;
}

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t draw_index(std::span<const double> probs, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding left u past the last cumulative value.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

}  // namespace

World gen_world(const SynthSpec& spec) {
  spec.validate();
  World w;
  w.spec = spec;
  w.inventory = Inventory::uniform(spec.n_categories, spec.n_objects_per_category);
  const auto n = w.inventory.num_objects();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> scores(2 * n * n);
  std::vector<double> logits(n);
  for (std::size_t r = 0; r < 2 * n; ++r) {
    const SketchCategory s = SketchCategory::from_index(static_cast<int>(r));
    const int cat = w.inventory.category_of(s.object);
    for (std::size_t o = 0; o < n; ++o) {
      double l = 0.0;
      if (static_cast<int>(o) == s.object) {
        l = spec.target_strength + (s.condition == Condition::kClose ? spec.detail_bonus : 0.0);
      } else if (w.inventory.category_of(static_cast<int>(o)) == cat) {
        l = spec.within_category_similarity;
      }
      logits[o] = l + spec.noise * gauss(rng);
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double& l : logits) z += (l = std::exp(l - m));
    for (std::size_t o = 0; o < n; ++o) scores[r * n + o] = logits[o] / z;
  }
  w.table = CorrespondenceTable(Source::kHumanRecog, n, std::move(scores));

  std::vector<double> base(n);
  for (double& b : base) b = spec.cost_spread * uniform01(rng);
  std::vector<double> raw(2 * n);
  for (std::size_t r = 0; r < 2 * n; ++r) {
    const SketchCategory s = SketchCategory::from_index(static_cast<int>(r));
    raw[r] = base[static_cast<std::size_t>(s.object)] +
             (s.condition == Condition::kClose ? spec.cost_gap : 0.0) + spec.noise * gauss(rng);
  }
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double span = *hi - *lo;
  const double low = *lo;
  for (double& c : raw) c = span > 0.0 ? (c - low) / span : 0.0;
  w.costs = CostVector(std::move(raw));

  const int per = spec.n_objects_per_category;
  std::vector<int> others;
  for (int set = 0; set < spec.n_sets; ++set) {
    for (std::size_t t = 0; t < n; ++t) {
      const int target = static_cast<int>(t);
      const int cat = w.inventory.category_of(target);
      others.clear();
      for (int k = 0; k < per; ++k) {
        if (cat * per + k != target) others.push_back(cat * per + k);
      }
      std::shuffle(others.begin(), others.end(), rng);
      Context close{target, {others[0], others[1], others[2]}, Condition::kClose};
      std::sort(close.distractors.begin(), close.distractors.end());

      others.clear();
      for (int c = 0; c < spec.n_categories; ++c) {
        if (c != cat) others.push_back(c);
      }
      std::shuffle(others.begin(), others.end(), rng);
      Context far{target, {}, Condition::kFar};
      for (int i = 0; i < 3; ++i) {
        far.distractors[static_cast<std::size_t>(i)] =
            others[static_cast<std::size_t>(i)] * per + static_cast<int>(rng() % static_cast<std::uint64_t>(per));
      }
      std::sort(far.distractors.begin(), far.distractors.end());
      w.contexts.push_back(close);
      w.contexts.push_back(far);
    }
  }
  return w;
}

std::vector<TrialRecord> simulate_trials(const World& world, ParamVector params, Variant variant,
                                         int n_reps, std::uint64_t seed,
                                         const rsa::RsaOptions& opts) {
  if (n_reps < 0) fail(ErrorKind::kInvalidArgument, "n_reps must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto candidates = rsa::default_candidates(world.table);
  std::vector<rsa::SketchDistribution> dists;
  dists.reserve(world.contexts.size());
  for (const Context& ctx : world.contexts) {
    dists.push_back(rsa::sketcher_distribution(world.table, world.costs, ctx, params, variant,
                                               candidates, opts));
  }
  std::vector<TrialRecord> trials;
  trials.reserve(static_cast<std::size_t>(n_reps) * world.contexts.size());
  for (int rep = 0; rep < n_reps; ++rep) {
    const double speed = std::exp(0.2 * gauss(rng));
    for (std::size_t c = 0; c < world.contexts.size(); ++c) {
      TrialRecord t;
      t.pair_id = "pair_" + std::to_string(rep);
      t.trial_index = static_cast<int>(c);
      t.context = world.contexts[c];
      t.sketch = candidates[draw_index(dists[c].probs, rng)];
      const double cost = world.costs[t.sketch];
      t.draw_time_s = speed * (4.0 + 16.0 * cost) * std::exp(0.05 * gauss(rng));
      t.num_strokes = static_cast<int>(std::lround(2.0 + 10.0 * cost));
      t.ink = 100.0 * t.draw_time_s;
      trials.push_back(std::move(t));
    }
  }
  return trials;
}

std::vector<RecognitionTrial> simulate_recognition(const World& world, int n_per_category,
                                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<RecognitionTrial> out;
  for (const SketchCategory s : world.inventory.all_sketch_categories()) {
    const auto row = world.table.row(s);
    for (int k = 0; k < n_per_category; ++k) {
      RecognitionTrial r;
      r.sketch = s;
      r.chosen = static_cast<int>(draw_index(row, rng));
      r.rt_ms = 1500.0 + 6000.0 * uniform01(rng);
      out.push_back(r);
    }
  }
  return out;
}

encoder::FeatureBank gen_feature_bank(const World& world, const FeatureSpec& spec) {
  using encoder::Dims;
  const Dims& d = spec.dims;
  const auto n = world.inventory.num_objects();
  encoder::FeatureBank bank(spec.level, d, n);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> pattern(d.spatial());
  for (double& p : pattern) p = std::abs(1.0 + 0.5 * gauss(rng));

  std::vector<std::vector<double>> cat_proto(world.inventory.num_categories(),
                                             std::vector<double>(d.channels));
  for (auto& v : cat_proto) {
    for (double& x : v) x = gauss(rng);
  }
  std::vector<std::vector<double>> proto(n, std::vector<double>(d.channels));
  for (std::size_t o = 0; o < n; ++o) {
    const auto& cv = cat_proto[static_cast<std::size_t>(world.inventory.category_of(static_cast<int>(o)))];
    for (std::size_t c = 0; c < d.channels; ++c) proto[o][c] = 0.6 * cv[c] + 0.8 * gauss(rng);
  }

  std::vector<double> feat(d.size());
  auto fill = [&](const std::vector<double>& u, double scale, double noise) {
    for (std::size_t c = 0; c < d.channels; ++c) {
      for (std::size_t k = 0; k < d.spatial(); ++k) {
        feat[c * d.spatial() + k] = scale * u[c] * pattern[k] + noise * gauss(rng);
      }
    }
  };
  for (std::size_t o = 0; o < n; ++o) {
    fill(proto[o], 1.0, 0.0);
    bank.add_object(world.inventory.object(static_cast<int>(o)).label, static_cast<int>(o), feat);
  }
  for (const SketchCategory s : world.inventory.all_sketch_categories()) {
    for (int k = 0; k < spec.sketches_per_category; ++k) {
      fill(proto[static_cast<std::size_t>(s.object)], spec.identity, spec.noise);
      bank.add_sketch(world.inventory.object(s.object).label + "_" +
                          std::string(condition_name(s.condition)) + "_" + std::to_string(k),
                      s, feat);
    }
  }
  return bank;
}

namespace {

// ln sum exp, written out here so the oracle does not share the kernels.
double naive_lse(const std::vector<double>& x) {
  double m = -INFINITY;
  for (double v : x) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

inference::GridPosterior exhaustive_posterior(const CorrespondenceTable& table,
                                              const CostVector& costs,
                                              std::span<const TrialRecord> trials,
                                              const inference::PriorSpec& prior, Variant variant,
                                              double log_floor) {
  inference::GridPosterior::Axes axes;
  inference::GridPosterior::Support support;
  std::size_t total = 1;
  for (std::size_t p = 0; p < 4; ++p) {
    const bool lesioned = (variant == Variant::kContextInsensitive && p == 2) ||
                          (variant == Variant::kCostInsensitive && p == 1);
    axes[p] = lesioned ? std::vector<double>{0.0} : prior.axes[p].points;
    support[p] = {prior.axes[p].lo, prior.axes[p].hi};
    total *= axes[p].size();
  }
  if (total > kOracleMaxPoints) {
    fail(ErrorKind::kOracleTooLarge,
         "oracle grid has " + std::to_string(total) + " points, limit " +
             std::to_string(kOracleMaxPoints));
  }
  const std::size_t n_obj = table.num_objects();
  const std::size_t n_sk = 2 * n_obj;
  const double ln_floor = std::log(log_floor);
  std::vector<double> log_lik(total, 0.0);
  std::vector<double> u(n_sk), viewer(4);

  std::size_t flat = 0;
  for (double w_i : axes[0]) {
    for (double w_c : axes[1]) {
      for (double w_d : axes[2]) {
        for (double alpha : axes[3]) {
          double ll = 0.0;
          for (const TrialRecord& t : trials) {
            const auto objs = t.context.objects();
            for (std::size_t k = 0; k < n_sk; ++k) {
              const SketchCategory s = SketchCategory::from_index(static_cast<int>(k));
              for (std::size_t j = 0; j < 4; ++j) viewer[j] = alpha * table.sim(s, objs[j]);
              const double ln_v = std::max(viewer[0] - naive_lse(viewer), ln_floor);
              const double resemblance = table.sim(s, t.context.target);
              const double info = w_d * ln_v + (1.0 - w_d) * resemblance;
              u[k] = w_i * info - w_c * costs[s];
            }
            ll += u[static_cast<std::size_t>(t.sketch.index())] - naive_lse(u);
          }
          log_lik[flat++] = ll;
        }
      }
    }
  }
  return inference::GridPosterior(std::move(axes), support, std::move(log_lik), variant);
}

}  // namespace sketchprag::synth
