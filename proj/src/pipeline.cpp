#include "sketchprag/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sketchprag/corpus_io.hpp"
#include "sketchprag/encoder_io.hpp"
#include "sketchprag/error.hpp"
#include "sketchprag/inference_io.hpp"

namespace fs = std::filesystem;

namespace sketchprag::pipeline {

using io::Json;

// ---- config ----

inference::PriorSpec RunConfig::prior_spec() const {
  return prior == "unit_wd" ? inference::PriorSpec::unit_diagnosticity(grid_points)
                            : inference::PriorSpec::wide(grid_points);
}

DataPaths RunConfig::effective_data() const {
  if (data) return *data;
  const fs::path world = output_dir.resolved / "world";
  const std::string text = output_dir.text + "/world";
  DataPaths d;
  d.inventory = PathRef{text + "/inventory.json", world / "inventory.json"};
  d.trials = PathRef{text + "/trials.csv", world / "trials.csv"};
  d.recognition = PathRef{text + "/recognition.csv", world / "recognition.csv"};
  d.features_dir = PathRef{text, world};
  // A simulated sketcher need not draw every category, so draw times cannot
  // always price all of them.
  d.costs = PathRef{text + "/truth/costs.json", world / "truth" / "costs.json"};
  return d;
}

std::optional<encoder::Level> level_of(Source s) {
  switch (s) {
    case Source::kHumanRecog: return std::nullopt;
    case Source::kEncoderHigh: return encoder::Level::kHigh;
    case Source::kEncoderMid: return encoder::Level::kMid;
    case Source::kEncoderLow: return encoder::Level::kLow;
  }
  return std::nullopt;
}

namespace {

// Field reader that records problems instead of throwing.
class Fields {
 public:
  Fields(const Json& obj, std::string prefix, std::vector<std::string>& violations)
      : obj_(obj), prefix_(std::move(prefix)), v_(violations) {}

  std::string path(std::string_view key) const {
    return prefix_.empty() ? std::string(key) : prefix_ + "." + std::string(key);
  }

  bool has(const char* key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  template <class T>
  bool get(const char* key, T& out) {
    if (!has(key)) return false;
    try {
      out = obj_.at(key).get<T>();
      return true;
    } catch (const Json::exception&) {
      v_.push_back(path(key) + ": wrong type");
      return false;
    }
  }

  const Json* object(const char* key) {
    if (!has(key)) return nullptr;
    if (!obj_.at(key).is_object()) {
      v_.push_back(path(key) + ": must be an object");
      return nullptr;
    }
    return &obj_.at(key);
  }

  void require(const char* key) {
    if (!has(key)) v_.push_back(path(key) + ": required");
  }

  void positive(const char* key, double value) {
    if (!(value > 0.0)) v_.push_back(path(key) + ": must be positive");
  }

  // Flags keys that no get/has call asked about.
  void reject_unknown() {
    for (const auto& [k, _] : obj_.items()) {
      if (!seen_.contains(k)) v_.push_back(path(k) + ": unknown field");
    }
  }

  std::vector<std::string>& violations() { return v_; }

 private:
  const Json& obj_;
  std::string prefix_;
  std::vector<std::string>& v_;
  std::set<std::string, std::less<>> seen_;
};

std::optional<PathRef> read_path(Fields& f, const char* key, const fs::path& base,
                                 bool must_exist, bool required) {
  std::string text;
  if (!f.get(key, text)) {
    if (required) f.require(key);
    return std::nullopt;
  }
  PathRef p{text, fs::path(text).is_absolute() ? fs::path(text) : base / text};
  if (must_exist && !fs::exists(p.resolved)) {
    f.violations().push_back(f.path(key) + ": file not found: " + p.resolved.string());
  }
  return p;
}

template <class Parse>
auto parse_or_record(Fields& f, const char* key, const std::string& text, Parse parse)
    -> std::optional<decltype(parse(text))> {
  try {
    return parse(text);
  } catch (const Error& e) {
    f.violations().push_back(f.path(key) + ": " + e.what());
    return std::nullopt;
  }
}

void read_synth(const Json& j, SynthRun& run, std::vector<std::string>& v) {
  Fields f(j, "synth", v);
  if (const Json* spec = f.object("spec")) {
    try {
      run.spec = synth::spec_from_json(*spec);
    } catch (const Error& e) {
      v.push_back(std::string("synth.spec: ") + e.what());
    }
  }
  if (const Json* planted = f.object("planted")) {
    Fields pf(*planted, "synth.planted", v);
    for (std::size_t p = 0; p < ParamVector::kSize; ++p) {
      const std::string name(kParamNames[p]);
      pf.get(name.c_str(), run.planted[p]);
      if (run.planted[p] < 0.0) v.push_back("synth.planted." + name + ": must be non-negative");
    }
    pf.reject_unknown();
  }
  std::string variant;
  if (f.get("variant", variant)) {
    if (auto parsed = parse_or_record(f, "variant", variant,
                                      [](const std::string& t) { return parse_variant(t); })) {
      run.variant = *parsed;
    }
  }
  f.get("n_reps", run.n_reps);
  if (run.n_reps < 1) v.push_back("synth.n_reps: must be positive");
  f.get("recognition_per_category", run.recognition_per_category);
  if (run.recognition_per_category < 1) {
    v.push_back("synth.recognition_per_category: must be positive");
  }
  f.get("noise_trials", run.noise_trials);
  if (run.noise_trials < 0) v.push_back("synth.noise_trials: must be non-negative");
  if (const Json* feat = f.object("features")) {
    Fields ff(*feat, "synth.features", v);
    ff.get("channels", run.features.channels);
    ff.get("spatial", run.features.spatial);
    ff.get("sketches_per_category", run.features.sketches_per_category);
    ff.get("identity", run.features.identity);
    std::vector<double> noise;
    if (ff.get("noise", noise)) {
      if (noise.size() != 3) {
        v.push_back("synth.features.noise: needs three entries (high, mid, low)");
      } else {
        std::copy(noise.begin(), noise.end(), run.features.noise.begin());
      }
    }
    if (run.features.channels == 0) v.push_back("synth.features.channels: must be positive");
    if (run.features.spatial == 0) v.push_back("synth.features.spatial: must be positive");
    if (run.features.sketches_per_category < 1) {
      v.push_back("synth.features.sketches_per_category: must be positive");
    }
    ff.reject_unknown();
  }
  f.reject_unknown();
}

}  // namespace

ConfigResult validate_config(const Json& j, const fs::path& base_dir) {
  ConfigResult result;
  auto& v = result.violations;
  if (!j.is_object()) {
    v.push_back("config: must be a JSON object");
    return result;
  }
  RunConfig cfg;
  Fields f(j, "", v);

  std::string out_dir;
  if (f.get("output_dir", out_dir)) {
    cfg.output_dir = {out_dir, fs::path(out_dir).is_absolute() ? fs::path(out_dir)
                                                                 : base_dir / out_dir};
  } else {
    cfg.output_dir = {"out", base_dir / "out"};
  }

  std::string source = "humanrecog";
  if (f.get("source", source)) {
    if (auto s = parse_or_record(f, "source", source,
                                 [](const std::string& t) { return parse_source(t); })) {
      cfg.source = *s;
    }
  }

  const Json* data = f.object("data");
  const Json* synth_cfg = f.object("synth");
  if ((data == nullptr) == (synth_cfg == nullptr)) {
    v.push_back("data/synth: exactly one of data or synth must be given");
  }
  if (data != nullptr) {
    Fields df(*data, "data", v);
    DataPaths d;
    d.inventory = read_path(df, "inventory", base_dir, true, false);
    if (auto t = read_path(df, "trials", base_dir, true, true)) d.trials = *t;
    d.recognition = read_path(df, "recognition", base_dir, true, false);
    d.features_dir = read_path(df, "features_dir", base_dir, true, false);
    d.costs = read_path(df, "costs", base_dir, true, false);
    if (!d.recognition) v.push_back("data.recognition: required");
    if (level_of(cfg.source) && !d.features_dir) {
      v.push_back("data.features_dir: required for encoder sources");
    }
    df.reject_unknown();
    cfg.data = d;
  }
  if (synth_cfg != nullptr) {
    SynthRun run;
    read_synth(*synth_cfg, run, v);
    cfg.synth = run;
  }

  std::vector<std::string> variants;
  if (f.get("variants", variants)) {
    cfg.variants.clear();
    for (const auto& name : variants) {
      if (auto p = parse_or_record(f, "variants", name,
                                   [](const std::string& t) { return parse_variant(t); })) {
        if (std::find(cfg.variants.begin(), cfg.variants.end(), *p) == cfg.variants.end()) {
          cfg.variants.push_back(*p);
        }
      }
    }
    if (cfg.variants.empty()) v.push_back("variants: at least one variant is required");
  }

  f.get("folds", cfg.folds);
  if (cfg.folds < 3) v.push_back("folds: must be at least 3");

  if (const Json* grid = f.object("grid")) {
    Fields gf(*grid, "grid", v);
    gf.get("points", cfg.grid_points);
    if (cfg.grid_points < 2) v.push_back("grid.points: must be at least 2");
    gf.get("prior", cfg.prior);
    if (cfg.prior != "wide" && cfg.prior != "unit_wd") {
      v.push_back("grid.prior: must be \"wide\" or \"unit_wd\"");
    }
    gf.reject_unknown();
  }

  if (const Json* mcmc = f.object("mcmc")) {
    Fields mf(*mcmc, "mcmc", v);
    mf.get("n_samples", cfg.mcmc.n_samples);
    mf.get("burn_in", cfg.mcmc.burn_in);
    mf.get("proposal_scale", cfg.mcmc.proposal_scale);
    if (cfg.mcmc.n_samples < 1) v.push_back("mcmc.n_samples: must be positive");
    if (cfg.mcmc.burn_in < 0) v.push_back("mcmc.burn_in: must be non-negative");
    mf.positive("proposal_scale", cfg.mcmc.proposal_scale);
    mf.reject_unknown();
  }

  if (const Json* boot = f.object("bootstrap")) {
    Fields bf(*boot, "bootstrap", v);
    bf.get("n_boot", cfg.n_boot);
    if (cfg.n_boot < 1) v.push_back("bootstrap.n_boot: must be positive");
    bf.reject_unknown();
  }

  std::string mode;
  if (f.get("predict_mode", mode)) {
    if (mode == "averaged") {
      cfg.predict_mode = metrics::PredictMode::kAveragedDistribution;
    } else if (mode == "per_sample") {
      cfg.predict_mode = metrics::PredictMode::kPerSample;
    } else {
      v.push_back("predict_mode: must be \"averaged\" or \"per_sample\"");
    }
  }

  if (const Json* enc = f.object("encoder")) {
    Fields ef(*enc, "encoder", v);
    auto& t = cfg.encoder.train;
    ef.get("learning_rate", t.learning_rate);
    ef.get("batch_size", t.batch_size);
    ef.get("epochs", t.epochs);
    ef.get("loss_scale", t.loss_scale);
    ef.get("dropout", t.dropout);
    ef.get("hidden_high", cfg.encoder.hidden_high);
    ef.get("renormalize", cfg.encoder.renormalize);
    ef.positive("learning_rate", t.learning_rate);
    ef.positive("batch_size", static_cast<double>(t.batch_size));
    ef.positive("epochs", t.epochs);
    ef.positive("loss_scale", t.loss_scale);
    ef.positive("hidden_high", static_cast<double>(cfg.encoder.hidden_high));
    if (!(t.dropout >= 0.0 && t.dropout < 1.0)) v.push_back("encoder.dropout: must lie in [0, 1)");
    ef.reject_unknown();
  }

  if (const Json* seeds = f.object("seeds")) {
    Fields sf(*seeds, "seeds", v);
    auto seed = [&](const char* key, std::uint64_t& out, bool needed) {
      if (!sf.get(key, out) && needed) sf.require(key);
    };
    seed("split", cfg.seeds.split, true);
    seed("mcmc", cfg.seeds.mcmc, true);
    seed("bootstrap", cfg.seeds.bootstrap, true);
    seed("encoder", cfg.seeds.encoder, level_of(cfg.source).has_value());
    seed("simulate", cfg.seeds.simulate, synth_cfg != nullptr);
    sf.reject_unknown();
  } else {
    v.push_back("seeds: required");
  }
  cfg.mcmc.seed = cfg.seeds.mcmc;
  cfg.encoder.train.seed = cfg.seeds.encoder;

  f.reject_unknown();
  if (v.empty()) result.config = std::move(cfg);
  return result;
}

ConfigResult validate_config_file(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::kConfigError, "config file not found: " + path.string());
  Json j;
  try {
    j = Json::parse(io::read_file(path));
  } catch (const Json::exception& e) {
    fail(ErrorKind::kConfigError, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  ConfigResult r = validate_config(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
  if (r.config) r.config->config_file = PathRef{path.string(), path};
  return r;
}

Json config_to_json(const RunConfig& cfg) {
  Json j;
  j["output_dir"] = cfg.output_dir.text;
  j["source"] = std::string(source_name(cfg.source));
  Json variants = Json::array();
  for (Variant v : cfg.variants) variants.push_back(std::string(variant_name(v)));
  j["variants"] = variants;
  j["folds"] = cfg.folds;
  j["grid"] = {{"points", cfg.grid_points}, {"prior", cfg.prior}};
  j["mcmc"] = {{"n_samples", cfg.mcmc.n_samples},
               {"burn_in", cfg.mcmc.burn_in},
               {"proposal_scale", cfg.mcmc.proposal_scale}};
  j["bootstrap"] = {{"n_boot", cfg.n_boot}};
  j["predict_mode"] =
      cfg.predict_mode == metrics::PredictMode::kPerSample ? "per_sample" : "averaged";
  const auto& t = cfg.encoder.train;
  j["encoder"] = {{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
                  {"epochs", t.epochs},               {"loss_scale", t.loss_scale},
                  {"dropout", t.dropout},             {"hidden_high", cfg.encoder.hidden_high},
                  {"renormalize", cfg.encoder.renormalize}};
  j["seeds"] = {{"split", cfg.seeds.split},
                {"mcmc", cfg.seeds.mcmc},
                {"bootstrap", cfg.seeds.bootstrap},
                {"encoder", cfg.seeds.encoder},
                {"simulate", cfg.seeds.simulate}};
  if (cfg.data) {
    Json d = {{"trials", cfg.data->trials.text}};
    if (cfg.data->inventory) d["inventory"] = cfg.data->inventory->text;
    if (cfg.data->recognition) d["recognition"] = cfg.data->recognition->text;
    if (cfg.data->features_dir) d["features_dir"] = cfg.data->features_dir->text;
    if (cfg.data->costs) d["costs"] = cfg.data->costs->text;
    j["data"] = d;
  }
  if (cfg.synth) {
    const SynthRun& s = *cfg.synth;
    Json planted;
    for (std::size_t p = 0; p < ParamVector::kSize; ++p) {
      planted[std::string(kParamNames[p])] = s.planted[p];
    }
    j["synth"] = {{"spec", synth::spec_to_json(s.spec)},
                  {"planted", planted},
                  {"variant", std::string(variant_name(s.variant))},
                  {"n_reps", s.n_reps},
                  {"recognition_per_category", s.recognition_per_category},
                  {"noise_trials", s.noise_trials},
                  {"features",
                   {{"channels", s.features.channels},
                    {"spatial", s.features.spatial},
                    {"sketches_per_category", s.features.sketches_per_category},
                    {"identity", s.features.identity},
                    {"noise", s.features.noise}}}};
  }
  return j;
}

// ---- synthetic world ----

namespace {

encoder::Dims synth_dims(encoder::Level level, const FeatureSettings& f) {
  if (level == encoder::Level::kHigh) return {f.channels, 1, 1};
  if (level == encoder::Level::kMid) return {std::max<std::size_t>(1, f.channels / 2), f.spatial, f.spatial};
  return {std::max<std::size_t>(1, f.channels / 4), 2 * f.spatial, 2 * f.spatial};
}

Json params_json(const ParamVector& p) {
  Json j;
  for (std::size_t i = 0; i < ParamVector::kSize; ++i) j[std::string(kParamNames[i])] = p[i];
  return j;
}

}  // namespace

void write_synthetic_world(const SynthRun& run, const fs::path& dir, std::uint64_t simulate_seed,
                           const std::vector<encoder::Level>& levels) {
  const synth::World world = synth::gen_world(run.spec);
  auto trials = synth::simulate_trials(world, run.planted, run.variant, run.n_reps, simulate_seed);
  // Trials preprocessing should discard: viewer errors and drawn text.
  for (int k = 0; k < run.noise_trials && !trials.empty(); ++k) {
    TrialRecord t = trials[static_cast<std::size_t>(k) % trials.size()];
    t.pair_id = "pair_noise";
    t.trial_index = k;
    if (k % 2 == 0) {
      t.viewer_correct = false;
    } else {
      t.has_text_annotation = true;
    }
    t.draw_time_s = 1000.0;
    trials.push_back(std::move(t));
  }
  auto recognition =
      synth::simulate_recognition(world, run.recognition_per_category, simulate_seed + 1);
  // Out-of-range response times that filtering removes.
  if (!recognition.empty()) {
    RecognitionTrial fast = recognition.front();
    fast.rt_ms = 400.0;
    fast.chosen = (fast.chosen + 1) % static_cast<int>(world.inventory.num_objects());
    RecognitionTrial slow = fast;
    slow.rt_ms = 45000.0;
    recognition.push_back(fast);
    recognition.push_back(slow);
  }

  io::write_json(dir / "spec.json", synth::spec_to_json(run.spec));
  io::write_json(dir / "inventory.json", corpus::inventory_to_json(world.inventory));
  corpus::write_trials_csv(dir / "trials.csv", trials, world.inventory);
  corpus::write_recognition_csv(dir / "recognition.csv", recognition, world.inventory);
  io::write_json(dir / "truth" / "correspondence.json",
                 corpus::correspondence_to_json(world.table, world.inventory));
  io::write_json(dir / "truth" / "costs.json", corpus::costs_to_json(world.costs, world.inventory));
  io::write_json(dir / "truth" / "planted.json",
                 {{"params", params_json(run.planted)},
                  {"variant", std::string(variant_name(run.variant))},
                  {"n_reps", run.n_reps},
                  {"seed", simulate_seed}});
  for (encoder::Level level : levels) {
    synth::FeatureSpec fs_spec;
    fs_spec.level = level;
    fs_spec.dims = synth_dims(level, run.features);
    fs_spec.sketches_per_category = run.features.sketches_per_category;
    fs_spec.identity = run.features.identity;
    fs_spec.noise = run.features.noise[static_cast<std::size_t>(level)];
    fs_spec.seed = run.spec.seed * 31 + static_cast<std::uint64_t>(level) + 7;
    encoder::write_feature_bank(dir, synth::gen_feature_bank(world, fs_spec), world.inventory);
  }
}

void stage_synth(const RunConfig& cfg) {
  if (!cfg.synth) return;
  std::vector<encoder::Level> levels;
  if (auto l = level_of(cfg.source)) levels.push_back(*l);
  write_synthetic_world(*cfg.synth, cfg.output_dir.resolved / "world", cfg.seeds.simulate, levels);
}

// ---- preprocessing ----

namespace {

Inventory load_inventory(const DataPaths& d) {
  if (!d.inventory) return Inventory::standard();
  return corpus::inventory_from_json(io::read_json(d.inventory->resolved));
}

fs::path table_path(const RunConfig& cfg, Source source) {
  return cfg.output_dir.resolved / ("correspondence_" + std::string(source_name(source)) + ".json");
}

}  // namespace

fs::path source_dir(const RunConfig& cfg, Source source) {
  return cfg.output_dir.resolved / std::string(source_name(source));
}

Corpus stage_preprocess(const RunConfig& cfg) {
  const DataPaths d = cfg.effective_data();
  Corpus c;
  c.inventory = load_inventory(d);
  const auto raw = corpus::read_trials_csv(d.trials.resolved, c.inventory);
  c.trials = corpus::filter_trials(raw);
  c.costs = d.costs ? corpus::costs_from_json(io::read_json(d.costs->resolved), c.inventory)
                    : corpus::estimate_costs(c.inventory, c.trials);
  c.splits = corpus::make_splits(c.inventory, c.trials, cfg.folds, cfg.seeds.split);
  const fs::path out = cfg.output_dir.resolved;
  io::write_json(out / "inventory.json", corpus::inventory_to_json(c.inventory));
  corpus::write_trials_csv(out / "trials_filtered.csv", c.trials, c.inventory);
  io::write_json(out / "costs.json", corpus::costs_to_json(c.costs, c.inventory));
  io::write_json(out / "splits.json", corpus::splits_to_json(c.splits));
  if (d.recognition) {
    const auto recog = corpus::filter_recognition(
        corpus::read_recognition_csv(d.recognition->resolved, c.inventory));
    io::write_json(table_path(cfg, Source::kHumanRecog),
                   corpus::correspondence_to_json(
                       corpus::estimate_correspondence(c.inventory, recog), c.inventory));
  }
  io::write_json(out / "preprocess_summary.json",
                 {{"raw_trials", raw.size()},
                  {"kept_trials", c.trials.size()},
                  {"grand_mean_cost", c.costs.mean()},
                  {"folds", cfg.folds}});
  return c;
}

Corpus load_corpus(const RunConfig& cfg) {
  const fs::path out = cfg.output_dir.resolved;
  if (!fs::exists(out / "splits.json")) {
    fail(ErrorKind::kIoError, "missing " + (out / "splits.json").string() + "; run preprocess first");
  }
  Corpus c;
  c.inventory = corpus::inventory_from_json(io::read_json(out / "inventory.json"));
  c.trials = corpus::read_trials_csv(out / "trials_filtered.csv", c.inventory);
  c.costs = corpus::costs_from_json(io::read_json(out / "costs.json"), c.inventory);
  c.splits = corpus::splits_from_json(io::read_json(out / "splits.json"));
  return c;
}

CorrespondenceTable load_table(const RunConfig& cfg, Source source, const Inventory& inventory) {
  const fs::path p = table_path(cfg, source);
  if (!fs::exists(p)) {
    fail(ErrorKind::kIoError, "missing correspondence table " + p.string());
  }
  return corpus::correspondence_from_json(io::read_json(p), inventory);
}

// ---- encoder ----

namespace {

fs::path encoder_dir(const RunConfig& cfg) { return cfg.output_dir.resolved / "encoder"; }

fs::path adaptor_path(const RunConfig& cfg, encoder::Level level, int fold) {
  return encoder_dir(cfg) /
         ("adaptor_" + std::string(encoder::level_name(level)) + "_" + std::to_string(fold) + ".json");
}

std::size_t hidden_for(const RunConfig& cfg, const encoder::FeatureBank& bank) {
  if (bank.dims() == encoder::default_dims(bank.level())) return encoder::default_hidden(bank.level());
  if (bank.level() == encoder::Level::kHigh) return cfg.encoder.hidden_high;
  // The high adaptor's parameter count is the budget for mid and low.
  const std::size_t high_channels =
      cfg.synth ? synth_dims(encoder::Level::kHigh, cfg.synth->features).channels
                : bank.dims().channels;
  const std::size_t target = encoder::param_count(encoder::Level::kHigh, {high_channels, 1, 1},
                                                  cfg.encoder.hidden_high);
  return encoder::solve_hidden(bank.level(), bank.dims(), target);
}

encoder::FeatureBank load_bank(const RunConfig& cfg, encoder::Level level,
                               const Inventory& inventory) {
  const DataPaths d = cfg.effective_data();
  if (!d.features_dir) fail(ErrorKind::kConfigError, "no features directory configured");
  return encoder::read_feature_bank(d.features_dir->resolved, level, inventory);
}

}  // namespace

void stage_train_encoder(const RunConfig& cfg, encoder::Level level) {
  const Corpus c = load_corpus(cfg);
  const CorrespondenceTable targets = load_table(cfg, Source::kHumanRecog, c.inventory);
  const encoder::FeatureBank bank = load_bank(cfg, level, c.inventory);
  const auto splits = encoder::make_image_splits(bank, cfg.folds, cfg.seeds.encoder);
  Json split_json = Json::array();
  for (const auto& s : splits) {
    split_json.push_back({{"fold", s.fold_id}, {"train", s.train}, {"val", s.val}, {"test", s.test}});
  }
  io::write_json(encoder_dir(cfg) / ("image_splits_" + std::string(encoder::level_name(level)) + ".json"),
                 split_json);
  for (const auto& s : splits) {
    encoder::TrainConfig tc = cfg.encoder.train;
    tc.hidden = hidden_for(cfg, bank);
    tc.seed = cfg.seeds.encoder + static_cast<std::uint64_t>(s.fold_id);
    const encoder::TrainResult r = encoder::train_adaptor(bank, targets, s.train, s.val, tc);
    io::write_json(adaptor_path(cfg, level, s.fold_id),
                   encoder::adaptor_to_json(
                       r.params, {{"fold", s.fold_id},
                                  {"seed", tc.seed},
                                  {"training",
                                   {{"best_epoch", r.best_epoch},
                                    {"val_loss", r.val_loss},
                                    {"train_loss", r.train_loss},
                                    {"val_top1", encoder::top1_accuracy(r.params, bank, s.val)},
                                    {"test_top1", encoder::top1_accuracy(r.params, bank, s.test)},
                                    {"learning_rate", tc.learning_rate},
                                    {"batch_size", tc.batch_size},
                                    {"epochs", tc.epochs},
                                    {"loss_scale", tc.loss_scale}}}}));
  }
}

CorrespondenceTable stage_score(const RunConfig& cfg, encoder::Level level) {
  const Corpus c = load_corpus(cfg);
  const encoder::FeatureBank bank = load_bank(cfg, level, c.inventory);
  const Json split_json = io::read_json(
      encoder_dir(cfg) / ("image_splits_" + std::string(encoder::level_name(level)) + ".json"));
  // Each fold's adaptor scores its held-out sketches; z-scoring is per fold.
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  for (const auto& s : split_json) {
    const int fold = s.at("fold").get<int>();
    const auto test = s.at("test").get<std::vector<std::string>>();
    const auto params = encoder::adaptor_from_json(io::read_json(adaptor_path(cfg, level, fold)));
    const auto norm = encoder::logistic_normalize(encoder::raw_scores(params, bank, test));
    ids.insert(ids.end(), test.begin(), test.end());
    rows.insert(rows.end(), norm.begin(), norm.end());
  }
  CorrespondenceTable table = encoder::aggregate_correspondence(
      bank, ids, rows, encoder::source_for(level), cfg.encoder.renormalize);
  io::write_json(table_path(cfg, encoder::source_for(level)),
                 corpus::correspondence_to_json(table, c.inventory));
  return table;
}

// ---- fit / compare / predict / report ----

namespace {

std::string stem(Variant v, int fold) {
  return std::string(variant_name(v)) + "_" + std::to_string(fold);
}

const SplitSet& fold_split(const Corpus& c, int fold) {
  for (const auto& s : c.splits) {
    if (s.fold_id == fold) return s;
  }
  fail(ErrorKind::kInvalidArgument, "no fold " + std::to_string(fold));
}

std::uint64_t fold_seed(std::uint64_t base, Variant v, int fold) {
  return base * 1000003ULL + static_cast<std::uint64_t>(v) * 101ULL + static_cast<std::uint64_t>(fold);
}

}  // namespace

void stage_fit(const RunConfig& cfg, Variant variant, Source source, int fold) {
  const Corpus c = load_corpus(cfg);
  const CorrespondenceTable table = load_table(cfg, source, c.inventory);
  const auto test = corpus::select(c.trials, fold_split(c, fold), Partition::kTest);
  const inference::PriorSpec prior = cfg.prior_spec();
  const inference::GridPosterior gp = inference::grid_loglik(table, c.costs, test, prior, variant);
  const fs::path dir = source_dir(cfg, source);
  io::write_json(dir / ("posterior_" + stem(variant, fold) + ".json"),
                 inference::posterior_to_json(
                     gp, {{"fold", fold},
                          {"source", std::string(source_name(source))},
                          {"n_trials", test.size()},
                          {"prior", cfg.prior},
                          {"mode", params_json(gp.mode())}}));
  inference::McmcConfig mc = cfg.mcmc;
  mc.seed = fold_seed(cfg.seeds.mcmc, variant, fold);
  const inference::McmcChain chain =
      inference::mcmc_sample(table, c.costs, test, prior, variant, mc);
  io::write_json(dir / ("chain_" + stem(variant, fold) + ".json"),
                 inference::chain_to_json(chain, {{"fold", fold},
                                                  {"source", std::string(source_name(source))}}));
}

Json stage_compare(const RunConfig& cfg, Source source) {
  const fs::path dir = source_dir(cfg, source);
  Json folds = Json::array();
  std::map<std::string, double> totals;
  for (int k = 0; k < cfg.folds; ++k) {
    Json entry = {{"fold", k}};
    std::map<Variant, inference::GridPosterior> gps;
    for (Variant v : cfg.variants) {
      const fs::path p = dir / ("posterior_" + stem(v, k) + ".json");
      gps.emplace(v, inference::posterior_from_json(io::read_json(p)));
      entry["marginal_loglik"][std::string(variant_name(v))] = inference::marginal_loglik(gps.at(v));
    }
    if (gps.contains(Variant::kPragmatic)) {
      const auto& full = gps.at(Variant::kPragmatic);
      for (Variant lesion : {Variant::kContextInsensitive, Variant::kCostInsensitive}) {
        const std::string name = "prag_vs_" + std::string(variant_name(lesion));
        const std::size_t param = *forced_param(lesion);
        const double sd = -inference::savage_dickey(full, param, 0.0);
        entry["savage_dickey"][name] = sd;
        totals["savage_dickey/" + name] += sd;
        if (gps.contains(lesion)) {
          const double bf = inference::bayes_factor(full, gps.at(lesion));
          entry["log_bf"][name] = bf;
          totals["log_bf/" + name] += bf;
        }
      }
    }
    folds.push_back(std::move(entry));
  }
  Json total = Json::object();
  for (const auto& [key, value] : totals) {
    const auto slash = key.find('/');
    total[key.substr(0, slash)][key.substr(slash + 1)] = value;
  }
  Json out = {{"source", std::string(source_name(source))}, {"folds", folds}, {"total", total}};
  io::write_json(dir / "compare.json", out);
  return out;
}

void stage_predict(const RunConfig& cfg, Variant variant, Source source, int fold) {
  const Corpus c = load_corpus(cfg);
  const CorrespondenceTable table = load_table(cfg, source, c.inventory);
  const auto test = corpus::select(c.trials, fold_split(c, fold), Partition::kTest);
  const fs::path dir = source_dir(cfg, source);
  const inference::McmcChain chain =
      inference::chain_from_json(io::read_json(dir / ("chain_" + stem(variant, fold) + ".json")));
  const auto other_mode = cfg.predict_mode == metrics::PredictMode::kAveragedDistribution
                              ? metrics::PredictMode::kPerSample
                              : metrics::PredictMode::kAveragedDistribution;
  const auto result =
      metrics::posterior_predict(chain, table, c.costs, test, variant, cfg.predict_mode, fold);
  const auto alt = metrics::posterior_predict(chain, table, c.costs, test, variant, other_mode, fold);
  const std::uint64_t seed = fold_seed(cfg.seeds.bootstrap, variant, fold);
  const auto est = metrics::fold_estimates(result, cfg.n_boot, seed);
  const auto alt_est = metrics::fold_estimates(alt, cfg.n_boot, seed);

  Json estimates = Json::object();
  Json divergence = Json::object();
  for (std::size_t i = 0; i < est.size(); ++i) {
    const std::string name(metrics::metric_name(est[i].first));
    estimates[name] = {{"mean", est[i].second.mean}, {"se", est[i].second.se}};
    divergence[name] = std::abs(est[i].second.mean - alt_est[i].second.mean);
  }
  Json trials = Json::array();
  Json contexts = Json::object();
  for (const auto& p : result.trials) {
    const std::string key = p.context.key();
    trials.push_back({{"context", key},
                      {"rank", p.rank},
                      {"congruent", p.congruent},
                      {"expected_cost", p.expected_cost}});
    if (!contexts.contains(key)) contexts[key] = p.probs;
  }
  io::write_json(dir / ("predict_" + stem(variant, fold) + ".json"),
                 {{"fold", fold},
                  {"variant", std::string(variant_name(variant))},
                  {"source", std::string(source_name(source))},
                  {"mode", cfg.predict_mode == metrics::PredictMode::kPerSample ? "per_sample"
                                                                                 : "averaged"},
                  {"estimates", estimates},
                  {"mode_divergence", divergence},
                  {"trials", trials},
                  {"distributions", contexts}});
}

Json stage_report(const RunConfig& cfg, Variant variant, Source source) {
  const Corpus c = load_corpus(cfg);
  const fs::path dir = source_dir(cfg, source);
  std::map<std::string, std::vector<metrics::Estimate>> per_metric;
  Json folds = Json::array();
  for (int k = 0; k < cfg.folds; ++k) {
    const Json p = io::read_json(dir / ("predict_" + stem(variant, k) + ".json"));
    folds.push_back({{"fold", k}, {"metrics", p.at("estimates")}});
    for (const auto& [name, e] : p.at("estimates").items()) {
      per_metric[name].push_back({e.at("mean").get<double>(), e.at("se").get<double>()});
    }
  }
  Json aggregate = Json::object();
  for (metrics::Metric m : metrics::kAllMetrics) {
    const std::string name(metrics::metric_name(m));
    if (!per_metric.contains(name)) continue;
    const auto s = metrics::ivw_aggregate(m, per_metric.at(name));
    aggregate[name] = {{"mean", s.mean},
                       {"se", s.se},
                       {"ci95_lo", s.mean - s.ci95_halfwidth},
                       {"ci95_hi", s.mean + s.ci95_halfwidth}};
  }
  Json out = {{"variant", std::string(variant_name(variant))},
              {"source", std::string(source_name(source))},
              {"folds", folds},
              {"aggregate", aggregate},
              {"grand_mean_cost", c.costs.mean()}};
  io::write_json(dir / ("report_" + std::string(variant_name(variant)) + "_" +
                        std::string(source_name(source)) + ".json"),
                 out);
  return out;
}

std::string report_csv(const RunConfig& cfg) {
  std::ostringstream csv;
  csv << "variant,source,metric,fold,mean,se,ci95_lo,ci95_hi\n";
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  const fs::path dir = source_dir(cfg, cfg.source);
  for (Variant v : cfg.variants) {
    const fs::path p = dir / ("report_" + std::string(variant_name(v)) + "_" +
                              std::string(source_name(cfg.source)) + ".json");
    if (!fs::exists(p)) continue;
    const Json r = io::read_json(p);
    const std::string prefix = r.at("variant").get<std::string>() + "," +
                               r.at("source").get<std::string>() + ",";
    for (const auto& f : r.at("folds")) {
      for (const auto& [name, e] : f.at("metrics").items()) {
        const double mean = e.at("mean").get<double>(), se = e.at("se").get<double>();
        csv << prefix << name << "," << f.at("fold").get<int>() << "," << num(mean) << ","
            << num(se) << "," << num(mean - metrics::kZ95 * se) << ","
            << num(mean + metrics::kZ95 * se) << "\n";
      }
    }
    for (const auto& [name, e] : r.at("aggregate").items()) {
      csv << prefix << name << ",all," << num(e.at("mean").get<double>()) << ","
          << num(e.at("se").get<double>()) << "," << num(e.at("ci95_lo").get<double>()) << ","
          << num(e.at("ci95_hi").get<double>()) << "\n";
    }
  }
  return csv.str();
}

// ---- full run ----

Json run_pipeline(const RunConfig& cfg) {
  stage_synth(cfg);
  const Corpus c = stage_preprocess(cfg);
  if (auto level = level_of(cfg.source)) {
    stage_train_encoder(cfg, *level);
    stage_score(cfg, *level);
  }
  for (Variant v : cfg.variants) {
    for (int k = 0; k < cfg.folds; ++k) stage_fit(cfg, v, cfg.source, k);
  }
  stage_compare(cfg, cfg.source);
  for (Variant v : cfg.variants) {
    for (int k = 0; k < cfg.folds; ++k) stage_predict(cfg, v, cfg.source, k);
    stage_report(cfg, v, cfg.source);
  }
  const fs::path out = cfg.output_dir.resolved;
  io::write_file_atomic(out / "report.csv", report_csv(cfg));

  Json inputs = Json::object();
  const DataPaths d = cfg.effective_data();
  auto hash_input = [&](const std::optional<PathRef>& p) {
    if (p && fs::is_regular_file(p->resolved)) inputs[p->text] = io::sha256_file(p->resolved);
  };
  if (cfg.config_file) {
    hash_input(PathRef{cfg.config_file->resolved.filename().string(), cfg.config_file->resolved});
  }
  hash_input(d.inventory);
  hash_input(PathRef(d.trials));
  hash_input(d.recognition);
  hash_input(d.costs);
  if (auto level = level_of(cfg.source); level && d.features_dir) {
    for (const char* ext : {".bin", ".json"}) {
      const std::string name = "features_" + std::string(encoder::level_name(*level)) + ext;
      hash_input(PathRef{d.features_dir->text + "/" + name, d.features_dir->resolved / name});
    }
  }
  Json outputs = Json::object();
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) outputs[fs::relative(f, out).generic_string()] = io::sha256_file(f);

  Json manifest = {{"version", std::string(kVersion)},
                   {"config", config_to_json(cfg)},
                   {"inputs", inputs},
                   {"outputs", outputs},
                   {"seeds", config_to_json(cfg).at("seeds")},
                   {"kept_trials", c.trials.size()}};
  io::write_json(out / "manifest.json", manifest);
  return manifest;
}

}  // namespace sketchprag::pipeline
