#pragma once

// Run configuration and the pipeline stages behind the command-line tool.
// Every stage reads its inputs from and writes its artifacts to the run's
// output directory, so stages can be invoked one at a time or all at once.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sketchprag/corpus.hpp"
#include "sketchprag/encoder.hpp"
#include "sketchprag/inference.hpp"
#include "sketchprag/io.hpp"
#include "sketchprag/metrics.hpp"
#include "sketchprag/synth.hpp"

namespace sketchprag::pipeline {

inline constexpr std::string_view kVersion = "0.1.0";

// A config path as written and as resolved against the config's directory.
struct PathRef {
  std::string text;
  std::filesystem::path resolved;
};

struct DataPaths {
  std::optional<PathRef> inventory;  // standard inventory when absent
  PathRef trials;
  std::optional<PathRef> recognition;
  std::optional<PathRef> features_dir;
  // Precomputed costs.json; estimated from draw times when absent.
  std::optional<PathRef> costs;
};

struct FeatureSettings {
  std::size_t channels = 16;
  std::size_t spatial = 4;  // height = width for mid/low maps
  int sketches_per_category = 4;
  double identity = 1.0;
  // Per level: high, mid, low.
  std::array<double, 3> noise = {0.3, 0.8, 1.6};
};

struct SynthRun {
  synth::SynthSpec spec;
  ParamVector planted{1.0, 1.0, 0.5, 5.0};
  Variant variant = Variant::kPragmatic;
  int n_reps = 4;
  int recognition_per_category = 40;
  // Extra incorrect and text-annotated trials that preprocessing must drop.
  int noise_trials = 8;
  FeatureSettings features;
};

struct Seeds {
  std::uint64_t split = 0;
  std::uint64_t mcmc = 0;
  std::uint64_t bootstrap = 0;
  std::uint64_t encoder = 0;
  std::uint64_t simulate = 0;
};

struct EncoderSettings {
  encoder::TrainConfig train;
  // Penultimate width of the high adaptor at non-default dims; mid and low
  // widths are solved to match its parameter count.
  std::size_t hidden_high = 32;
  bool renormalize = true;
};

struct RunConfig {
  std::optional<PathRef> config_file;
  std::optional<DataPaths> data;
  std::optional<SynthRun> synth;
  Source source = Source::kHumanRecog;
  std::vector<Variant> variants = {Variant::kPragmatic, Variant::kContextInsensitive,
                                   Variant::kCostInsensitive};
  int folds = 5;
  int grid_points = 21;
  std::string prior = "wide";  // or "unit_wd"
  inference::McmcConfig mcmc;
  int n_boot = 1000;
  metrics::PredictMode predict_mode = metrics::PredictMode::kAveragedDistribution;
  Seeds seeds;
  EncoderSettings encoder;
  PathRef output_dir{"out", "out"};

  inference::PriorSpec prior_spec() const;
  // Data paths after synthetic generation has been accounted for.
  DataPaths effective_data() const;
};

struct ConfigResult {
  std::optional<RunConfig> config;
  std::vector<std::string> violations;
};

// Collects every violation rather than stopping at the first.
ConfigResult validate_config(const io::Json& j, const std::filesystem::path& base_dir);
// Throws ConfigError when the file is missing or not JSON.
ConfigResult validate_config_file(const std::filesystem::path& path);
io::Json config_to_json(const RunConfig& cfg);

std::optional<encoder::Level> level_of(Source s);

// Writes spec.json, inventory.json, trials.csv, recognition.csv, the
// requested feature banks, and truth/ (correspondence, costs, planted
// parameters) into dir.
void write_synthetic_world(const SynthRun& run, const std::filesystem::path& dir,
                           std::uint64_t simulate_seed,
                           const std::vector<encoder::Level>& levels);

struct Corpus {
  Inventory inventory = Inventory::standard();
  std::vector<TrialRecord> trials;  // filtered
  CostVector costs;
  std::vector<SplitSet> splits;
};

void stage_synth(const RunConfig& cfg);
Corpus stage_preprocess(const RunConfig& cfg);
Corpus load_corpus(const RunConfig& cfg);
CorrespondenceTable load_table(const RunConfig& cfg, Source source, const Inventory& inventory);

void stage_train_encoder(const RunConfig& cfg, encoder::Level level);
CorrespondenceTable stage_score(const RunConfig& cfg, encoder::Level level);
void stage_fit(const RunConfig& cfg, Variant variant, Source source, int fold);
io::Json stage_compare(const RunConfig& cfg, Source source);
void stage_predict(const RunConfig& cfg, Variant variant, Source source, int fold);
io::Json stage_report(const RunConfig& cfg, Variant variant, Source source);
// report.csv over every report json present for the configured source.
std::string report_csv(const RunConfig& cfg);

// All stages in order, then manifest.json with input and output hashes.
io::Json run_pipeline(const RunConfig& cfg);

std::filesystem::path source_dir(const RunConfig& cfg, Source source);

}  // namespace sketchprag::pipeline
