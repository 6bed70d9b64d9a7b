// sketchprag: command-line driver for the sketch-production pipeline.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
// Failures print one JSON object on stderr.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sketchprag/encoder.hpp"
#include "sketchprag/error.hpp"
#include "sketchprag/io.hpp"
#include "sketchprag/pipeline.hpp"
#include "sketchprag/synth.hpp"

namespace fs = std::filesystem;
using sketchprag::io::Json;
namespace pl = sketchprag::pipeline;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageFailure {
  Json body;
};

int report_error(const Json& body, int code) {
  std::cerr << body.dump() << "\n";
  return code;
}

struct CommonOptions {
  std::string config;
  std::string output_dir;
  std::string source;
  int grid = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_source) {
  cmd->add_option("--config", o.config, "Run configuration JSON")->required();
  cmd->add_option("--output-dir", o.output_dir, "Override output_dir");
  if (with_source) {
    cmd->add_option("--source", o.source, "Override source: humanrecog|high|mid|low");
  }
}

// Applies flag overrides to the raw JSON so they go through validation too.
pl::RunConfig load_config(const CommonOptions& o) {
  const fs::path path(o.config);
  if (!fs::exists(path)) {
    throw UsageFailure{{{"error", "ConfigError"},
                        {"message", "config file not found"},
                        {"path", path.string()}}};
  }
  Json j;
  try {
    j = Json::parse(sketchprag::io::read_file(path));
  } catch (const Json::exception& e) {
    throw UsageFailure{{{"error", "ConfigError"},
                        {"message", std::string("config is not valid JSON: ") + e.what()},
                        {"path", path.string()}}};
  }
  if (j.is_object()) {
    if (!o.output_dir.empty()) j["output_dir"] = o.output_dir;
    if (!o.source.empty()) j["source"] = o.source;
    if (o.grid != 0) j["grid"]["points"] = o.grid;
  }
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  pl::ConfigResult r = pl::validate_config(j, base);
  if (!r.config) {
    Json paths = Json::array();
    const std::string marker = "file not found: ";
    for (const auto& v : r.violations) {
      if (const auto pos = v.find(marker); pos != std::string::npos) {
        paths.push_back(v.substr(pos + marker.size()));
      }
    }
    Json body = {{"error", "ConfigError"},
                 {"message", "invalid configuration"},
                 {"config", path.string()},
                 {"violations", r.violations}};
    if (!paths.empty()) body["paths"] = paths;
    throw UsageFailure{body};
  }
  r.config->config_file = pl::PathRef{path.string(), path};
  return *r.config;
}

template <class T, class Parse>
T parse_flag(const std::string& flag, const std::string& text, Parse parse) {
  try {
    return parse(text);
  } catch (const sketchprag::Error& e) {
    throw UsageFailure{{{"error", "ConfigError"}, {"message", flag + ": " + e.what()}}};
  }
}

sketchprag::Variant variant_flag(const std::string& text) {
  return parse_flag<sketchprag::Variant>("--variant", text,
                                         [](const std::string& t) { return sketchprag::parse_variant(t); });
}

sketchprag::Source source_flag(const pl::RunConfig& cfg, const std::string& text) {
  if (text.empty()) return cfg.source;
  return parse_flag<sketchprag::Source>("--source", text,
                                        [](const std::string& t) { return sketchprag::parse_source(t); });
}

sketchprag::encoder::Level level_flag(const std::string& text) {
  return parse_flag<sketchprag::encoder::Level>(
      "--level", text, [](const std::string& t) { return sketchprag::encoder::parse_level(t); });
}

void check_fold(const pl::RunConfig& cfg, int fold) {
  if (fold < 0 || fold >= cfg.folds) {
    throw UsageFailure{{{"error", "ConfigError"},
                        {"message", "--fold must lie in [0, " + std::to_string(cfg.folds) + ")"}}};
  }
}

bool is_usage_kind(sketchprag::ErrorKind k) {
  using sketchprag::ErrorKind;
  return k == ErrorKind::kConfigError || k == ErrorKind::kSpecError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pragmatic sketch-production models: fitting, comparison, and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pl::kVersion));

  CommonOptions common;
  std::string variant_text = "prag";
  std::string level_text = "high";
  std::string emit = "json";
  int fold = 0;

  auto* validate = app.add_subcommand("validate-config", "Check a config and print it resolved");
  std::string validate_path;
  validate->add_option("path", validate_path, "Config JSON")->required();

  auto* run = app.add_subcommand("run", "Run every stage and write manifest.json");
  add_common(run, common, true);
  run->add_option("--grid", common.grid, "Override grid points per axis");

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic world in corpus formats");
  std::string spec_path, out_dir, planted_text, levels_text;
  std::string synth_variant = "prag";
  int n_reps = 4;
  std::uint64_t sim_seed = 0;
  synth_cmd->add_option("--spec", spec_path, "SynthSpec JSON")->required();
  synth_cmd->add_option("--out", out_dir, "Output directory")->required();
  synth_cmd->add_option("--planted", planted_text, "w_i,w_c,w_d,alpha (default 1,1,0.5,5)");
  synth_cmd->add_option("--variant", synth_variant, "Generating variant: prag|sim|nocost");
  synth_cmd->add_option("--n-reps", n_reps, "Trials per context")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", sim_seed, "Simulation seed");
  synth_cmd->add_option("--levels", levels_text, "Feature banks to write, e.g. high,mid,low");

  auto* preprocess = app.add_subcommand("preprocess", "Filter trials, estimate costs and table, split folds");
  add_common(preprocess, common, false);

  auto* train = app.add_subcommand("train-encoder", "Train one adaptor per fold");
  add_common(train, common, false);
  train->add_option("--level", level_text, "high|mid|low");

  auto* score = app.add_subcommand("score", "Score held-out sketches into a correspondence table");
  add_common(score, common, false);
  score->add_option("--level", level_text, "high|mid|low");

  auto* fit = app.add_subcommand("fit", "Grid posterior and MCMC chain for one fold");
  add_common(fit, common, true);
  fit->add_option("--variant", variant_text, "prag|sim|nocost");
  fit->add_option("--fold", fold, "Fold index")->required();
  fit->add_option("--grid", common.grid, "Override grid points per axis");

  auto* compare = app.add_subcommand("compare", "Bayes factors and Savage-Dickey ratios");
  add_common(compare, common, true);

  auto* predict = app.add_subcommand("predict", "Posterior-predictive metrics for one fold");
  add_common(predict, common, true);
  predict->add_option("--variant", variant_text, "prag|sim|nocost");
  predict->add_option("--fold", fold, "Fold index")->required();

  auto* report = app.add_subcommand("report", "Aggregate fold metrics");
  add_common(report, common, true);
  report->add_option("--variant", variant_text, "prag|sim|nocost");
  report->add_option("--emit", emit, "json|csv")->check(CLI::IsMember({"json", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (validate->parsed()) {
      CommonOptions o;
      o.config = validate_path;
      std::cout << sketchprag::io::dump_json(pl::config_to_json(load_config(o)));
      return 0;
    }
    if (synth_cmd->parsed()) {
      pl::SynthRun r;
      r.spec = sketchprag::synth::spec_from_json(sketchprag::io::read_json(spec_path));
      r.variant = variant_flag(synth_variant);
      r.n_reps = n_reps;
      if (!planted_text.empty()) {
        std::stringstream ss(planted_text);
        std::string item;
        std::size_t i = 0;
        while (std::getline(ss, item, ',') && i < 4) r.planted[i++] = std::stod(item);
        if (i != 4) throw UsageFailure{{{"error", "ConfigError"}, {"message", "--planted needs 4 values"}}};
      }
      std::vector<sketchprag::encoder::Level> levels;
      std::stringstream ls(levels_text);
      std::string item;
      while (std::getline(ls, item, ',')) {
        if (!item.empty()) levels.push_back(level_flag(item));
      }
      pl::write_synthetic_world(r, out_dir, sim_seed, levels);
      return 0;
    }

    const pl::RunConfig cfg = load_config(common);
    if (run->parsed()) {
      const Json manifest = pl::run_pipeline(cfg);
      std::cout << sketchprag::io::dump_json(
          {{"manifest", (cfg.output_dir.resolved / "manifest.json").string()},
           {"outputs", manifest.at("outputs").size()}});
    } else if (preprocess->parsed()) {
      pl::stage_synth(cfg);
      const pl::Corpus c = pl::stage_preprocess(cfg);
      std::cout << sketchprag::io::dump_json(
          {{"kept_trials", c.trials.size()}, {"folds", c.splits.size()}});
    } else if (train->parsed()) {
      pl::stage_train_encoder(cfg, level_flag(level_text));
    } else if (score->parsed()) {
      const auto table = pl::stage_score(cfg, level_flag(level_text));
      std::cout << sketchprag::io::dump_json({{"max_row_sum_error", table.max_row_sum_error()}});
    } else if (fit->parsed()) {
      check_fold(cfg, fold);
      pl::stage_fit(cfg, variant_flag(variant_text), source_flag(cfg, common.source), fold);
    } else if (compare->parsed()) {
      std::cout << sketchprag::io::dump_json(
          pl::stage_compare(cfg, source_flag(cfg, common.source)).at("total"));
    } else if (predict->parsed()) {
      check_fold(cfg, fold);
      pl::stage_predict(cfg, variant_flag(variant_text), source_flag(cfg, common.source), fold);
    } else if (report->parsed()) {
      const Json r = pl::stage_report(cfg, variant_flag(variant_text), source_flag(cfg, common.source));
      if (emit == "csv") {
        const std::string csv = pl::report_csv(cfg);
        sketchprag::io::write_file_atomic(cfg.output_dir.resolved / "report.csv", csv);
        std::cout << csv;
      } else {
        std::cout << sketchprag::io::dump_json(r);
      }
    }
    return 0;
  } catch (const UsageFailure& u) {
    return report_error(u.body, kExitUsage);
  } catch (const sketchprag::Error& e) {
    const Json body = {{"error", std::string(sketchprag::error_kind_name(e.kind()))},
                       {"message", e.what()}};
    return report_error(body, is_usage_kind(e.kind()) ? kExitUsage : kExitRuntime);
  } catch (const std::exception& e) {
    return report_error({{"error", "RuntimeError"}, {"message", e.what()}}, kExitRuntime);
  }
}
