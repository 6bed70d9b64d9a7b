#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sys/wait.h>

#include "sketchprag/io.hpp"
#include "sketchprag/pipeline.hpp"
#include "support.hpp"

using namespace sketchprag;
using sketchprag::io::Json;
using sketchprag::testing::TempDir;
namespace fs = std::filesystem;
namespace pl = sketchprag::pipeline;

namespace {

Json tiny_config() {
  return Json::parse(R"({
    "synth": {"spec": {"seed": 3}, "planted": {"w_i": 3, "w_c": 1, "w_d": 0.8, "alpha": 5},
              "n_reps": 3},
    "grid": {"points": 5, "prior": "unit_wd"},
    "mcmc": {"n_samples": 100, "burn_in": 100},
    "bootstrap": {"n_boot": 50},
    "seeds": {"split": 1, "mcmc": 2, "bootstrap": 3, "simulate": 4},
    "output_dir": "out"
  })");
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  const std::string cmd = std::string(SKETCHPRAG_CLI_PATH) + " " + args + " > " + out.string() +
                          " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = io::read_file(out);
  r.err = io::read_file(err);
  return r;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = io::read_file(e.path());
  }
  return files;
}

}  // namespace

TEST_CASE("minimal config resolves with defaults") {
  Json j = tiny_config();
  j.erase("grid");
  j.erase("mcmc");
  j.erase("bootstrap");
  const auto r = pl::validate_config(j, "/tmp");
  REQUIRE(r.config);
  CHECK(r.violations.empty());
  CHECK(r.config->folds == 5);
  CHECK(r.config->grid_points == 21);
  CHECK(r.config->mcmc.n_samples == 1000);
  CHECK(r.config->mcmc.burn_in == 3000);
  CHECK(r.config->n_boot == 1000);
  CHECK(r.config->variants.size() == 3);
  CHECK(r.config->output_dir.resolved == fs::path("/tmp/out"));
  const Json resolved = pl::config_to_json(*r.config);
  CHECK(resolved.at("folds") == 5);
}

TEST_CASE("config violations are all reported") {
  Json j = tiny_config();
  j["grid"]["points"] = -3;
  auto r = pl::validate_config(j, ".");
  CHECK_FALSE(r.config);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].find("grid.points") != std::string::npos);

  j["folds"] = 1;
  j["seeds"].erase("mcmc");
  j["surprise"] = true;
  r = pl::validate_config(j, ".");
  CHECK(r.violations.size() == 4);
  std::string all;
  for (const auto& v : r.violations) all += v + "\n";
  CHECK(all.find("folds") != std::string::npos);
  CHECK(all.find("seeds.mcmc") != std::string::npos);
  CHECK(all.find("surprise") != std::string::npos);

  Json enc = tiny_config();
  enc["source"] = "high";
  r = pl::validate_config(enc, ".");
  CHECK_FALSE(r.config);
  CHECK(r.violations[0].find("seeds.encoder") != std::string::npos);
}

TEST_CASE("CLI reports missing data files with exit code 2") {
  TempDir dir("cli_missing");
  Json j = tiny_config();
  j.erase("synth");
  j["data"] = {{"trials", "nowhere/trials.csv"}, {"recognition", "nowhere/recognition.csv"}};
  io::write_json(dir.path() / "cfg.json", j);
  const auto r = run_cli("run --config " + (dir.path() / "cfg.json").string(), dir.path());
  CHECK(r.code == 2);
  const Json err = Json::parse(r.err);
  CHECK(err.at("error") == "ConfigError");
  REQUIRE(err.contains("paths"));
  CHECK(err.at("paths").dump().find("nowhere/trials.csv") != std::string::npos);

  const auto missing = run_cli("validate-config " + (dir.path() / "absent.json").string(), dir.path());
  CHECK(missing.code == 2);
  CHECK(Json::parse(missing.err).at("path").get<std::string>().find("absent.json") != std::string::npos);

  const auto usage = run_cli("fit", dir.path());
  CHECK(usage.code == 2);
  const auto version = run_cli("--version", dir.path());
  CHECK(version.code == 0);
  CHECK(version.out.find(std::string(pl::kVersion)) != std::string::npos);
}

TEST_CASE("pipeline reruns are byte-identical and compare handles identical posteriors") {
  TempDir dir("pipeline_rerun");
  io::write_json(dir.path() / "cfg.json", tiny_config());
  const auto first = run_cli("run --config " + (dir.path() / "cfg.json").string(), dir.path());
  REQUIRE(first.code == 0);
  const fs::path out = dir.path() / "out";
  const auto before = snapshot(out);
  CHECK(before.count("manifest.json") == 1);
  CHECK(before.count("report.csv") == 1);
  CHECK(before.count("humanrecog/compare.json") == 1);

  const auto second = run_cli("run --config " + (dir.path() / "cfg.json").string(), dir.path());
  REQUIRE(second.code == 0);
  const auto after = snapshot(out);
  CHECK(after.size() == before.size());
  for (const auto& [name, bytes] : before) {
    CAPTURE(name);
    CHECK(after.at(name) == bytes);
  }

  const Json manifest = Json::parse(before.at("manifest.json"));
  CHECK(manifest.at("version") == std::string(pl::kVersion));
  CHECK(manifest.at("outputs").contains("humanrecog/compare.json"));

  // Replace the lesion posteriors with the full model's: both log BFs are 0.
  for (int k = 0; k < 5; ++k) {
    const std::string fold = std::to_string(k);
    fs::copy_file(out / "humanrecog" / ("posterior_prag_" + fold + ".json"),
                  out / "humanrecog" / ("posterior_sim_" + fold + ".json"),
                  fs::copy_options::overwrite_existing);
  }
  const auto cmp = run_cli("compare --config " + (dir.path() / "cfg.json").string(), dir.path());
  REQUIRE(cmp.code == 0);
  const Json total = Json::parse(cmp.out);
  CHECK(total.at("log_bf").at("prag_vs_sim").get<double>() == 0.0);

  const auto csv = run_cli("report --emit csv --variant prag --config " + (dir.path() / "cfg.json").string(),
                           dir.path());
  CHECK(csv.code == 0);
  CHECK(csv.out.rfind("variant,source,metric,fold,mean,se,ci95_lo,ci95_hi", 0) == 0);
}

TEST_CASE("input hashes track input bytes") {
  TempDir dir("pipeline_hash");
  const fs::path world = dir.path() / "world";
  pl::SynthRun run;
  run.n_reps = 3;
  pl::write_synthetic_world(run, world, 4, {});

  Json j = tiny_config();
  j.erase("synth");
  j["seeds"].erase("simulate");
  j["data"] = {{"inventory", "world/inventory.json"},
               {"trials", "world/trials.csv"},
               {"recognition", "world/recognition.csv"},
               {"costs", "world/truth/costs.json"}};
  io::write_json(dir.path() / "cfg.json", j);
  auto cfg = pl::validate_config_file(dir.path() / "cfg.json");
  REQUIRE(cfg.config);
  const Json m1 = pl::run_pipeline(*cfg.config);

  // Flip one byte of the recognition file: a 7 becomes an 8 somewhere in an rt.
  std::string rec = io::read_file(world / "recognition.csv");
  const auto pos = rec.find_last_of("1234567");
  REQUIRE(pos != std::string::npos);
  rec[pos] = static_cast<char>(rec[pos] + 1);
  io::write_file_atomic(world / "recognition.csv", rec);
  const Json m2 = pl::run_pipeline(*cfg.config);
  CHECK(m1.at("inputs").at("world/recognition.csv") != m2.at("inputs").at("world/recognition.csv"));
  CHECK(m1.at("inputs").at("world/trials.csv") == m2.at("inputs").at("world/trials.csv"));
}
