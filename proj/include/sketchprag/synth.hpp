#pragma once

// Synthetic worlds with planted parameters, trial simulation from any model
// variant, synthetic feature banks, and a brute-force grid oracle that shares
// no code with the inference module.

#include <cstdint>
#include <span>
#include <vector>

#include "sketchprag/corpus.hpp"
#include "sketchprag/encoder.hpp"
#include "sketchprag/inference.hpp"
#include "sketchprag/io.hpp"
#include "sketchprag/rsa.hpp"

namespace sketchprag::synth {

struct SynthSpec {
  int n_categories = 4;
  int n_objects_per_category = 8;
  // Row logits: own object, other objects of the same category, others 0.
  double target_strength = 3.0;
  double within_category_similarity = 1.5;
  // Added to the own-object logit of close sketches only.
  double detail_bonus = 1.0;
  // Raw cost of close sketches minus far sketches, before min-max scaling.
  double cost_gap = 0.5;
  // Spread of per-object base costs.
  double cost_spread = 0.0;
  // s.d. of Gaussian noise on logits and raw costs.
  double noise = 0.1;
  // Number of context sets; each object is a target once per condition per set.
  int n_sets = 1;
  std::uint64_t seed = 0;

  // Throws SpecError naming every violation.
  void validate() const;
};

io::Json spec_to_json(const SynthSpec& spec);
SynthSpec spec_from_json(const io::Json& j);

struct World {
  SynthSpec spec;
  Inventory inventory = Inventory::uniform(1, 1);
  CorrespondenceTable table;
  CostVector costs;
  std::vector<Context> contexts;
};

World gen_world(const SynthSpec& spec);

// One trial per context per rep; pair ids are "pair_<rep>".
std::vector<TrialRecord> simulate_trials(const World& world, ParamVector params, Variant variant,
                                         int n_reps, std::uint64_t seed,
                                         const rsa::RsaOptions& opts = {});

// Each sketch category shown n_per_category times; the chosen object is drawn
// from the category's correspondence row.
std::vector<RecognitionTrial> simulate_recognition(const World& world, int n_per_category,
                                                   std::uint64_t seed);

struct FeatureSpec {
  encoder::Level level = encoder::Level::kHigh;
  encoder::Dims dims{16, 1, 1};
  int sketches_per_category = 4;
  // Weight of the depicted object's prototype in a sketch feature.
  double identity = 1.0;
  double noise = 0.3;
  std::uint64_t seed = 0;
};

// Objects get random prototypes; a sketch is identity * prototype of its
// object plus Gaussian noise. Spatial maps carry the prototype on a fixed
// random spatial pattern. Sketch ids are "<object>_<cond>_<k>".
encoder::FeatureBank gen_feature_bank(const World& world, const FeatureSpec& spec);

inline constexpr std::size_t kOracleMaxPoints = 10000;

// Naive per-trial, per-grid-point log-likelihood. Throws OracleTooLarge past
// kOracleMaxPoints. With no trials the posterior equals the prior.
inference::GridPosterior exhaustive_posterior(const CorrespondenceTable& table,
                                              const CostVector& costs,
                                              std::span<const TrialRecord> trials,
                                              const inference::PriorSpec& prior, Variant variant,
                                              double log_floor = 1e-12);

}  // namespace sketchprag::synth
