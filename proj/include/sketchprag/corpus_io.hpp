#pragma once

#include <filesystem>
#include <vector>

#include "sketchprag/corpus.hpp"
#include "sketchprag/io.hpp"

namespace sketchprag::corpus {

// trials.csv columns: pair_id, trial_index, target, d1, d2, d3, condition,
// draw_time_s, num_strokes, ink, viewer_correct, has_text, and an optional
// trailing `sketch` column ("<object>/<condition>") for sketchers that may
// draw a non-target object. Without it the sketch is the target's congruent
// category.
std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path,
                                         const Inventory& inventory);
void write_trials_csv(const std::filesystem::path& path,
                      std::span<const TrialRecord> trials,
                      const Inventory& inventory);

// recognition.csv columns: sketch_object, sketch_condition, chosen_object, rt_ms.
std::vector<RecognitionTrial> read_recognition_csv(
    const std::filesystem::path& path, const Inventory& inventory);
void write_recognition_csv(const std::filesystem::path& path,
                           std::span<const RecognitionTrial> trials,
                           const Inventory& inventory);

io::Json correspondence_to_json(const CorrespondenceTable& table,
                                const Inventory& inventory);
CorrespondenceTable correspondence_from_json(const io::Json& j,
                                             const Inventory& inventory);

io::Json costs_to_json(const CostVector& costs, const Inventory& inventory);
CostVector costs_from_json(const io::Json& j, const Inventory& inventory);

io::Json inventory_to_json(const Inventory& inventory);
Inventory inventory_from_json(const io::Json& j);

io::Json splits_to_json(std::span<const SplitSet> splits);
std::vector<SplitSet> splits_from_json(const io::Json& j);

}  // namespace sketchprag::corpus
