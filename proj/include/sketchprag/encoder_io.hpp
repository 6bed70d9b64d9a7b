#pragma once

#include <filesystem>

#include "sketchprag/corpus.hpp"
#include "sketchprag/encoder.hpp"
#include "sketchprag/io.hpp"

namespace sketchprag::encoder {

// features_{level}.bin holds little-endian float32 tensors back to back;
// features_{level}.json maps image ids to byte offsets, shapes, and the
// sketch category or object label each image belongs to.
void write_feature_bank(const std::filesystem::path& dir, const FeatureBank& bank,
                        const Inventory& inventory);
FeatureBank read_feature_bank(const std::filesystem::path& dir, Level level,
                              const Inventory& inventory);

io::Json adaptor_to_json(const AdaptorParams& params, const io::Json& meta = io::Json::object());
AdaptorParams adaptor_from_json(const io::Json& j);

}  // namespace sketchprag::encoder
