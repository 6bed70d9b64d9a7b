#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace sketchprag::io {

using Json = nlohmann::json;

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file, then renames over the destination.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

Json read_json(const std::filesystem::path& path);
// Two-space indented, keys sorted, trailing newline; byte-stable for equal
// inputs.
void write_json(const std::filesystem::path& path, const Json& value);
std::string dump_json(const Json& value);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace sketchprag::io
