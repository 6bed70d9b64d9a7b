#include "sketchprag/encoder_io.hpp"

#include <bit>
#include <cstring>

#include "sketchprag/error.hpp"

namespace sketchprag::encoder {

namespace {

std::string bin_name(Level level) { return "features_" + std::string(level_name(level)) + ".bin"; }
std::string json_name(Level level) { return "features_" + std::string(level_name(level)) + ".json"; }

void put_f32(std::string& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

float get_f32(const std::string& in, std::size_t pos) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) {
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)]))
            << (8 * i);
  }
  return std::bit_cast<float>(bits);
}

}  // namespace

void write_feature_bank(const std::filesystem::path& dir, const FeatureBank& bank,
                        const Inventory& inventory) {
  const Dims& d = bank.dims();
  std::string bytes;
  bytes.reserve(bank.entries().size() * d.size() * 4);
  io::Json images = io::Json::array();
  for (const ImageEntry& e : bank.entries()) {
    io::Json img = {{"id", e.id},
                    {"offset", bytes.size()},
                    {"shape", {d.channels, d.height, d.width}}};
    if (e.kind == ImageKind::kSketch) {
      img["kind"] = "sketch";
      img["category"] = inventory.sketch_key(e.sketch);
    } else {
      img["kind"] = "object";
      img["category"] = inventory.object(e.object).label;
    }
    for (double v : bank.feature(e)) put_f32(bytes, static_cast<float>(v));
    images.push_back(std::move(img));
  }
  io::write_file_atomic(dir / bin_name(bank.level()), bytes);
  io::write_json(dir / json_name(bank.level()),
                 {{"level", std::string(level_name(bank.level()))},
                  {"dtype", "float32"},
                  {"endianness", "little"},
                  {"dims", {d.channels, d.height, d.width}},
                  {"num_objects", bank.num_objects()},
                  {"images", images}});
}

FeatureBank read_feature_bank(const std::filesystem::path& dir, Level level,
                              const Inventory& inventory) {
  const io::Json manifest = io::read_json(dir / json_name(level));
  const std::string bytes = io::read_file(dir / bin_name(level));
  try {
    const auto dims = manifest.at("dims").get<std::vector<std::size_t>>();
    if (dims.size() != 3) fail(ErrorKind::kShapeError, "feature dims must have 3 entries");
    const Dims d{dims[0], dims[1], dims[2]};
    FeatureBank bank(level, d, inventory.num_objects());
    std::vector<double> feat(d.size());
    for (const auto& img : manifest.at("images")) {
      const auto id = img.at("id").get<std::string>();
      if (img.at("shape").get<std::vector<std::size_t>>() != dims) {
        fail(ErrorKind::kShapeError, "image '" + id + "' does not share the bank dims");
      }
      const auto offset = img.at("offset").get<std::size_t>();
      if (offset + 4 * d.size() > bytes.size()) {
        fail(ErrorKind::kShapeError, "image '" + id + "' runs past the end of the feature file");
      }
      for (std::size_t i = 0; i < d.size(); ++i) feat[i] = get_f32(bytes, offset + 4 * i);
      const auto kind = img.at("kind").get<std::string>();
      const auto category = img.at("category").get<std::string>();
      if (kind == "sketch") {
        bank.add_sketch(id, inventory.parse_sketch_key(category), feat);
      } else if (kind == "object") {
        bank.add_object(id, inventory.parse_object(category), feat);
      } else {
        fail(ErrorKind::kParseError, "image '" + id + "' has unknown kind '" + kind + "'");
      }
    }
    return bank;
  } catch (const io::Json::exception& e) {
    fail(ErrorKind::kParseError, std::string("feature manifest: ") + e.what());
  }
}

io::Json adaptor_to_json(const AdaptorParams& params, const io::Json& meta) {
  const Layout& l = params.layout();
  io::Json j = {
      {"level", std::string(level_name(params.level()))},
      {"dims", {params.dims().channels, params.dims().height, params.dims().width}},
      {"hidden", params.hidden()},
      {"dropout", params.dropout()},
      {"param_count", params.size()},
      {"layout",
       {{"w1_sketch", l.w1_sketch},
        {"w1_object", l.w1_object},
        {"b1", l.b1},
        {"w2", l.w2},
        {"b2", l.b2},
        {"att_sketch", l.att_sketch},
        {"att_object", l.att_object}}},
      {"values", params.values()},
  };
  for (const auto& [k, v] : meta.items()) j[k] = v;
  return j;
}

AdaptorParams adaptor_from_json(const io::Json& j) {
  try {
    const auto dims = j.at("dims").get<std::vector<std::size_t>>();
    if (dims.size() != 3) fail(ErrorKind::kShapeError, "adaptor dims must have 3 entries");
    AdaptorParams p(parse_level(j.at("level").get<std::string>()), {dims[0], dims[1], dims[2]},
                    j.at("hidden").get<std::size_t>(), j.at("dropout").get<double>());
    auto values = j.at("values").get<std::vector<double>>();
    if (values.size() != p.size()) {
      fail(ErrorKind::kShapeError, "adaptor has " + std::to_string(values.size()) +
                                       " values, expected " + std::to_string(p.size()));
    }
    p.values() = std::move(values);
    return p;
  } catch (const io::Json::exception& e) {
    fail(ErrorKind::kParseError, std::string("adaptor json: ") + e.what());
  }
}

}  // namespace sketchprag::encoder
