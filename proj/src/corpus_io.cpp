#include "sketchprag/corpus_io.hpp"

#include <charconv>
#include <map>
#include <sstream>

#include "sketchprag/error.hpp"

namespace sketchprag::corpus {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string_view cell = line.substr(start, comma == std::string_view::npos
                                                   ? std::string_view::npos
                                                   : comma - start);
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.remove_suffix(1);
    while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
    out.emplace_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

class CsvTable {
 public:
  CsvTable(const fs::path& path, std::initializer_list<std::string_view> required)
      : path_(path) {
    std::istringstream in(io::read_file(path));
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::kParseError, path.string() + ": empty file");
    const auto header = split_csv_line(line);
    for (std::size_t i = 0; i < header.size(); ++i) columns_[header[i]] = i;
    for (std::string_view name : required) {
      if (!columns_.contains(std::string(name))) {
        fail(ErrorKind::kParseError,
             path.string() + ": missing column '" + std::string(name) + "'");
      }
    }
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      rows_.push_back(split_csv_line(line));
      if (rows_.back().size() != header.size()) {
        fail(ErrorKind::kParseError, path.string() + ": row " +
                                         std::to_string(rows_.size()) +
                                         " has the wrong number of fields");
      }
    }
  }

  std::size_t size() const { return rows_.size(); }
  bool has(std::string_view col) const { return columns_.contains(std::string(col)); }

  const std::string& cell(std::size_t row, std::string_view col) const {
    return rows_[row][columns_.at(std::string(col))];
  }

  double number(std::size_t row, std::string_view col) const {
    const std::string& s = cell(row, col);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      fail(ErrorKind::kParseError, path_.string() + ": bad number '" + s + "' in " +
                                       std::string(col));
    }
    return v;
  }

  int integer(std::size_t row, std::string_view col) const {
    const std::string& s = cell(row, col);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      fail(ErrorKind::kParseError, path_.string() + ": bad integer '" + s + "' in " +
                                       std::string(col));
    }
    return v;
  }

  bool boolean(std::size_t row, std::string_view col) const {
    const std::string& s = cell(row, col);
    if (s == "true" || s == "True" || s == "1") return true;
    if (s == "false" || s == "False" || s == "0") return false;
    fail(ErrorKind::kParseError, path_.string() + ": bad boolean '" + s + "'");
  }

 private:
  fs::path path_;
  std::map<std::string, std::size_t> columns_;
  std::vector<std::vector<std::string>> rows_;
};

std::string fmt_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<TrialRecord> read_trials_csv(const fs::path& path,
                                         const Inventory& inventory) {
  CsvTable csv(path, {"pair_id", "trial_index", "target", "d1", "d2", "d3",
                      "condition", "draw_time_s", "num_strokes", "ink",
                      "viewer_correct", "has_text"});
  std::vector<TrialRecord> out;
  out.reserve(csv.size());
  for (std::size_t r = 0; r < csv.size(); ++r) {
    TrialRecord t;
    t.pair_id = csv.cell(r, "pair_id");
    t.trial_index = csv.integer(r, "trial_index");
    t.context.target = inventory.parse_object(csv.cell(r, "target"));
    t.context.distractors = {inventory.parse_object(csv.cell(r, "d1")),
                             inventory.parse_object(csv.cell(r, "d2")),
                             inventory.parse_object(csv.cell(r, "d3"))};
    t.context.condition = parse_condition(csv.cell(r, "condition"));
    validate_context(inventory, t.context);
    t.sketch = t.context.congruent();
    if (csv.has("sketch") && !csv.cell(r, "sketch").empty()) {
      t.sketch = inventory.parse_sketch_key(csv.cell(r, "sketch"));
    }
    t.draw_time_s = csv.number(r, "draw_time_s");
    if (!(t.draw_time_s > 0.0)) {
      fail(ErrorKind::kParseError, path.string() + ": draw_time_s must be positive");
    }
    t.num_strokes = csv.integer(r, "num_strokes");
    t.ink = csv.number(r, "ink");
    t.viewer_correct = csv.boolean(r, "viewer_correct");
    t.has_text_annotation = csv.boolean(r, "has_text");
    out.push_back(std::move(t));
  }
  return out;
}

void write_trials_csv(const fs::path& path, std::span<const TrialRecord> trials,
                      const Inventory& inventory) {
  std::string s =
      "pair_id,trial_index,target,d1,d2,d3,condition,draw_time_s,num_strokes,ink,"
      "viewer_correct,has_text,sketch\n";
  for (const TrialRecord& t : trials) {
    const auto label = [&](int id) { return inventory.object(id).label; };
    s += t.pair_id + "," + std::to_string(t.trial_index) + "," + label(t.context.target) +
         "," + label(t.context.distractors[0]) + "," + label(t.context.distractors[1]) +
         "," + label(t.context.distractors[2]) + "," +
         std::string(condition_name(t.context.condition)) + "," +
         fmt_double(t.draw_time_s) + "," + std::to_string(t.num_strokes) + "," +
         fmt_double(t.ink) + "," + (t.viewer_correct ? "true" : "false") + "," +
         (t.has_text_annotation ? "true" : "false") + "," +
         inventory.sketch_key(t.sketch) + "\n";
  }
  io::write_file_atomic(path, s);
}

std::vector<RecognitionTrial> read_recognition_csv(const fs::path& path,
                                                   const Inventory& inventory) {
  CsvTable csv(path, {"sketch_object", "sketch_condition", "chosen_object", "rt_ms"});
  std::vector<RecognitionTrial> out;
  out.reserve(csv.size());
  for (std::size_t r = 0; r < csv.size(); ++r) {
    RecognitionTrial t;
    t.sketch = {inventory.parse_object(csv.cell(r, "sketch_object")),
                parse_condition(csv.cell(r, "sketch_condition"))};
    t.chosen = inventory.parse_object(csv.cell(r, "chosen_object"));
    t.rt_ms = csv.number(r, "rt_ms");
    if (!(t.rt_ms > 0.0)) fail(ErrorKind::kParseError, path.string() + ": rt_ms must be positive");
    out.push_back(t);
  }
  return out;
}

void write_recognition_csv(const fs::path& path,
                           std::span<const RecognitionTrial> trials,
                           const Inventory& inventory) {
  std::string s = "sketch_object,sketch_condition,chosen_object,rt_ms\n";
  for (const RecognitionTrial& t : trials) {
    s += inventory.object(t.sketch.object).label + "," +
         std::string(condition_name(t.sketch.condition)) + "," +
         inventory.object(t.chosen).label + "," + fmt_double(t.rt_ms) + "\n";
  }
  io::write_file_atomic(path, s);
}

io::Json correspondence_to_json(const CorrespondenceTable& table,
                                const Inventory& inventory) {
  io::Json scores = io::Json::object();
  for (SketchCategory s : inventory.all_sketch_categories()) {
    const auto row = table.row(s);
    scores[inventory.sketch_key(s)] = std::vector<double>(row.begin(), row.end());
  }
  return {{"source", std::string(source_name(table.source()))}, {"scores", scores}};
}

CorrespondenceTable correspondence_from_json(const io::Json& j,
                                             const Inventory& inventory) {
  try {
    const Source source = parse_source(j.at("source").get<std::string>());
    const std::size_t n = inventory.num_objects();
    std::vector<double> scores(2 * n * n, 0.0);
    std::vector<bool> present(2 * n, false);
    for (const auto& [key, row] : j.at("scores").items()) {
      const SketchCategory s = inventory.parse_sketch_key(key);
      const auto values = row.get<std::vector<double>>();
      if (values.size() != n) {
        fail(ErrorKind::kShapeError, "row " + key + " has " +
                                         std::to_string(values.size()) + " scores");
      }
      const auto r = static_cast<std::size_t>(s.index());
      std::copy(values.begin(), values.end(), scores.begin() + static_cast<std::ptrdiff_t>(r * n));
      present[r] = true;
    }
    for (std::size_t r = 0; r < present.size(); ++r) {
      if (!present[r]) {
        fail(ErrorKind::kMissingCategory,
             "correspondence has no row for " +
                 inventory.sketch_key(SketchCategory::from_index(static_cast<int>(r))));
      }
    }
    return CorrespondenceTable(source, n, std::move(scores));
  } catch (const io::Json::exception& e) {
    fail(ErrorKind::kParseError, std::string("correspondence json: ") + e.what());
  }
}

io::Json costs_to_json(const CostVector& costs, const Inventory& inventory) {
  io::Json j = io::Json::object();
  for (SketchCategory s : inventory.all_sketch_categories()) {
    j[inventory.sketch_key(s)] = costs[s];
  }
  return j;
}

CostVector costs_from_json(const io::Json& j, const Inventory& inventory) {
  try {
    std::vector<double> values(inventory.num_sketch_categories(), 0.0);
    std::vector<bool> present(values.size(), false);
    for (const auto& [key, v] : j.items()) {
      const SketchCategory s = inventory.parse_sketch_key(key);
      values[static_cast<std::size_t>(s.index())] = v.get<double>();
      present[static_cast<std::size_t>(s.index())] = true;
    }
    for (std::size_t r = 0; r < present.size(); ++r) {
      if (!present[r]) {
        fail(ErrorKind::kMissingCategory,
             "costs have no entry for " +
                 inventory.sketch_key(SketchCategory::from_index(static_cast<int>(r))));
      }
    }
    return CostVector(std::move(values));
  } catch (const io::Json::exception& e) {
    fail(ErrorKind::kParseError, std::string("costs json: ") + e.what());
  }
}

io::Json inventory_to_json(const Inventory& inventory) {
  io::Json objects = io::Json::array();
  for (const ObjectInfo& o : inventory.objects()) {
    objects.push_back({{"label", o.label},
                       {"category", inventory.category_names()[static_cast<std::size_t>(o.category)]}});
  }
  return {{"categories", inventory.category_names()}, {"objects", objects}};
}

Inventory inventory_from_json(const io::Json& j) {
  try {
    auto names = j.at("categories").get<std::vector<std::string>>();
    std::vector<ObjectInfo> objects;
    for (const auto& o : j.at("objects")) {
      const auto cat_name = o.at("category").get<std::string>();
      const auto it = std::find(names.begin(), names.end(), cat_name);
      if (it == names.end()) {
        fail(ErrorKind::kParseError, "object category '" + cat_name + "' not declared");
      }
      objects.push_back({static_cast<int>(objects.size()),
                         static_cast<int>(it - names.begin()),
                         o.at("label").get<std::string>()});
    }
    return Inventory(std::move(names), std::move(objects));
  } catch (const io::Json::exception& e) {
    fail(ErrorKind::kParseError, std::string("inventory json: ") + e.what());
  }
}

io::Json splits_to_json(std::span<const SplitSet> splits) {
  io::Json arr = io::Json::array();
  for (const SplitSet& s : splits) {
    arr.push_back({{"fold", s.fold_id}, {"train", s.train}, {"val", s.val}, {"test", s.test}});
  }
  return arr;
}

std::vector<SplitSet> splits_from_json(const io::Json& j) {
  try {
    std::vector<SplitSet> out;
    for (const auto& e : j) {
      SplitSet s;
      s.fold_id = e.at("fold").get<int>();
      s.train = e.at("train").get<std::vector<std::string>>();
      s.val = e.at("val").get<std::vector<std::string>>();
      s.test = e.at("test").get<std::vector<std::string>>();
      std::sort(s.train.begin(), s.train.end());
      std::sort(s.val.begin(), s.val.end());
      std::sort(s.test.begin(), s.test.end());
      out.push_back(std::move(s));
    }
    return out;
  } catch (const io::Json::exception& e) {
    fail(ErrorKind::kParseError, std::string("splits json: ") + e.what());
  }
}

}  // namespace sketchprag::corpus
