#include "cfc/cnn_interop.hpp"

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cfc/errors.hpp"

namespace cfc {

nlohmann::json cnn_training_config(const DatasetHeader& header, const std::filesystem::path& dataset_path,
                                   int folds, std::uint64_t split_seed) {
  nlohmann::json cells = nlohmann::json::array();
  for (auto [r, c] : header.layout.cell_of_link) cells.push_back({r, c});
  return {{"format", "cfc-cnn-config"},
          {"version", 1},
          {"dataset", dataset_path.string()},
          {"schema_version", header.schema_version},
          {"feature_order", kFeatureNames},
          {"features_per_link", kNumFeatures},
          {"inference_columns", header.inference_columns()},
          {"num_links", header.num_links},
          {"num_intervals", header.num_intervals},
          {"input_shape", {kNumMobilityFeatures, header.layout.rows, header.layout.cols}},
          {"grid_layout", {{"rows", header.layout.rows}, {"cols", header.layout.cols}, {"cell_of_link", cells}}},
          {"heads", {{{"name", "a_levels"}, {"classes", header.quantization_levels}},
                     {{"name", "b_levels"}, {"classes", header.quantization_levels}}}},
          {"folds", folds},
          {"split_seed", split_seed},
          {"predictions_format", {{"record_id", "integer"}, {"a_levels", "int[num_links]"},
                                  {"b_levels", "int[num_links]"}}}};
}

Predictions parse_predictions(std::istream& in) {
  Predictions out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto doc = nlohmann::json::parse(line);
      const auto id = doc.at("record_id").get<std::int64_t>();
      auto levels = [](const nlohmann::json& arr) {
        std::vector<std::uint8_t> lv;
        for (const auto& v : arr) {
          const int x = v.get<int>();
          if (x < 0 || x > 255) throw FormatError("level " + std::to_string(x) + " out of range");
          lv.push_back(static_cast<std::uint8_t>(x));
        }
        return lv;
      };
      LevelPrediction p{levels(doc.at("a_levels")), levels(doc.at("b_levels"))};
      if (p.a_levels.size() != p.b_levels.size()) throw FormatError("a_levels and b_levels differ in length");
      if (!out.emplace(id, std::move(p)).second) throw FormatError("duplicate record_id " + std::to_string(id));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("predictions line " + std::to_string(line_no) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError("predictions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

Predictions load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return parse_predictions(in);
}

void write_predictions(std::ostream& out, const Predictions& predictions) {
  for (const auto& [id, p] : predictions) {
    out << nlohmann::json{{"record_id", id}, {"a_levels", p.a_levels}, {"b_levels", p.b_levels}}.dump() << '\n';
  }
}

}  // namespace cfc
