#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "cfc/dataset.hpp"
#include "cfc/evaluation.hpp"

namespace cfc {

/// Training settings handed to an external CNN trainer: where the dataset
/// is, how records map onto the link lattice and which columns it may use.
nlohmann::json cnn_training_config(const DatasetHeader& header, const std::filesystem::path& dataset_path,
                                   int folds, std::uint64_t split_seed);

/// Newline-delimited {record_id, a_levels, b_levels} objects. Throws
/// FormatError on malformed lines or duplicate ids.
Predictions parse_predictions(std::istream& in);
Predictions load_predictions(const std::filesystem::path& path);
void write_predictions(std::ostream& out, const Predictions& predictions);

}  // namespace cfc
