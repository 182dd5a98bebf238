#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrd/model.hpp"
#include "mrd/optim.hpp"
#include "mrd/synth.hpp"

namespace mrd {

struct CsvTable {
  Matrix data;
  std::vector<std::string> columns;
  bool has_header = false;
};

/// RFC-4180 style CSV of numbers. The first row is a header iff any of its
/// cells is not a number; without one, columns are named c0, c1, ...
/// Errors report 1-based file rows and columns.
CsvTable parse_csv(const std::string& text, const std::string& source = "<input>");
CsvTable load_csv(const std::string& path);

std::string format_csv(const Matrix& data, const std::vector<std::string>& columns = {});
void save_csv(const std::string& path, const Matrix& data,
              const std::vector<std::string>& columns = {});

/// Writes to a temporary file next to `path` and renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

/// Single-column CSV as a vector (timestamps, sequence ids, labels).
Vector load_column(const std::string& path);

inline constexpr int kModelFormatVersion = 1;

struct TrainingSummary {
  std::vector<double> trace;
  std::string termination;
  int iterations = 0;
};

struct ModelFile {
  MrdModel model;
  std::optional<TrainingSummary> training;
};

nlohmann::json segmentation_to_json(const Segmentation& seg);
nlohmann::json model_to_json(const MrdModel& model,
                             const std::optional<TrainingSummary>& training = std::nullopt);
/// Schema violations raise DataError naming the offending field path; a newer
/// format_version raises VersionError.
ModelFile model_from_json(const nlohmann::json& j);

void save_model(const std::string& path, const MrdModel& model,
                const std::optional<TrainingSummary>& training = std::nullopt);
ModelFile load_model_file(const std::string& path);
MrdModel load_model(const std::string& path);

/// Keys mirror SynthSpec's fields; absent keys keep their defaults, unknown
/// keys are rejected.
SynthSpec synth_spec_from_json(const nlohmann::json& j);
/// Labels are written 1-based.
nlohmann::json synth_truth_to_json(const SynthTruth& truth);

}  // namespace mrd
