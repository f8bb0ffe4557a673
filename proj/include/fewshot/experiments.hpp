#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fewshot/bounds.hpp"
#include "fewshot/geometry.hpp"
#include "fewshot/kernels.hpp"

namespace fewshot {

inline constexpr int kSchemaVersion = 1;

const char* library_version();

/// A data file produced by an experiment, named relative to the output
/// directory.
struct ReportFile {
  std::string name;
  std::string contents;
};

/// {config, results, provenance{seed, version, timestamp}} plus the CSV
/// files written next to it. `config` is the validated config with every
/// default filled in.
struct ExperimentOutput {
  nlohmann::json report;
  std::vector<ReportFile> files;
};

/// Subcommand names accepted by run_experiment.
const std::vector<std::string>& experiment_commands();

/// Validates `config` for `command` (unknown fields, types, ranges, input
/// paths) before doing any work, then runs it. Config problems raise
/// Error(Config); unreadable or malformed input data raises Error(InputData).
ExperimentOutput run_experiment(std::string_view command, const nlohmann::json& config);

/// Writes report.json and every data file into `dir` via temp-file-then-
/// rename.
void write_experiment(const ExperimentOutput& output, const std::filesystem::path& dir);

/// JSON forms shared by the reports.
nlohmann::json kernel_to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BoundReport& report);
nlohmann::json to_json(const VolumeRatioEstimate& estimate);
nlohmann::json to_json(const OrthogonalityStats& stats);

}  // namespace fewshot
