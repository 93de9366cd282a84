#pragma once

// Stage-by-stage experiment runner. Stages talk only through files in the
// output directory, so each one can be re-run alone.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "zsca/config.hpp"
#include "zsca/eval.hpp"

namespace zsca {

enum class Stage { BuildGraph, TrainHeads, TrainGcn, TrainAffordance, TrainMapper, Evaluate };
std::string_view stage_name(Stage s);  // "build-graph", ...
const std::vector<Stage>& all_stages();

struct RunOptions {
  fs::path out;
  // Skip a stage whose checkpoint exists with a matching fingerprint.
  bool resume = false;
  std::ostream* log = nullptr;
};

// Output checkpoint of a stage (none for evaluate).
std::vector<fs::path> stage_outputs(Stage s, const fs::path& out);
// Hash of the config keys a stage depends on.
std::uint64_t stage_fingerprint(Stage s, const ExperimentConfig& config);

struct ProtocolResult {
  EvalReport report;
  std::vector<double> chance_auc;  // per k; empty for close world or when skipped
};

// Errors are re-thrown with the stage name prefixed. Returns the evaluation
// results for Stage::Evaluate, nothing otherwise. Returns true when run.
bool run_stage(Stage s, const ExperimentConfig& config, const RunOptions& options,
               std::vector<ProtocolResult>* results = nullptr);
std::vector<ProtocolResult> run_all(const ExperimentConfig& config, const RunOptions& options);

struct ReportRow {
  std::string protocol;
  std::string metric;
  std::string k;  // "-" when not per-k
  double value = 0.0;
};
std::vector<ReportRow> read_report(const fs::path& path);
// Value of one row; throws MissingSection when absent.
double report_value(const std::vector<ReportRow>& rows, std::string_view protocol, std::string_view metric,
                    std::string_view k = "-");

}  // namespace zsca
