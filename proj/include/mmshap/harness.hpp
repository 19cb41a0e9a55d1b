#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "mmshap/dataset.hpp"
#include "mmshap/oracle.hpp"
#include "mmshap/report.hpp"
#include "mmshap/shapley_engine.hpp"

namespace mmshap {

struct RunConfig {
    std::filesystem::path dataset_path;
    /// "builtin:<name>", an http:// URL, or a shell command (optionally
    /// prefixed with "cmd:") that speaks the protocol on stdio.
    std::string oracle_spec;
    EstimatorConfig estimator;
    std::vector<Split> splits{Split::caption, Split::foil};
    std::filesystem::path output_dir;
    int workers = 1;
    bool render = false;
    std::chrono::milliseconds oracle_timeout{60'000};
};

/// Resolves an oracle spec and completes the handshake. Throws ConfigError
/// for unknown builtins, ProtocolViolation / OracleTimeout when a remote
/// oracle does not answer the handshake.
std::shared_ptr<Oracle> make_oracle(const std::string& spec, std::chrono::milliseconds timeout);

/// Explains every record under every requested split it has, then aggregates
/// MM-SHAP statistics and accuracy metrics.
///
/// Writes <output_dir>/report.json, a per-sample cache under
/// <output_dir>/samples/ (completed samples are reused on rerun), and
/// <output_dir>/failures.json when anything failed. Per-sample oracle errors
/// are recorded and the run continues; protocol violations and timeouts abort
/// it (report.aborted) after flushing what completed. Results depend only on
/// the dataset, the oracle and the estimator config, not on `workers`.
EvaluationReport run(const RunConfig& config);
EvaluationReport run(const RunConfig& config, Oracle& oracle);

/// Same as `run` but keeps everything in memory and writes nothing.
EvaluationReport evaluate_records(const std::vector<DatasetRecord>& records, const RunConfig& config,
                                  Oracle& oracle);

/// Mean T-SHAP shift between two reports, per split present in both, for
/// before/after fine-tuning comparisons.
struct SplitDelta {
    Split split = Split::all;
    double baseline_mean = 0.0;
    double candidate_mean = 0.0;
    double delta = 0.0;  // candidate - baseline, percent points
};

std::vector<SplitDelta> compare_reports(const EvaluationReport& baseline,
                                        const EvaluationReport& candidate);

/// Report JSON with wall-clock fields removed, for determinism checks.
std::string deterministic_dump(const EvaluationReport& report);

}  // namespace mmshap
