#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmshap/core_types.hpp"
#include "mmshap/masking_policy.hpp"
#include "mmshap/mm_scoring.hpp"
#include "mmshap/oracle.hpp"

namespace mmshap {

inline constexpr int kReportSchemaVersion = 1;

/// One explained prediction: a dataset record under one split.
struct SampleRecord {
    std::string record_id;
    Split split = Split::caption;
    std::string task = "isa";
    std::string text;
    std::string image_ref;
    TilingPlan tiling;
    std::vector<Token> tokens;
    ShapleyAttribution attribution;
    std::optional<MMShapScore> mm;  // empty when every contribution is zero
    std::string status = "ok";      // "ok" | "all_zero"
    std::optional<bool> correct;

    const std::string& sample_id() const { return attribution.sample_id; }
    /// The oracle's score on the unmasked input.
    double score() const { return attribution.full_value; }

    bool operator==(const SampleRecord&) const = default;
};

struct SplitStats {
    Split split = Split::all;
    std::size_t n_samples = 0;
    std::size_t n_all_zero = 0;  // skipped from mean/stdev
    std::optional<double> mean_t_shap;
    std::optional<double> stdev_t_shap;

    bool operator==(const SplitStats&) const = default;
};

struct AccuracyStats {
    std::size_t n_pairs = 0;
    std::optional<double> acc_r;
    // Only for oracles declaring probability scores.
    std::optional<double> acc_c;
    std::optional<double> acc_f;
    std::optional<double> acc;
    std::size_t n_vqa = 0;
    std::optional<double> vqa_accuracy;

    bool operator==(const AccuracyStats&) const = default;
};

/// Spearman between per-sample 0/1 correctness and t_shap for one split.
struct CorrelationStat {
    Split split = Split::caption;
    std::size_t n = 0;
    std::optional<double> rho;
    std::string note;  // why rho is missing, when it is

    bool operator==(const CorrelationStat&) const = default;
};

struct Failure {
    std::string sample_id;
    std::string code;
    std::string message;

    bool operator==(const Failure&) const = default;
};

struct EvaluationReport {
    int schema_version = kReportSchemaVersion;
    nlohmann::json config;  // echo of the run configuration
    OracleInfo oracle_info;
    std::vector<SampleRecord> samples;  // ordered by sample_id
    std::vector<SplitStats> stats;
    AccuracyStats accuracy;
    std::vector<CorrelationStat> correlations;
    std::vector<Failure> failures;
    bool aborted = false;
    std::uint64_t oracle_calls = 0;
    double wall_time_seconds = 0.0;
};

void to_json(nlohmann::json& j, const SampleRecord& r);
void from_json(const nlohmann::json& j, SampleRecord& r);
void to_json(nlohmann::json& j, const EvaluationReport& report);
void from_json(const nlohmann::json& j, EvaluationReport& report);

/// Filesystem-safe, collision-resistant file stem for a sample id.
std::string file_stem_for(const std::string& sample_id);

/// Pretty-printed report JSON with a trailing newline.
std::string dump_report(const EvaluationReport& report);
EvaluationReport load_report(const std::filesystem::path& path);

}  // namespace mmshap
