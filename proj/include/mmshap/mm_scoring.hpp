#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mmshap/core_types.hpp"

namespace mmshap {

/// Modality contributions of one prediction.
///
/// phi_abs[m] is the sum of |phi| over the tokens of modality m; proportion[m]
/// is phi_abs[m] divided by the total. Proportions are kept as exact ratios;
/// percent formatting happens only when reporting.
struct MMShapScore {
    std::string sample_id;
    std::map<Modality, double> phi_abs;
    std::map<Modality, double> proportion;
    double t_shap = 0.0;  // percent

    /// Visual degree; with exactly text and image present this is
    /// 100 - t_shap by definition.
    double v_shap() const;

    bool operator==(const MMShapScore&) const = default;
};

/// Throws TokenCountMismatch, SingleModality (fewer than two modalities among
/// maskable tokens) or AllZeroContributions (every |phi| is zero, so the
/// proportion is undefined).
MMShapScore mm_shap(const ShapleyAttribution& attr, const TokenizedSample& sample);

enum class Split { caption, foil, all };

std::string_view split_name(Split split);
Split split_from_name(std::string_view name);

struct DatasetMMStats {
    double mean_t_shap = 0.0;   // percent
    double stdev_t_shap = 0.0;  // population stdev, percent
    std::vector<MMShapScore> per_sample;
    Split split = Split::all;
};

/// Mean and population standard deviation of t_shap. Throws EmptyInput.
DatasetMMStats aggregate(std::span<const MMShapScore> scores, Split split);

/// One decimal, e.g. 51.5.
std::string format_percent(double percent);

void to_json(nlohmann::json& j, const MMShapScore& score);
void from_json(const nlohmann::json& j, MMShapScore& score);

}  // namespace mmshap
