#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmshap/report.hpp"

namespace mmshap {

/// "#rrggbb" on a diverging scale: +1 is full blue (pushes the score up),
/// -1 full red (pushes it down), 0 white.
std::string diverging_color(double t);

/// Self-contained HTML page for one sample: header with the score and
/// T-SHAP, text tokens highlighted by signed phi, and an SVG patch overlay on
/// the image. The scale is normalized by the sample's max |phi|.
/// `image_bytes`, when given, is embedded as a data URI.
std::string render_sample_html(const SampleRecord& sample, const std::optional<std::string>& image_bytes);

std::string render_index_html(const EvaluationReport& report, const std::vector<std::string>& pages);

/// Writes index.html plus one page per sample into `out_dir` and returns the
/// written paths. Throws MissingAttributions when a sample has no per-token
/// phi. Relative image paths are resolved against the dataset directory
/// recorded in the report.
std::vector<std::filesystem::path> render(const EvaluationReport& report, const std::filesystem::path& out_dir);

}  // namespace mmshap
