#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mmshap/masking_policy.hpp"
#include "mmshap/mm_scoring.hpp"
#include "mmshap/report.hpp"

namespace mmshap::testing {

inline const std::filesystem::path kRenderGolden =
    std::filesystem::path(MMSHAP_TEST_DATA_DIR) / "golden" / "sample_img42.html";

/// "a dog <runs>" over a 2x2 tiled 200x100 image, with hand-picked phi.
inline SampleRecord render_fixture() {
    SampleRecord r;
    r.record_id = "img42";
    r.split = Split::caption;
    r.text = "a dog <runs>";
    r.image_ref = "images/img42.jpg";
    r.tiling = plan_tiling(200, 100, 3);
    const TokenizedSample s = build_sample("img42/caption", whitespace_tokenize(r.text), r.tiling);
    r.tokens = s.tokens;
    r.attribution.sample_id = s.sample_id;
    // [CLS] a dog <runs> [SEP] r0c0 r0c1 r1c0 r1c1
    r.attribution.phi = {0.0, 0.02, 0.2, -0.1, 0.0, 0.1, -0.2, 0.05, 0.0};
    r.attribution.base_value = 0.3;
    r.attribution.full_value = 0.37;
    r.attribution.estimator = EstimatorKind::permutation_mc;
    r.attribution.n_coalitions = 15;
    r.attribution.oracle_calls = 13;
    r.mm = mm_shap(r.attribution, s);
    return r;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace mmshap::testing
