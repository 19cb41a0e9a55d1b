#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mmshap/core_types.hpp"

namespace mmshap {

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PatchRect {
    std::int64_t x0 = 0;
    std::int64_t y0 = 0;
    std::int64_t x1 = 0;
    std::int64_t y1 = 0;

    std::int64_t area() const { return (x1 - x0) * (y1 - y0); }
    bool operator==(const PatchRect&) const = default;
};

struct TilingPlan {
    std::int64_t image_width = 0;
    std::int64_t image_height = 0;
    int grid_rows = 0;
    int grid_cols = 0;
    std::vector<PatchRect> patch_rects;  // row-major

    bool operator==(const TilingPlan&) const = default;
};

/// Square g x g grid with g = clamp(round(sqrt(n_text_tokens)), 2, 8); edges
/// at floor(i * W / g) and floor(i * H / g) so patches tile the image exactly.
/// Longer text gets more, smaller patches.
TilingPlan plan_tiling(std::int64_t image_width, std::int64_t image_height, std::size_t n_text_tokens);

/// Text tokens first (in order, specials non-maskable), then image patches
/// row-major with labels "r<row>c<col>" and payload "x0,y0,x1,y1".
/// Throws NoMaskableText when every text token is special.
TokenizedSample build_sample(std::string sample_id, const std::vector<TextTokenSpec>& text_tokens,
                             const TilingPlan& tiling,
                             std::map<std::string, std::string> metadata = {});

/// Whitespace tokenizer used when the oracle does not report its own
/// tokenization: [CLS] words... [SEP], specials flagged.
std::vector<TextTokenSpec> whitespace_tokenize(std::string_view text);

void to_json(nlohmann::json& j, const TilingPlan& plan);
void from_json(const nlohmann::json& j, TilingPlan& plan);

}  // namespace mmshap
