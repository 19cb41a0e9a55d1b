#include "mmshap/masking_policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mmshap {

TilingPlan plan_tiling(std::int64_t image_width, std::int64_t image_height, std::size_t n_text_tokens) {
    if (image_width < 1 || image_height < 1) {
        throw Error(Errc::ConfigError, "image dimensions must be positive, got " +
                                           std::to_string(image_width) + "x" +
                                           std::to_string(image_height));
    }
    const auto root = std::lround(std::sqrt(static_cast<double>(std::max<std::size_t>(n_text_tokens, 1))));
    const int g = static_cast<int>(std::clamp<long>(root, 2, 8));

    TilingPlan plan;
    plan.image_width = image_width;
    plan.image_height = image_height;
    plan.grid_rows = g;
    plan.grid_cols = g;
    plan.patch_rects.reserve(static_cast<std::size_t>(g) * g);
    for (int r = 0; r < g; ++r) {
        for (int c = 0; c < g; ++c) {
            plan.patch_rects.push_back({c * image_width / g, r * image_height / g,
                                        (c + 1) * image_width / g, (r + 1) * image_height / g});
        }
    }
    return plan;
}

TokenizedSample build_sample(std::string sample_id, const std::vector<TextTokenSpec>& text_tokens,
                             const TilingPlan& tiling, std::map<std::string, std::string> metadata) {
    const bool any_maskable =
        std::any_of(text_tokens.begin(), text_tokens.end(), [](const TextTokenSpec& t) { return !t.is_special; });
    if (!any_maskable) {
        throw Error(Errc::NoMaskableText, "sample '" + sample_id + "' has no maskable text token");
    }

    TokenizedSample sample;
    sample.sample_id = std::move(sample_id);
    sample.metadata = std::move(metadata);
    sample.tokens.reserve(text_tokens.size() + tiling.patch_rects.size());
    for (const TextTokenSpec& t : text_tokens) {
        sample.tokens.push_back(
            {sample.tokens.size(), Modality::text(), !t.is_special, t.label, t.payload_ref});
    }
    for (std::size_t k = 0; k < tiling.patch_rects.size(); ++k) {
        const PatchRect& r = tiling.patch_rects[k];
        const auto row = k / static_cast<std::size_t>(tiling.grid_cols);
        const auto col = k % static_cast<std::size_t>(tiling.grid_cols);
        std::ostringstream payload;
        payload << r.x0 << ',' << r.y0 << ',' << r.x1 << ',' << r.y1;
        sample.tokens.push_back({sample.tokens.size(), Modality::image(), true,
                                 "r" + std::to_string(row) + "c" + std::to_string(col), payload.str()});
    }
    return validate_sample(std::move(sample));
}

std::vector<TextTokenSpec> whitespace_tokenize(std::string_view text) {
    std::vector<TextTokenSpec> out;
    out.push_back({"[CLS]", "[CLS]", true});
    std::istringstream in{std::string(text)};
    std::string word;
    while (in >> word) out.push_back({word, word, false});
    out.push_back({"[SEP]", "[SEP]", true});
    return out;
}

void to_json(nlohmann::json& j, const TilingPlan& plan) {
    nlohmann::json rects = nlohmann::json::array();
    for (const PatchRect& r : plan.patch_rects) rects.push_back({r.x0, r.y0, r.x1, r.y1});
    j = nlohmann::json{{"image_width", plan.image_width},
                       {"image_height", plan.image_height},
                       {"grid_rows", plan.grid_rows},
                       {"grid_cols", plan.grid_cols},
                       {"patch_rects", std::move(rects)}};
}

void from_json(const nlohmann::json& j, TilingPlan& plan) {
    plan.image_width = j.at("image_width").get<std::int64_t>();
    plan.image_height = j.at("image_height").get<std::int64_t>();
    plan.grid_rows = j.at("grid_rows").get<int>();
    plan.grid_cols = j.at("grid_cols").get<int>();
    plan.patch_rects.clear();
    for (const auto& r : j.at("patch_rects")) {
        plan.patch_rects.push_back({r.at(0).get<std::int64_t>(), r.at(1).get<std::int64_t>(),
                                    r.at(2).get<std::int64_t>(), r.at(3).get<std::int64_t>()});
    }
}

}  // namespace mmshap
