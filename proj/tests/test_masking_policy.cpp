#include <doctest.h>

#include <random>

#include "mmshap/masking_policy.hpp"
#include "support/test_support.hpp"

using namespace mmshap;
using mmshap::testing::error_code_of;

namespace {

std::vector<TextTokenSpec> words(std::size_t n) {
    std::vector<TextTokenSpec> out{{"[CLS]", "[CLS]", true}};
    for (std::size_t i = 0; i < n; ++i) out.push_back({"w" + std::to_string(i), "w" + std::to_string(i), false});
    out.push_back({"[SEP]", "[SEP]", true});
    return out;
}

}  // namespace

TEST_CASE("512x512 with 16 text tokens is a 4x4 grid of 128 px squares") {
    const TilingPlan plan = plan_tiling(512, 512, 16);
    CHECK(plan.grid_rows == 4);
    CHECK(plan.grid_cols == 4);
    REQUIRE(plan.patch_rects.size() == 16);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            CHECK(plan.patch_rects[r * 4 + c] == PatchRect{c * 128, r * 128, (c + 1) * 128, (r + 1) * 128});
        }
    }
}

TEST_CASE("500x300 with 3 text tokens is a 2x2 grid with floored edges") {
    const TilingPlan plan = plan_tiling(500, 300, 3);
    CHECK(plan.grid_rows == 2);
    REQUIRE(plan.patch_rects.size() == 4);
    CHECK(plan.patch_rects[0] == PatchRect{0, 0, 250, 150});
    CHECK(plan.patch_rects[1] == PatchRect{250, 0, 500, 150});
    CHECK(plan.patch_rects[2] == PatchRect{0, 150, 250, 300});
    CHECK(plan.patch_rects[3] == PatchRect{250, 150, 500, 300});

    const TilingPlan odd = plan_tiling(7, 5, 9);
    CHECK(odd.grid_rows == 3);
    CHECK(odd.patch_rects[0] == PatchRect{0, 0, 2, 1});
    CHECK(odd.patch_rects[1] == PatchRect{2, 0, 4, 1});
    CHECK(odd.patch_rects[8] == PatchRect{4, 3, 7, 5});
}

TEST_CASE("grid size clamps to [2, 8]") {
    CHECK(plan_tiling(100, 100, 100).grid_rows == 8);
    CHECK(plan_tiling(100, 100, 1000).grid_rows == 8);
    CHECK(plan_tiling(100, 100, 1).grid_rows == 2);
    CHECK(plan_tiling(100, 100, 0).grid_rows == 2);
    CHECK(plan_tiling(100, 100, 9).grid_rows == 3);
    CHECK(plan_tiling(100, 100, 25).grid_rows == 5);
    CHECK(plan_tiling(100, 100, 12).grid_rows == 3);  // sqrt 3.46
    CHECK(plan_tiling(100, 100, 13).grid_rows == 4);  // sqrt 3.61
}

TEST_CASE("tiles cover the image exactly") {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<std::int64_t> side(1, 4096);
    std::uniform_int_distribution<std::size_t> text(1, 200);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::int64_t w = side(rng);
        const std::int64_t h = side(rng);
        const TilingPlan plan = plan_tiling(w, h, text(rng));
        std::int64_t area = 0;
        for (const PatchRect& r : plan.patch_rects) {
            CHECK(r.x0 <= r.x1);
            CHECK(r.y0 <= r.y1);
            area += r.area();
        }
        CHECK(area == w * h);
        CHECK(plan.patch_rects.front().x0 == 0);
        CHECK(plan.patch_rects.back().x1 == w);
        CHECK(plan.patch_rects.back().y1 == h);
    }
}

TEST_CASE("grid size is non-decreasing in text length") {
    int previous = 0;
    for (std::size_t n = 0; n <= 300; ++n) {
        const int g = plan_tiling(640, 480, n).grid_rows;
        CHECK(g >= previous);
        previous = g;
    }
}

TEST_CASE("invalid image dimensions") {
    CHECK(error_code_of([] { plan_tiling(0, 10, 4); }) == Errc::ConfigError);
    CHECK(error_code_of([] { plan_tiling(10, -1, 4); }) == Errc::ConfigError);
}

TEST_CASE("build_sample layout") {
    const TokenizedSample s = build_sample("x", words(2), plan_tiling(64, 64, 2), {{"split", "caption"}});
    CHECK(s.token_count() == 8);
    CHECK(s.maskable_count() == 6);
    CHECK(s.n_text == 2);
    CHECK(s.n_image == 4);
    CHECK_FALSE(s.tokens[0].maskable);
    CHECK_FALSE(s.tokens[3].maskable);
    CHECK(s.tokens[3].label == "[SEP]");
    CHECK(s.tokens[4].label == "r0c0");
    CHECK(s.tokens[5].label == "r0c1");
    CHECK(s.tokens[6].label == "r1c0");
    CHECK(s.tokens[7].payload_ref == "32,32,64,64");
    CHECK(s.tokens[7].modality == Modality::image());
    CHECK(s.metadata.at("split") == "caption");
}

TEST_CASE("build_sample needs a maskable text token") {
    const std::vector<TextTokenSpec> only_specials{{"[CLS]", "[CLS]", true}, {"[SEP]", "[SEP]", true}};
    CHECK(error_code_of([&] { build_sample("x", only_specials, plan_tiling(8, 8, 0)); }) == Errc::NoMaskableText);
}

TEST_CASE("whitespace tokenizer") {
    const auto toks = whitespace_tokenize("  a dog\truns \n");
    REQUIRE(toks.size() == 5);
    CHECK(toks[0] == TextTokenSpec{"[CLS]", "[CLS]", true});
    CHECK(toks[2] == TextTokenSpec{"dog", "dog", false});
    CHECK(toks[4].is_special);
}

TEST_CASE("tiling JSON round trip") {
    const TilingPlan plan = plan_tiling(333, 217, 11);
    nlohmann::json j = plan;
    CHECK(j["patch_rects"][0] == nlohmann::json::array({0, 0, 111, 72}));
    CHECK(j.get<TilingPlan>() == plan);
}
