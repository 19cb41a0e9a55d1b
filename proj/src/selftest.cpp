#include "mmshap/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "mmshap/masking_policy.hpp"
#include "mmshap/mm_scoring.hpp"
#include "mmshap/shapley_engine.hpp"
#include "mmshap/synthetic_oracles.hpp"

namespace mmshap {

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

TokenizedSample fixture(std::size_t n_words, std::int64_t size) {
    std::vector<TextTokenSpec> text{{"[CLS]", "[CLS]", true}};
    for (std::size_t i = 0; i < n_words; ++i) {
        text.push_back({"w" + std::to_string(i), "w" + std::to_string(i), false});
    }
    text.push_back({"[SEP]", "[SEP]", true});
    return build_sample("selftest", text, plan_tiling(size, size, n_words));
}

double efficiency_gap(const ShapleyAttribution& a) {
    double sum = 0.0;
    for (double v : a.phi) sum += v;
    return std::abs(sum - (a.full_value - a.base_value));
}

CheckResult check(std::string name, bool ok, std::string detail) {
    return {std::move(name), ok, std::move(detail)};
}

}  // namespace

std::vector<CheckResult> run_selftest() {
    std::vector<CheckResult> out;
    const TokenizedSample sample = fixture(4, 64);  // 4 text + 2x2 patches
    const std::size_t n = sample.token_count();

    {
        std::vector<double> weights(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) weights[j] = sample.tokens[j].maskable ? 0.5 * double(j) - 1.0 : 0.0;
        auto oracle = linear_oracle(weights, 0.25);
        oracle->register_sample(sample);
        const ShapleyAttribution a = exact_shapley(sample, *oracle);
        double err = 0.0;
        for (std::size_t j = 0; j < n; ++j) err = std::max(err, std::abs(a.phi[j] - weights[j]));
        out.push_back(check("linear closed form", err <= 1e-12, "max error " + num(err)));
    }

    {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        double worst = 0.0;
        for (int game = 0; game < 40; ++game) {
            std::vector<double> weights(n);
            for (double& w : weights) w = u(rng);
            std::vector<InteractionPair> pairs;
            const auto positions = sample.maskable_positions();
            for (std::size_t a = 0; a + 1 < positions.size(); a += 2) {
                pairs.push_back({positions[a], positions[a + 1], u(rng)});
            }
            auto oracle = sum_oracle(linear_oracle(weights, u(rng)), interaction_oracle(pairs));
            oracle->register_sample(sample);
            EstimatorConfig cfg;
            cfg.seed = static_cast<std::uint64_t>(game);
            worst = std::max({worst, efficiency_gap(exact_shapley(sample, *oracle)),
                              efficiency_gap(mc_shapley(sample, *oracle, cfg))});
        }
        out.push_back(check("efficiency (exact and mc)", worst <= 1e-9, "max gap " + num(worst)));
    }

    {
        const auto positions = sample.maskable_positions();
        auto oracle = interaction_oracle({{positions[0], positions[1], 4.0}});
        oracle->register_sample(sample);
        const ShapleyAttribution a = exact_shapley(sample, *oracle);
        const bool sym = std::abs(a.phi[positions[0]] - a.phi[positions[1]]) <= 1e-12 &&
                         std::abs(a.phi[positions[0]] - 2.0) <= 1e-12;
        bool dummy = true;
        for (std::size_t k = 2; k < positions.size(); ++k) dummy = dummy && a.phi[positions[k]] == 0.0;
        out.push_back(check("symmetry", sym, "phi = " + num(a.phi[positions[0]]) + ", " + num(a.phi[positions[1]])));
        out.push_back(check("dummy", dummy, "non-pair tokens receive exactly zero"));
    }

    for (const char* name : {"unimodal-text", "unimodal-image", "mirror"}) {
        auto oracle = make_builtin_oracle(name);
        oracle->register_sample(sample);
        const ShapleyAttribution a = exact_shapley(sample, *oracle);
        const double t = mm_shap(a, sample).t_shap;
        const double expected = std::string(name) == "unimodal-text" ? 100.0 : std::string(name) == "mirror" ? 50.0 : 0.0;
        out.push_back(check(std::string("collapse detection: ") + name, std::abs(t - expected) <= 1e-9,
                            "T-SHAP " + format_percent(t) + "%"));
    }
    return out;
}

}  // namespace mmshap
