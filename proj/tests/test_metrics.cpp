#include <doctest.h>

#include <cmath>
#include <random>
#include <utility>

#include "mmshap/metrics.hpp"
#include "support/test_support.hpp"

using namespace mmshap;
using mmshap::testing::error_code_of;

namespace {

std::vector<PairPrediction> six_rows() {
    return {{"a", 0.9, 0.2}, {"b", 0.6, 0.7}, {"c", 0.4, 0.1},
            {"d", 0.5, 0.5}, {"e", 0.8, 0.3}, {"f", 0.3, 0.9}};
}

}  // namespace

TEST_CASE("pairwise accuracy uses a strict comparison") {
    CHECK(pairwise_accuracy(std::vector<PairPrediction>{{"x", 0.7, 0.4}}) == 1.0);
    CHECK(pairwise_accuracy(std::vector<PairPrediction>{{"x", 0.4, 0.4}}) == 0.0);
    CHECK(pairwise_accuracy(six_rows()) == 0.5);
    CHECK(error_code_of([] { pairwise_accuracy(std::vector<PairPrediction>{}); }) == Errc::EmptyInput);
}

TEST_CASE("threshold accuracies") {
    auto one = [](double c, double f) { return threshold_accuracies(std::vector<PairPrediction>{{"x", c, f}}); };
    CHECK(one(0.9, 0.1).acc_c == 1.0);
    CHECK(one(0.9, 0.1).acc_f == 1.0);
    CHECK(one(0.9, 0.1).acc == 1.0);
    CHECK(one(0.4, 0.6).acc_c == 0.0);
    CHECK(one(0.4, 0.6).acc_f == 0.0);
    CHECK(one(0.4, 0.6).acc == 0.0);

    std::vector<PairPrediction> always_foil(10, PairPrediction{"x", 0.0, 0.0});
    const ThresholdAccuracies t = threshold_accuracies(always_foil);
    CHECK(t.acc_c == 0.0);
    CHECK(t.acc_f == 1.0);
    CHECK(t.acc == 0.5);

    const ThresholdAccuracies six = threshold_accuracies(six_rows());
    CHECK(six.acc_c == 0.5);
    CHECK(six.acc_f == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
    CHECK(six.acc == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
}

TEST_CASE("spearman fixtures") {
    const std::vector<double> a{1, 2, 3};
    const std::vector<double> b{3, 2, 1};
    CHECK(spearman(a, a) == 1.0);
    CHECK(spearman(a, b) == -1.0);

    const std::vector<double> x{1, 2, 3, 4, 5, 6};
    const std::vector<double> y{2, 1, 4, 3, 6, 5};
    CHECK(spearman(x, y) == doctest::Approx(29.0 / 35.0).epsilon(1e-15));

    const std::vector<double> correct{1, 1, 0, 0, 1, 0};
    const std::vector<double> t{10, 20, 30, 40, 50, 60};
    CHECK(spearman(correct, t) == doctest::Approx(-7.5 / std::sqrt(236.25)).epsilon(1e-15));
}

TEST_CASE("spearman errors") {
    const std::vector<double> three{1, 2, 3};
    const std::vector<double> two{1, 2};
    const std::vector<double> flat{4, 4, 4};
    const std::vector<double> one{1};
    CHECK(error_code_of([&] { spearman(three, two); }) == Errc::LengthMismatch);
    CHECK(error_code_of([&] { spearman(three, flat); }) == Errc::DegenerateInput);
    CHECK(error_code_of([&] { spearman(flat, three); }) == Errc::DegenerateInput);
    CHECK(error_code_of([&] { spearman(one, one); }) == Errc::EmptyInput);
}

TEST_CASE("random scorer lands near chance") {
    std::mt19937_64 rng(20231);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<PairPrediction> preds;
    for (int i = 0; i < 10000; ++i) preds.push_back({std::to_string(i), u(rng), u(rng)});
    CHECK(std::abs(pairwise_accuracy(preds) - 0.5) <= 0.02);
}

TEST_CASE("independent correctness and t_shap are uncorrelated") {
    std::mt19937_64 rng(404);
    std::bernoulli_distribution coin(0.6);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::vector<double> correct;
    std::vector<double> t;
    for (int i = 0; i < 1000; ++i) {
        correct.push_back(coin(rng) ? 1.0 : 0.0);
        t.push_back(u(rng));
    }
    CHECK(std::abs(spearman(correct, t)) < 0.1);
}

TEST_CASE("metric invariances") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<PairPrediction> preds;
        std::vector<double> xs;
        std::vector<double> ys;
        for (int i = 0; i < 40; ++i) {
            const double c = std::round(u(rng) * 10.0) / 10.0;
            const double f = std::round(u(rng) * 10.0) / 10.0;
            preds.push_back({"p", c, f});
            xs.push_back(c);
            ys.push_back(f);
        }
        auto monotone = [](double v) { return std::exp(3.0 * v) - 7.0; };

        std::vector<PairPrediction> transformed = preds;
        for (auto& p : transformed) {
            p.score_caption = monotone(p.score_caption);
            p.score_foil = monotone(p.score_foil);
        }
        CHECK(pairwise_accuracy(transformed) == pairwise_accuracy(preds));

        std::vector<double> xt;
        for (double v : xs) xt.push_back(monotone(v));
        CHECK(spearman(xt, ys) == doctest::Approx(spearman(xs, ys)).epsilon(1e-12));

        // 1 - acc_f is the foil-side mirror of acc_c, so the sum counts
        // "score > threshold" over both sides and ignores which is which.
        const ThresholdAccuracies base = threshold_accuracies(preds);
        std::vector<PairPrediction> swapped = preds;
        for (auto& p : swapped) std::swap(p.score_caption, p.score_foil);
        const ThresholdAccuracies mirrored = threshold_accuracies(swapped);
        CHECK(base.acc_c + (1.0 - base.acc_f) == doctest::Approx(mirrored.acc_c + (1.0 - mirrored.acc_f)));
    }
}
