#include "mmshap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mmshap/error.hpp"

namespace mmshap {

namespace {

void require_finite(const PairPrediction& p) {
    if (!std::isfinite(p.score_caption) || !std::isfinite(p.score_foil)) {
        throw Error(Errc::DegenerateInput, "pair '" + p.pair_id + "' has a non-finite score");
    }
}

std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        // Ranks are 1-based; a tie block [i, j] shares the mean of i+1..j+1.
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double pairwise_accuracy(std::span<const PairPrediction> preds) {
    if (preds.empty()) throw Error(Errc::EmptyInput, "no pair predictions");
    std::size_t correct = 0;
    for (const PairPrediction& p : preds) {
        require_finite(p);
        if (p.score_caption > p.score_foil) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

ThresholdAccuracies threshold_accuracies(std::span<const PairPrediction> preds) {
    if (preds.empty()) throw Error(Errc::EmptyInput, "no pair predictions");
    std::size_t caption_ok = 0;
    std::size_t foil_ok = 0;
    for (const PairPrediction& p : preds) {
        require_finite(p);
        if (p.score_caption > p.threshold) ++caption_ok;
        if (p.score_foil <= p.threshold) ++foil_ok;
    }
    const double n = static_cast<double>(preds.size());
    ThresholdAccuracies out;
    out.acc_c = static_cast<double>(caption_ok) / n;
    out.acc_f = static_cast<double>(foil_ok) / n;
    out.acc = 0.5 * (out.acc_c + out.acc_f);
    return out;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) {
        throw Error(Errc::LengthMismatch, "spearman inputs have lengths " + std::to_string(xs.size()) +
                                              " and " + std::to_string(ys.size()));
    }
    if (xs.size() < 2) throw Error(Errc::EmptyInput, "spearman needs at least two points");
    const std::vector<double> rx = average_ranks(xs);
    const std::vector<double> ry = average_ranks(ys);
    const double n = static_cast<double>(rx.size());
    const double mean = (n + 1.0) / 2.0;  // mean of ranks 1..n, ties included
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double dx = rx[i] - mean;
        const double dy = ry[i] - mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw Error(Errc::DegenerateInput, "spearman is undefined for a constant input");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace mmshap
