#pragma once

#include <span>
#include <string>

namespace mmshap {

/// Alignment scores of one image paired with its caption and with its foil.
struct PairPrediction {
    std::string pair_id;
    double score_caption = 0.0;
    double score_foil = 0.0;
    double threshold = 0.5;
};

/// acc_r: fraction of pairs whose caption score strictly exceeds the foil
/// score. Ties count as incorrect.
double pairwise_accuracy(std::span<const PairPrediction> preds);

struct ThresholdAccuracies {
    double acc_c = 0.0;  // caption score > threshold
    double acc_f = 0.0;  // foil score <= threshold
    double acc = 0.0;    // mean of the two
};

ThresholdAccuracies threshold_accuracies(std::span<const PairPrediction> preds);

/// Spearman rank correlation with average ranks for ties. Throws
/// LengthMismatch, EmptyInput (fewer than two points) or DegenerateInput
/// (either side constant).
double spearman(std::span<const double> xs, std::span<const double> ys);

}  // namespace mmshap
