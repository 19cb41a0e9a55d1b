#include "mmshap/mm_scoring.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace mmshap {

double MMShapScore::v_shap() const {
    const bool bimodal = proportion.size() == 2 && proportion.count(Modality::text()) &&
                         proportion.count(Modality::image());
    if (bimodal) return 100.0 - t_shap;
    auto it = proportion.find(Modality::image());
    return it == proportion.end() ? 0.0 : 100.0 * it->second;
}

MMShapScore mm_shap(const ShapleyAttribution& attr, const TokenizedSample& sample) {
    if (attr.phi.size() != sample.token_count()) {
        throw Error(Errc::TokenCountMismatch, "attribution has " + std::to_string(attr.phi.size()) +
                                                  " values for " +
                                                  std::to_string(sample.token_count()) + " tokens");
    }
    MMShapScore score;
    score.sample_id = sample.sample_id;
    for (std::size_t j = 0; j < sample.token_count(); ++j) {
        const Token& tok = sample.tokens[j];
        if (!tok.maskable) continue;
        score.phi_abs[tok.modality] += std::abs(attr.phi[j]);
    }
    if (score.phi_abs.size() < 2) {
        throw Error(Errc::SingleModality,
                    "sample '" + sample.sample_id + "' has maskable tokens of fewer than two modalities");
    }
    double total = 0.0;
    for (const auto& [m, v] : score.phi_abs) total += v;
    if (!(total > 0.0)) {
        throw Error(Errc::AllZeroContributions,
                    "sample '" + sample.sample_id + "' has no non-zero contribution");
    }
    for (const auto& [m, v] : score.phi_abs) score.proportion[m] = v / total;
    auto text = score.proportion.find(Modality::text());
    score.t_shap = text == score.proportion.end() ? 0.0 : 100.0 * text->second;
    return score;
}

std::string_view split_name(Split split) {
    switch (split) {
        case Split::caption: return "caption";
        case Split::foil: return "foil";
        case Split::all: return "all";
    }
    return "all";
}

Split split_from_name(std::string_view name) {
    if (name == "caption") return Split::caption;
    if (name == "foil") return Split::foil;
    if (name == "all") return Split::all;
    throw Error(Errc::ConfigError, "unknown split '" + std::string(name) + "'");
}

DatasetMMStats aggregate(std::span<const MMShapScore> scores, Split split) {
    if (scores.empty()) throw Error(Errc::EmptyInput, "no scores to aggregate");
    DatasetMMStats stats;
    stats.split = split;
    stats.per_sample.assign(scores.begin(), scores.end());

    // Summing in sorted order keeps the result independent of input order.
    std::multiset<double> values;
    for (const MMShapScore& s : scores) values.insert(s.t_shap);
    double sum = 0.0;
    for (double v : values) sum += v;
    const double n = static_cast<double>(values.size());
    stats.mean_t_shap = sum / n;
    double sq = 0.0;
    for (double v : values) sq += (v - stats.mean_t_shap) * (v - stats.mean_t_shap);
    stats.stdev_t_shap = std::sqrt(sq / n);
    return stats;
}

std::string format_percent(double percent) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", percent);
    return buf;
}

void to_json(nlohmann::json& j, const MMShapScore& score) {
    nlohmann::json abs = nlohmann::json::object();
    nlohmann::json prop = nlohmann::json::object();
    for (const auto& [m, v] : score.phi_abs) abs[m.name] = v;
    for (const auto& [m, v] : score.proportion) prop[m.name] = v;
    j = nlohmann::json{{"sample_id", score.sample_id},
                       {"phi_abs", std::move(abs)},
                       {"proportion", std::move(prop)},
                       {"t_shap", score.t_shap}};
}

void from_json(const nlohmann::json& j, MMShapScore& score) {
    score.sample_id = j.at("sample_id").get<std::string>();
    score.phi_abs.clear();
    score.proportion.clear();
    for (const auto& [k, v] : j.at("phi_abs").items()) score.phi_abs[Modality{k}] = v.get<double>();
    for (const auto& [k, v] : j.at("proportion").items()) score.proportion[Modality{k}] = v.get<double>();
    score.t_shap = j.at("t_shap").get<double>();
}

}  // namespace mmshap
