#pragma once

#include <memory>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mmshap/oracle.hpp"

namespace mmshap {

/// In-process oracle whose value function is a closed-form cooperative game
/// over the tokens of each registered sample.
class GameOracle : public Oracle {
public:
    explicit GameOracle(OracleInfo info = {64, ScoreKind::unbounded}) : info_(info) {}

    OracleInfo info() const override { return info_; }

    /// val(S) for a registered (or any validated) sample; pure.
    virtual double value(const TokenizedSample& sample, const CoalitionMask& mask) const = 0;

    /// Rejects samples the game is not defined on. Called at registration.
    virtual void check_sample(const TokenizedSample&) const {}

protected:
    Registration do_register(const TokenizedSample& sample, const nlohmann::json& assets) override;
    std::vector<OracleResponse> do_evaluate(std::span<const OracleRequest> requests) override;

private:
    OracleInfo info_;
    mutable std::shared_mutex samples_mutex_;
    std::unordered_map<std::string, TokenizedSample> samples_;
};

using GamePtr = std::shared_ptr<GameOracle>;

/// val(S) = bias + sum of weights[j] over present maskable tokens.
GamePtr linear_oracle(std::vector<double> weights, double bias = 0.0);

struct InteractionPair {
    std::size_t i = 0;
    std::size_t j = 0;
    double strength = 0.0;
};

/// val(S) = sum of strength over pairs with both tokens present.
GamePtr interaction_oracle(std::vector<InteractionPair> pairs);

GamePtr constant_oracle(double value);

/// Evaluates `inner` with every maskable token outside `keep` forced masked,
/// so the value depends on the kept modality only.
GamePtr unimodal_oracle(Modality keep, GamePtr inner);

/// scale * inner + shift.
GamePtr affine_oracle(GamePtr inner, double scale, double shift);

/// a + b, evaluated coalition by coalition.
GamePtr sum_oracle(GamePtr a, GamePtr b);

/// Cross-modal symmetric game in [0, 1]: with t and i the present fractions
/// of maskable text and image tokens,
///   val = 0.5 * t * i + 0.25 * (t^2 + i^2).
/// Its exact Shapley mass splits evenly between the two modalities for any
/// token counts.
GamePtr mirror_oracle();

/// Logistic of a linear game whose weights are derived from token labels and
/// positions, so any sample gets a reproducible non-trivial game.
GamePtr hashed_logistic_oracle(std::uint64_t salt = 0);

/// Resolves builtin names: linear, unimodal-text, unimodal-image, mirror,
/// constant. Throws ConfigError for unknown names.
std::shared_ptr<Oracle> make_builtin_oracle(std::string_view name);
std::vector<std::string> builtin_oracle_names();

/// Pass-through oracle that records every coalition it is asked to evaluate.
class RecordingOracle : public Oracle {
public:
    explicit RecordingOracle(std::shared_ptr<Oracle> inner) : inner_(std::move(inner)) {}

    OracleInfo info() const override { return inner_->info(); }

    std::size_t calls() const;
    std::size_t unique_masks() const;
    std::vector<OracleRequest> log() const;
    void clear();

protected:
    Registration do_register(const TokenizedSample& sample, const nlohmann::json& assets) override;
    std::vector<OracleResponse> do_evaluate(std::span<const OracleRequest> requests) override;

private:
    std::shared_ptr<Oracle> inner_;
    mutable std::mutex mutex_;
    std::vector<OracleRequest> log_;
};

}  // namespace mmshap
