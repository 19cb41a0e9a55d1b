#include "mmshap/synthetic_oracles.hpp"

#include <cmath>
#include <mutex>
#include <set>

#include "mmshap/hashing.hpp"

namespace mmshap {

Registration GameOracle::do_register(const TokenizedSample& sample, const nlohmann::json&) {
    check_sample(sample);
    std::unique_lock lock(samples_mutex_);
    samples_.insert_or_assign(sample.sample_id, sample);
    return {sample.sample_id, std::nullopt};
}

std::vector<OracleResponse> GameOracle::do_evaluate(std::span<const OracleRequest> requests) {
    std::vector<OracleResponse> out;
    out.reserve(requests.size());
    std::shared_lock lock(samples_mutex_);
    const TokenizedSample* cached = nullptr;
    for (const OracleRequest& req : requests) {
        if (!cached || cached->sample_id != req.sample_id) {
            auto it = samples_.find(req.sample_id);
            if (it == samples_.end()) {
                throw Error(Errc::UnknownSample, "sample '" + req.sample_id + "' is not registered");
            }
            cached = &it->second;
        }
        if (req.mask.size() != cached->token_count()) {
            throw Error(Errc::ProtocolViolation, "mask length " + std::to_string(req.mask.size()) +
                                                     " does not match token count " +
                                                     std::to_string(cached->token_count()));
        }
        out.push_back({req.request_id, value(*cached, req.mask)});
    }
    return out;
}

namespace {

class LinearGame final : public GameOracle {
public:
    LinearGame(std::vector<double> weights, double bias)
        : weights_(std::move(weights)), bias_(bias) {}

    void check_sample(const TokenizedSample& sample) const override {
        if (weights_.size() != sample.token_count()) {
            throw Error(Errc::LengthMismatch, "linear oracle has " + std::to_string(weights_.size()) +
                                                  " weights for " +
                                                  std::to_string(sample.token_count()) + " tokens");
        }
    }

    double value(const TokenizedSample& sample, const CoalitionMask& mask) const override {
        check_sample(sample);
        double v = bias_;
        for (std::size_t j = 0; j < weights_.size(); ++j) {
            if (sample.tokens[j].maskable && mask.test(j)) v += weights_[j];
        }
        return v;
    }

private:
    std::vector<double> weights_;
    double bias_;
};

class InteractionGame final : public GameOracle {
public:
    explicit InteractionGame(std::vector<InteractionPair> pairs) : pairs_(std::move(pairs)) {}

    void check_sample(const TokenizedSample& sample) const override {
        for (const InteractionPair& p : pairs_) {
            for (std::size_t idx : {p.i, p.j}) {
                if (idx >= sample.token_count() || !sample.tokens[idx].maskable) {
                    throw Error(Errc::IndexOutOfRange,
                                "interaction index " + std::to_string(idx) +
                                    " is not a maskable token of '" + sample.sample_id + "'");
                }
            }
        }
    }

    double value(const TokenizedSample&, const CoalitionMask& mask) const override {
        double v = 0.0;
        for (const InteractionPair& p : pairs_) {
            if (mask.test(p.i) && mask.test(p.j)) v += p.strength;
        }
        return v;
    }

private:
    std::vector<InteractionPair> pairs_;
};

class ConstantGame final : public GameOracle {
public:
    explicit ConstantGame(double c) : GameOracle({64, ScoreKind::probability}), c_(c) {}
    double value(const TokenizedSample&, const CoalitionMask&) const override { return c_; }

private:
    double c_;
};

class UnimodalGame final : public GameOracle {
public:
    UnimodalGame(Modality keep, GamePtr inner)
        : GameOracle(inner->info()), keep_(std::move(keep)), inner_(std::move(inner)) {}

    void check_sample(const TokenizedSample& sample) const override { inner_->check_sample(sample); }

    double value(const TokenizedSample& sample, const CoalitionMask& mask) const override {
        CoalitionMask restricted = mask;
        for (std::size_t j = 0; j < sample.token_count(); ++j) {
            const Token& t = sample.tokens[j];
            if (t.maskable && t.modality != keep_) restricted.set(j, false);
        }
        return inner_->value(sample, restricted);
    }

private:
    Modality keep_;
    GamePtr inner_;
};

class AffineGame final : public GameOracle {
public:
    AffineGame(GamePtr inner, double scale, double shift)
        : GameOracle({64, ScoreKind::unbounded}), inner_(std::move(inner)), scale_(scale), shift_(shift) {}

    void check_sample(const TokenizedSample& sample) const override { inner_->check_sample(sample); }

    double value(const TokenizedSample& sample, const CoalitionMask& mask) const override {
        return scale_ * inner_->value(sample, mask) + shift_;
    }

private:
    GamePtr inner_;
    double scale_;
    double shift_;
};

class SumGame final : public GameOracle {
public:
    SumGame(GamePtr a, GamePtr b) : a_(std::move(a)), b_(std::move(b)) {}

    void check_sample(const TokenizedSample& sample) const override {
        a_->check_sample(sample);
        b_->check_sample(sample);
    }

    double value(const TokenizedSample& sample, const CoalitionMask& mask) const override {
        return a_->value(sample, mask) + b_->value(sample, mask);
    }

private:
    GamePtr a_;
    GamePtr b_;
};

class MirrorGame final : public GameOracle {
public:
    MirrorGame() : GameOracle({64, ScoreKind::probability}) {}

    double value(const TokenizedSample& sample, const CoalitionMask& mask) const override {
        std::size_t text_present = 0;
        std::size_t image_present = 0;
        for (std::size_t j = 0; j < sample.token_count(); ++j) {
            const Token& tok = sample.tokens[j];
            if (!tok.maskable || !mask.test(j)) continue;
            if (tok.modality == Modality::text()) ++text_present;
            if (tok.modality == Modality::image()) ++image_present;
        }
        const double t = sample.n_text ? double(text_present) / double(sample.n_text) : 0.0;
        const double i = sample.n_image ? double(image_present) / double(sample.n_image) : 0.0;
        return 0.5 * t * i + 0.25 * (t * t + i * i);
    }
};

class HashedLogisticGame final : public GameOracle {
public:
    explicit HashedLogisticGame(std::uint64_t salt)
        : GameOracle({64, ScoreKind::probability}), salt_(salt) {}

    double value(const TokenizedSample& sample, const CoalitionMask& mask) const override {
        double z = -0.25;
        for (std::size_t j = 0; j < sample.token_count(); ++j) {
            const Token& tok = sample.tokens[j];
            if (tok.maskable && mask.test(j)) z += weight(tok);
        }
        return 1.0 / (1.0 + std::exp(-z));
    }

private:
    double weight(const Token& tok) const {
        const std::uint64_t h = splitmix64(
            salt_ ^ fnv1a64(tok.modality.name + "|" + tok.label + "|" + std::to_string(tok.index)));
        const double magnitude = 0.1 + 0.6 * unit_interval(splitmix64(h));
        // Mostly positive evidence with occasional negative tokens.
        return (h & 0x7) == 0 ? -magnitude : magnitude;
    }

    std::uint64_t salt_;
};

}  // namespace

GamePtr linear_oracle(std::vector<double> weights, double bias) {
    return std::make_shared<LinearGame>(std::move(weights), bias);
}

GamePtr interaction_oracle(std::vector<InteractionPair> pairs) {
    return std::make_shared<InteractionGame>(std::move(pairs));
}

GamePtr constant_oracle(double value) { return std::make_shared<ConstantGame>(value); }

GamePtr unimodal_oracle(Modality keep, GamePtr inner) {
    return std::make_shared<UnimodalGame>(std::move(keep), std::move(inner));
}

GamePtr affine_oracle(GamePtr inner, double scale, double shift) {
    return std::make_shared<AffineGame>(std::move(inner), scale, shift);
}

GamePtr sum_oracle(GamePtr a, GamePtr b) {
    return std::make_shared<SumGame>(std::move(a), std::move(b));
}

GamePtr mirror_oracle() { return std::make_shared<MirrorGame>(); }

GamePtr hashed_logistic_oracle(std::uint64_t salt) {
    return std::make_shared<HashedLogisticGame>(salt);
}

std::vector<std::string> builtin_oracle_names() {
    return {"constant", "linear", "mirror", "unimodal-image", "unimodal-text"};
}

std::shared_ptr<Oracle> make_builtin_oracle(std::string_view name) {
    if (name == "linear") return hashed_logistic_oracle();
    if (name == "unimodal-text") return unimodal_oracle(Modality::text(), hashed_logistic_oracle());
    if (name == "unimodal-image") return unimodal_oracle(Modality::image(), hashed_logistic_oracle());
    if (name == "mirror") return mirror_oracle();
    if (name == "constant") return constant_oracle(0.5);
    throw Error(Errc::ConfigError, "unknown builtin oracle '" + std::string(name) + "'");
}

Registration RecordingOracle::do_register(const TokenizedSample& sample,
                                          const nlohmann::json& assets) {
    return inner_->register_sample(sample, assets);
}

std::vector<OracleResponse> RecordingOracle::do_evaluate(std::span<const OracleRequest> requests) {
    {
        std::lock_guard lock(mutex_);
        log_.insert(log_.end(), requests.begin(), requests.end());
    }
    return inner_->evaluate(requests);
}

std::size_t RecordingOracle::calls() const {
    std::lock_guard lock(mutex_);
    return log_.size();
}

std::size_t RecordingOracle::unique_masks() const {
    std::lock_guard lock(mutex_);
    std::set<std::pair<std::string, std::string>> seen;
    for (const OracleRequest& r : log_) seen.emplace(r.sample_id, r.mask.to_hex());
    return seen.size();
}

std::vector<OracleRequest> RecordingOracle::log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

void RecordingOracle::clear() {
    std::lock_guard lock(mutex_);
    log_.clear();
}

}  // namespace mmshap
