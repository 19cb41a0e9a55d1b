#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mmshap/error.hpp"

namespace mmshap {

/// Open set of modality identifiers. "text" and "image" are the canonical two.
struct Modality {
    std::string name;

    static Modality text() { return {"text"}; }
    static Modality image() { return {"image"}; }

    auto operator<=>(const Modality&) const = default;
};

struct Token {
    std::size_t index = 0;
    Modality modality;
    bool maskable = true;
    std::string label;
    // Opaque to the engine; only the oracle interprets it.
    std::string payload_ref;

    bool operator==(const Token&) const = default;
};

/// One text token as produced by a tokenizer, before it is placed in a sample.
struct TextTokenSpec {
    std::string label;
    std::string payload_ref;
    bool is_special = false;

    bool operator==(const TextTokenSpec&) const = default;
};

struct TokenizedSample {
    std::string sample_id;
    std::vector<Token> tokens;
    std::size_t n_text = 0;   // maskable text tokens
    std::size_t n_image = 0;  // maskable image tokens
    std::map<std::string, std::string> metadata;

    std::size_t token_count() const { return tokens.size(); }
    std::size_t maskable_count() const;
    /// Token positions that take part in coalitions, ascending.
    std::vector<std::size_t> maskable_positions() const;

    bool operator==(const TokenizedSample&) const = default;
};

/// Checks index uniqueness/contiguity, modality names and p >= 1, and
/// recomputes n_text / n_image from the tokens.
TokenizedSample validate_sample(TokenizedSample sample);

/// Presence bits for one oracle call; bit i = token i is unmasked.
class CoalitionMask {
public:
    CoalitionMask() = default;
    explicit CoalitionMask(std::size_t n_tokens, bool present = false);

    std::size_t size() const { return size_; }
    bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
    void set(std::size_t i, bool present = true);
    std::size_t count() const;
    const std::vector<std::uint64_t>& words() const { return words_; }

    /// Big-endian hex of the bit vector with token 0 as the least significant
    /// bit, lowercase, exactly ceil(size/4) digits.
    std::string to_hex() const;
    /// Inverse of to_hex. Throws ProtocolViolation on wrong length, non-hex
    /// digits or bits set beyond `n_tokens`.
    static CoalitionMask from_hex(std::string_view hex, std::size_t n_tokens);

    bool operator==(const CoalitionMask&) const = default;

private:
    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

struct CoalitionMaskHash {
    std::size_t operator()(const CoalitionMask& m) const noexcept;
};

/// Mask with every non-maskable token present and every maskable token masked.
CoalitionMask empty_coalition(const TokenizedSample& sample);
CoalitionMask full_coalition(const TokenizedSample& sample);

using MaskAuditHook = void (*)(const TokenizedSample&, const CoalitionMask&);

/// Installs a process-wide hook invoked for every coalition the engine sends
/// to an oracle. Pass nullptr to remove it. Intended for test audits.
void set_mask_audit_hook(MaskAuditHook hook);
void audit_mask(const TokenizedSample& sample, const CoalitionMask& mask);

enum class EstimatorKind { exact, permutation_mc };

std::string_view estimator_name(EstimatorKind kind);
EstimatorKind estimator_from_name(std::string_view name);

struct ShapleyAttribution {
    std::string sample_id;
    std::vector<double> phi;  // one per token, zero for non-maskable tokens
    double base_value = 0.0;
    double full_value = 0.0;
    EstimatorKind estimator = EstimatorKind::exact;
    std::uint64_t n_coalitions = 0;
    std::uint64_t seed = 0;
    std::uint64_t oracle_calls = 0;  // unique coalitions evaluated

    bool operator==(const ShapleyAttribution&) const = default;
};

void to_json(nlohmann::json& j, const Token& token);
void from_json(const nlohmann::json& j, Token& token);
void to_json(nlohmann::json& j, const TokenizedSample& sample);
/// Parses and validates; n_text / n_image are derived, not read.
void from_json(const nlohmann::json& j, TokenizedSample& sample);
void to_json(nlohmann::json& j, const ShapleyAttribution& attr);
void from_json(const nlohmann::json& j, ShapleyAttribution& attr);

}  // namespace mmshap
