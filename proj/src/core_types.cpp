#include "mmshap/core_types.hpp"

#include <algorithm>
#include <atomic>
#include <bit>

namespace mmshap {

std::string_view errc_name(Errc code) {
    switch (code) {
        case Errc::DuplicateIndex: return "DuplicateIndex";
        case Errc::IndexGap: return "IndexGap";
        case Errc::EmptySample: return "EmptySample";
        case Errc::UnknownModality: return "UnknownModality";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::IndexOutOfRange: return "IndexOutOfRange";
        case Errc::UnknownSample: return "UnknownSample";
        case Errc::OracleTimeout: return "OracleTimeout";
        case Errc::ProtocolViolation: return "ProtocolViolation";
        case Errc::OracleError: return "OracleError";
        case Errc::TokenizationMismatch: return "TokenizationMismatch";
        case Errc::TooManyTokens: return "TooManyTokens";
        case Errc::BudgetTooSmall: return "BudgetTooSmall";
        case Errc::NoMaskableText: return "NoMaskableText";
        case Errc::SingleModality: return "SingleModality";
        case Errc::AllZeroContributions: return "AllZeroContributions";
        case Errc::TokenCountMismatch: return "TokenCountMismatch";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::DegenerateInput: return "DegenerateInput";
        case Errc::FileNotFound: return "FileNotFound";
        case Errc::ParseError: return "ParseError";
        case Errc::MissingAttributions: return "MissingAttributions";
        case Errc::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

std::size_t TokenizedSample::maskable_count() const {
    return static_cast<std::size_t>(
        std::count_if(tokens.begin(), tokens.end(), [](const Token& t) { return t.maskable; }));
}

std::vector<std::size_t> TokenizedSample::maskable_positions() const {
    std::vector<std::size_t> out;
    out.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].maskable) out.push_back(i);
    }
    return out;
}

TokenizedSample validate_sample(TokenizedSample sample) {
    std::vector<bool> seen(sample.tokens.size(), false);
    for (const Token& t : sample.tokens) {
        if (t.modality.name.empty()) {
            throw Error(Errc::UnknownModality,
                        "token " + std::to_string(t.index) + " has an empty modality");
        }
        if (t.index < seen.size()) {
            if (seen[t.index]) {
                throw Error(Errc::DuplicateIndex,
                            "token index " + std::to_string(t.index) + " appears twice");
            }
            seen[t.index] = true;
        }
    }
    for (std::size_t i = 0; i < sample.tokens.size(); ++i) {
        if (sample.tokens[i].index != i) {
            throw Error(Errc::IndexGap, "token at position " + std::to_string(i) +
                                            " has index " + std::to_string(sample.tokens[i].index));
        }
    }

    sample.n_text = 0;
    sample.n_image = 0;
    for (const Token& t : sample.tokens) {
        if (!t.maskable) continue;
        if (t.modality == Modality::text()) ++sample.n_text;
        if (t.modality == Modality::image()) ++sample.n_image;
    }
    if (sample.maskable_count() == 0) {
        throw Error(Errc::EmptySample, "sample '" + sample.sample_id + "' has no maskable tokens");
    }
    return sample;
}

CoalitionMask::CoalitionMask(std::size_t n_tokens, bool present)
    : size_(n_tokens), words_((n_tokens + 63) / 64, present ? ~std::uint64_t{0} : 0) {
    if (present && n_tokens % 64 != 0) {
        words_.back() &= (std::uint64_t{1} << (n_tokens % 64)) - 1;
    }
}

void CoalitionMask::set(std::size_t i, bool present) {
    const std::uint64_t bit = std::uint64_t{1} << (i % 64);
    if (present) {
        words_[i / 64] |= bit;
    } else {
        words_[i / 64] &= ~bit;
    }
}

std::size_t CoalitionMask::count() const {
    std::size_t n = 0;
    for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

std::string CoalitionMask::to_hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    const std::size_t n_digits = (size_ + 3) / 4;
    std::string out(n_digits, '0');
    for (std::size_t d = 0; d < n_digits; ++d) {
        // digit d (counting from the least significant end) holds bits 4d..4d+3
        const std::size_t bit = 4 * d;
        const unsigned nibble = static_cast<unsigned>((words_[bit / 64] >> (bit % 64)) & 0xF);
        out[n_digits - 1 - d] = digits[nibble];
    }
    return out;
}

CoalitionMask CoalitionMask::from_hex(std::string_view hex, std::size_t n_tokens) {
    const std::size_t n_digits = (n_tokens + 3) / 4;
    if (hex.size() != n_digits) {
        throw Error(Errc::ProtocolViolation, "mask hex has " + std::to_string(hex.size()) +
                                                 " digits, expected " + std::to_string(n_digits));
    }
    CoalitionMask mask(n_tokens, false);
    for (std::size_t d = 0; d < n_digits; ++d) {
        const char c = hex[n_digits - 1 - d];
        unsigned nibble = 0;
        if (c >= '0' && c <= '9') {
            nibble = static_cast<unsigned>(c - '0');
        } else if (c >= 'a' && c <= 'f') {
            nibble = static_cast<unsigned>(c - 'a' + 10);
        } else if (c >= 'A' && c <= 'F') {
            nibble = static_cast<unsigned>(c - 'A' + 10);
        } else {
            throw Error(Errc::ProtocolViolation, std::string("invalid hex digit '") + c + "' in mask");
        }
        for (unsigned b = 0; b < 4; ++b) {
            if (!((nibble >> b) & 1U)) continue;
            const std::size_t pos = 4 * d + b;
            if (pos >= n_tokens) {
                throw Error(Errc::ProtocolViolation, "mask sets bit " + std::to_string(pos) +
                                                         " beyond token count " +
                                                         std::to_string(n_tokens));
            }
            mask.set(pos);
        }
    }
    return mask;
}

std::size_t CoalitionMaskHash::operator()(const CoalitionMask& m) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ m.size();
    for (std::uint64_t w : m.words()) {
        h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
}

CoalitionMask empty_coalition(const TokenizedSample& sample) {
    CoalitionMask mask(sample.token_count(), false);
    for (std::size_t i = 0; i < sample.tokens.size(); ++i) {
        if (!sample.tokens[i].maskable) mask.set(i);
    }
    return mask;
}

CoalitionMask full_coalition(const TokenizedSample& sample) {
    return CoalitionMask(sample.token_count(), true);
}

namespace {
std::atomic<MaskAuditHook> g_mask_audit_hook{nullptr};
}

void set_mask_audit_hook(MaskAuditHook hook) { g_mask_audit_hook.store(hook); }

void audit_mask(const TokenizedSample& sample, const CoalitionMask& mask) {
    if (auto hook = g_mask_audit_hook.load(std::memory_order_relaxed)) hook(sample, mask);
}

std::string_view estimator_name(EstimatorKind kind) {
    return kind == EstimatorKind::exact ? "exact" : "permutation-mc";
}

EstimatorKind estimator_from_name(std::string_view name) {
    if (name == "exact") return EstimatorKind::exact;
    if (name == "permutation-mc") return EstimatorKind::permutation_mc;
    throw Error(Errc::ParseError, "unknown estimator tag '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const Token& token) {
    j = nlohmann::json{{"index", token.index},
                       {"modality", token.modality.name},
                       {"maskable", token.maskable},
                       {"label", token.label},
                       {"payload_ref", token.payload_ref}};
}

void from_json(const nlohmann::json& j, Token& token) {
    token.index = j.at("index").get<std::size_t>();
    token.modality = Modality{j.at("modality").get<std::string>()};
    token.maskable = j.at("maskable").get<bool>();
    token.label = j.at("label").get<std::string>();
    token.payload_ref = j.at("payload_ref").get<std::string>();
}

void to_json(nlohmann::json& j, const TokenizedSample& sample) {
    j = nlohmann::json{{"sample_id", sample.sample_id},
                       {"tokens", sample.tokens},
                       {"metadata", sample.metadata}};
}

void from_json(const nlohmann::json& j, TokenizedSample& sample) {
    TokenizedSample parsed;
    parsed.sample_id = j.at("sample_id").get<std::string>();
    parsed.tokens = j.at("tokens").get<std::vector<Token>>();
    if (j.contains("metadata")) {
        parsed.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    }
    sample = validate_sample(std::move(parsed));
}

void to_json(nlohmann::json& j, const ShapleyAttribution& attr) {
    j = nlohmann::json{{"sample_id", attr.sample_id},
                       {"phi", attr.phi},
                       {"base_value", attr.base_value},
                       {"full_value", attr.full_value},
                       {"estimator", estimator_name(attr.estimator)},
                       {"n_coalitions", attr.n_coalitions},
                       {"seed", attr.seed},
                       {"oracle_calls", attr.oracle_calls}};
}

void from_json(const nlohmann::json& j, ShapleyAttribution& attr) {
    attr.sample_id = j.at("sample_id").get<std::string>();
    attr.phi = j.at("phi").get<std::vector<double>>();
    attr.base_value = j.at("base_value").get<double>();
    attr.full_value = j.at("full_value").get<double>();
    attr.estimator = estimator_from_name(j.at("estimator").get<std::string>());
    attr.n_coalitions = j.at("n_coalitions").get<std::uint64_t>();
    attr.seed = j.at("seed").get<std::uint64_t>();
    attr.oracle_calls = j.value("oracle_calls", std::uint64_t{0});
}

}  // namespace mmshap
