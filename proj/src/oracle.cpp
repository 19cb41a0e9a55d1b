#include "mmshap/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace mmshap {

std::string_view score_kind_name(ScoreKind kind) {
    return kind == ScoreKind::probability ? "probability" : "unbounded";
}

ScoreKind score_kind_from_name(std::string_view name) {
    if (name == "probability") return ScoreKind::probability;
    if (name == "unbounded") return ScoreKind::unbounded;
    throw Error(Errc::ProtocolViolation, "unknown score kind '" + std::string(name) + "'");
}

Registration Oracle::register_sample(const TokenizedSample& sample, const nlohmann::json& assets) {
    acquire_slot();
    try {
        Registration reg = do_register(sample, assets);
        release_slot();
        return reg;
    } catch (...) {
        release_slot();
        throw;
    }
}

std::vector<OracleResponse> Oracle::evaluate(std::span<const OracleRequest> requests) {
    if (requests.empty()) return {};
    acquire_slot();
    std::vector<OracleResponse> raw;
    try {
        raw = do_evaluate(requests);
    } catch (...) {
        release_slot();
        throw;
    }
    release_slot();
    return match_responses(requests, std::move(raw));
}

void Oracle::acquire_slot() {
    const int limit = std::max(1, info().batch_limit);
    std::unique_lock lock(gate_mutex_);
    gate_cv_.wait(lock, [&] { return in_flight_ < limit; });
    ++in_flight_;
}

void Oracle::release_slot() {
    {
        std::lock_guard lock(gate_mutex_);
        --in_flight_;
    }
    gate_cv_.notify_one();
}

std::vector<OracleResponse> match_responses(std::span<const OracleRequest> requests,
                                            std::vector<OracleResponse> responses) {
    if (responses.size() != requests.size()) {
        throw Error(Errc::ProtocolViolation, "expected " + std::to_string(requests.size()) +
                                                 " responses, got " +
                                                 std::to_string(responses.size()));
    }
    std::unordered_map<std::uint64_t, std::size_t> slot;
    slot.reserve(requests.size());
    for (std::size_t i = 0; i < requests.size(); ++i) slot.emplace(requests[i].request_id, i);

    std::vector<OracleResponse> ordered(requests.size());
    std::vector<bool> filled(requests.size(), false);
    for (const OracleResponse& r : responses) {
        auto it = slot.find(r.request_id);
        if (it == slot.end()) {
            throw Error(Errc::ProtocolViolation,
                        "response for unknown request_id " + std::to_string(r.request_id));
        }
        if (filled[it->second]) {
            throw Error(Errc::ProtocolViolation,
                        "duplicate response for request_id " + std::to_string(r.request_id));
        }
        if (!std::isfinite(r.value)) {
            throw Error(Errc::ProtocolViolation,
                        "non-finite value for request_id " + std::to_string(r.request_id));
        }
        filled[it->second] = true;
        ordered[it->second] = r;
    }
    return ordered;
}

}  // namespace mmshap
