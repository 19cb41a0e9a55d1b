#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmshap/core_types.hpp"

namespace mmshap {

struct OracleRequest {
    std::uint64_t request_id = 0;
    std::string sample_id;
    CoalitionMask mask;
};

struct OracleResponse {
    std::uint64_t request_id = 0;
    double value = 0.0;
};

/// Declares whether val is a probability (threshold metrics make sense) or an
/// unbounded score such as a contrastive similarity.
enum class ScoreKind { probability, unbounded };

std::string_view score_kind_name(ScoreKind kind);
ScoreKind score_kind_from_name(std::string_view name);

struct OracleInfo {
    int batch_limit = 1;  // max concurrently in-flight batches
    ScoreKind score_kind = ScoreKind::unbounded;
};

/// Registration result. An oracle that tokenizes on its own side reports the
/// realized text tokens so the engine can rebuild the sample to match.
struct Registration {
    std::string sample_id;
    std::optional<std::vector<TextTokenSpec>> realized_text;
};

/// Black-box value function val(S). Batches are the only evaluation API.
///
/// Public entry points are non-virtual: they bound in-flight batches to
/// info().batch_limit and validate responses (one per request, matched by
/// request_id, finite values) before handing them back in request order.
/// Implementations must be deterministic per run and safe to call from
/// several threads.
class Oracle {
public:
    virtual ~Oracle() = default;

    virtual OracleInfo info() const = 0;

    Registration register_sample(const TokenizedSample& sample,
                                 const nlohmann::json& assets = nlohmann::json::object());

    /// Returns responses aligned with `requests`.
    std::vector<OracleResponse> evaluate(std::span<const OracleRequest> requests);

    std::uint64_t next_request_id() { return next_request_id_.fetch_add(1) + 1; }

protected:
    virtual Registration do_register(const TokenizedSample& sample,
                                     const nlohmann::json& assets) = 0;
    virtual std::vector<OracleResponse> do_evaluate(std::span<const OracleRequest> requests) = 0;

private:
    void acquire_slot();
    void release_slot();

    std::atomic<std::uint64_t> next_request_id_{0};
    std::mutex gate_mutex_;
    std::condition_variable gate_cv_;
    int in_flight_ = 0;
};

/// Matches `responses` to `requests` by request_id and returns them in
/// request order. Throws ProtocolViolation on missing, duplicate, unknown or
/// non-finite responses.
std::vector<OracleResponse> match_responses(std::span<const OracleRequest> requests,
                                            std::vector<OracleResponse> responses);

}  // namespace mmshap
