#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mmshap/oracle.hpp"

// Newline-delimited JSON protocol between the engine and out-of-process
// oracles. Every frame is one compact JSON object on one line; keys are
// emitted in sorted order so transcripts are byte-stable.
//
//   > {"protocol":1,"type":"hello"}
//   < {"batch_limit":B,"score_kind":"probability","type":"ready"}
//   > {"assets":{...},"sample":{...},"type":"register"}
//   < {"sample_id":"...","type":"registered"}            (optional "tokens")
//   > {"requests":[{"mask":"hex","request_id":k,"sample_id":"..."}],"type":"eval"}
//   < {"responses":[{"request_id":k,"value":v}],"type":"values"}
//   < {"code":"...","message":"...","request_id":k,"type":"error"}
//
// Masks are hex strings, most significant digit first, token 0 in the least
// significant bit, exactly ceil(n_tokens / 4) lowercase digits.
namespace mmshap::wire {

inline constexpr int kProtocolVersion = 1;

std::string hello_frame();
std::string ready_frame(const OracleInfo& info);
std::string register_frame(const TokenizedSample& sample, const nlohmann::json& assets);
std::string registered_frame(const Registration& reg);
std::string eval_frame(std::span<const OracleRequest> requests);
std::string values_frame(std::span<const OracleResponse> responses);
std::string error_frame(std::optional<std::uint64_t> request_id, std::string_view code,
                        std::string_view message);

/// Parses one frame. Throws ProtocolViolation on malformed JSON or a missing
/// "type"; converts an error frame into the matching Error.
nlohmann::json parse_frame(std::string_view line);

OracleInfo parse_ready(std::string_view line);
Registration parse_registered(std::string_view line, std::string_view expected_sample_id);
std::vector<OracleResponse> parse_values(std::string_view line);

/// Serves any in-process Oracle over the protocol, one frame at a time.
class ProtocolServer {
public:
    explicit ProtocolServer(Oracle& oracle) : oracle_(oracle) {}

    /// Handles one request frame and returns the reply frame (no newline).
    /// Errors are reported as error frames, never thrown.
    std::string handle(std::string_view line);

private:
    std::string handle_register(const nlohmann::json& frame);
    std::string handle_eval(const nlohmann::json& frame);

    Oracle& oracle_;
    std::mutex mutex_;
    std::unordered_map<std::string, std::size_t> token_counts_;
};

/// Carries one request frame to the oracle and returns its reply frame.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::string roundtrip(const std::string& frame) = 0;
    /// True when independent roundtrips may run concurrently.
    virtual bool concurrent() const { return false; }
};

/// Child process speaking the protocol on stdin/stdout; launched via /bin/sh -c.
class ProcessTransport : public Transport {
public:
    ProcessTransport(const std::string& command, std::chrono::milliseconds timeout);
    ~ProcessTransport() override;
    ProcessTransport(const ProcessTransport&) = delete;
    ProcessTransport& operator=(const ProcessTransport&) = delete;

    std::string roundtrip(const std::string& frame) override;

private:
    std::string read_line();

    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::chrono::milliseconds timeout_;
    std::string buffer_;
};

/// Each frame is POSTed as the request body; the response body is the reply.
class HttpTransport : public Transport {
public:
    HttpTransport(const std::string& url, std::chrono::milliseconds timeout);
    std::string roundtrip(const std::string& frame) override;
    bool concurrent() const override { return true; }

private:
    std::string scheme_host_port_;
    std::string path_;
    std::chrono::milliseconds timeout_;
};

/// In-process transport straight into a ProtocolServer, optionally recording
/// the transcript as "> frame" / "< reply" lines.
class LoopbackTransport : public Transport {
public:
    explicit LoopbackTransport(ProtocolServer& server, std::vector<std::string>* transcript = nullptr)
        : server_(server), transcript_(transcript) {}

    std::string roundtrip(const std::string& frame) override;

private:
    ProtocolServer& server_;
    std::vector<std::string>* transcript_;
};

/// Oracle client over a Transport. Performs the hello/ready handshake on
/// construction.
class RemoteOracle : public Oracle {
public:
    explicit RemoteOracle(std::unique_ptr<Transport> transport);

    OracleInfo info() const override { return info_; }

protected:
    Registration do_register(const TokenizedSample& sample, const nlohmann::json& assets) override;
    std::vector<OracleResponse> do_evaluate(std::span<const OracleRequest> requests) override;

private:
    std::string exchange(const std::string& frame);

    std::unique_ptr<Transport> transport_;
    std::mutex transport_mutex_;
    OracleInfo info_;
};

}  // namespace mmshap::wire
