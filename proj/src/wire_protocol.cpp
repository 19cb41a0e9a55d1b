#include "mmshap/wire_protocol.hpp"

#include <array>

namespace mmshap::wire {

using nlohmann::json;

namespace {

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::strict); }

Errc errc_from_name(std::string_view name) {
    static constexpr std::array known = {
        Errc::DuplicateIndex,      Errc::IndexGap,          Errc::EmptySample,
        Errc::UnknownModality,     Errc::LengthMismatch,    Errc::IndexOutOfRange,
        Errc::UnknownSample,       Errc::OracleTimeout,     Errc::ProtocolViolation,
        Errc::TokenizationMismatch, Errc::ParseError,
    };
    for (Errc c : known) {
        if (errc_name(c) == name) return c;
    }
    return Errc::OracleError;
}

void expect_type(const json& frame, std::string_view type) {
    if (frame.at("type").get<std::string>() != type) {
        throw Error(Errc::ProtocolViolation, "expected '" + std::string(type) + "' frame, got '" +
                                                 frame.at("type").get<std::string>() + "'");
    }
}

}  // namespace

std::string hello_frame() { return dump({{"type", "hello"}, {"protocol", kProtocolVersion}}); }

std::string ready_frame(const OracleInfo& info) {
    return dump({{"type", "ready"},
                 {"batch_limit", info.batch_limit},
                 {"score_kind", score_kind_name(info.score_kind)}});
}

std::string register_frame(const TokenizedSample& sample, const json& assets) {
    return dump({{"type", "register"}, {"sample", sample}, {"assets", assets}});
}

std::string registered_frame(const Registration& reg) {
    json j{{"type", "registered"}, {"sample_id", reg.sample_id}};
    if (reg.realized_text) {
        json tokens = json::array();
        for (const TextTokenSpec& t : *reg.realized_text) {
            tokens.push_back({{"label", t.label}, {"payload_ref", t.payload_ref}, {"special", t.is_special}});
        }
        j["tokens"] = std::move(tokens);
    }
    return dump(j);
}

std::string eval_frame(std::span<const OracleRequest> requests) {
    json reqs = json::array();
    for (const OracleRequest& r : requests) {
        reqs.push_back({{"request_id", r.request_id}, {"sample_id", r.sample_id}, {"mask", r.mask.to_hex()}});
    }
    return dump({{"type", "eval"}, {"requests", std::move(reqs)}});
}

std::string values_frame(std::span<const OracleResponse> responses) {
    json resp = json::array();
    for (const OracleResponse& r : responses) {
        resp.push_back({{"request_id", r.request_id}, {"value", r.value}});
    }
    return dump({{"type", "values"}, {"responses", std::move(resp)}});
}

std::string error_frame(std::optional<std::uint64_t> request_id, std::string_view code,
                        std::string_view message) {
    json j{{"type", "error"}, {"code", code}, {"message", message}};
    j["request_id"] = request_id ? json(*request_id) : json(nullptr);
    return dump(j);
}

json parse_frame(std::string_view line) {
    json frame;
    try {
        frame = json::parse(line);
    } catch (const json::parse_error& e) {
        throw Error(Errc::ProtocolViolation, std::string("malformed frame: ") + e.what());
    }
    if (!frame.is_object() || !frame.contains("type") || !frame["type"].is_string()) {
        throw Error(Errc::ProtocolViolation, "frame without a string 'type'");
    }
    if (frame["type"] == "error") {
        const std::string code = frame.value("code", std::string("OracleError"));
        const std::string message = frame.value("message", std::string());
        throw Error(errc_from_name(code), "oracle error " + code + ": " + message);
    }
    return frame;
}

OracleInfo parse_ready(std::string_view line) {
    const json frame = parse_frame(line);
    try {
        expect_type(frame, "ready");
        OracleInfo info;
        info.batch_limit = frame.at("batch_limit").get<int>();
        if (info.batch_limit < 1) throw Error(Errc::ProtocolViolation, "batch_limit must be >= 1");
        if (frame.contains("score_kind")) {
            info.score_kind = score_kind_from_name(frame["score_kind"].get<std::string>());
        }
        return info;
    } catch (const json::exception& e) {
        throw Error(Errc::ProtocolViolation, std::string("bad ready frame: ") + e.what());
    }
}

Registration parse_registered(std::string_view line, std::string_view expected_sample_id) {
    const json frame = parse_frame(line);
    try {
        expect_type(frame, "registered");
        Registration reg;
        reg.sample_id = frame.at("sample_id").get<std::string>();
        if (reg.sample_id != expected_sample_id) {
            throw Error(Errc::ProtocolViolation, "registered '" + reg.sample_id + "', expected '" +
                                                     std::string(expected_sample_id) + "'");
        }
        if (frame.contains("tokens")) {
            std::vector<TextTokenSpec> tokens;
            for (const json& t : frame["tokens"]) {
                tokens.push_back({t.at("label").get<std::string>(),
                                  t.value("payload_ref", t.at("label").get<std::string>()),
                                  t.value("special", false)});
            }
            reg.realized_text = std::move(tokens);
        }
        return reg;
    } catch (const json::exception& e) {
        throw Error(Errc::ProtocolViolation, std::string("bad registered frame: ") + e.what());
    }
}

std::vector<OracleResponse> parse_values(std::string_view line) {
    const json frame = parse_frame(line);
    try {
        expect_type(frame, "values");
        std::vector<OracleResponse> out;
        for (const json& r : frame.at("responses")) {
            const json& v = r.at("value");
            if (!v.is_number()) {
                throw Error(Errc::ProtocolViolation, "response value is not a number");
            }
            out.push_back({r.at("request_id").get<std::uint64_t>(), v.get<double>()});
        }
        return out;
    } catch (const json::exception& e) {
        throw Error(Errc::ProtocolViolation, std::string("bad values frame: ") + e.what());
    }
}

std::string ProtocolServer::handle(std::string_view line) {
    json frame;
    try {
        frame = parse_frame(line);
    } catch (const Error& e) {
        return error_frame(std::nullopt, errc_name(e.code()), e.what());
    }
    const std::string type = frame["type"].get<std::string>();
    try {
        if (type == "hello") {
            if (frame.value("protocol", 0) != kProtocolVersion) {
                return error_frame(std::nullopt, "ProtocolViolation", "unsupported protocol version");
            }
            return ready_frame(oracle_.info());
        }
        if (type == "register") return handle_register(frame);
        if (type == "eval") return handle_eval(frame);
        return error_frame(std::nullopt, "ProtocolViolation", "unknown frame type '" + type + "'");
    } catch (const Error& e) {
        return error_frame(std::nullopt, errc_name(e.code()), e.what());
    } catch (const json::exception& e) {
        return error_frame(std::nullopt, "ProtocolViolation", e.what());
    }
}

std::string ProtocolServer::handle_register(const json& frame) {
    const TokenizedSample sample = frame.at("sample").get<TokenizedSample>();
    const json assets = frame.value("assets", json::object());
    Registration reg = oracle_.register_sample(sample, assets);
    {
        std::lock_guard lock(mutex_);
        token_counts_[sample.sample_id] = sample.token_count();
    }
    return registered_frame(reg);
}

std::string ProtocolServer::handle_eval(const json& frame) {
    std::vector<OracleRequest> requests;
    for (const json& r : frame.at("requests")) {
        OracleRequest req;
        req.request_id = r.at("request_id").get<std::uint64_t>();
        req.sample_id = r.at("sample_id").get<std::string>();
        std::size_t n_tokens = 0;
        {
            std::lock_guard lock(mutex_);
            auto it = token_counts_.find(req.sample_id);
            if (it == token_counts_.end()) {
                return error_frame(req.request_id, "UnknownSample",
                                   "sample '" + req.sample_id + "' is not registered");
            }
            n_tokens = it->second;
        }
        try {
            req.mask = CoalitionMask::from_hex(r.at("mask").get<std::string>(), n_tokens);
        } catch (const Error& e) {
            return error_frame(req.request_id, errc_name(e.code()), e.what());
        }
        requests.push_back(std::move(req));
    }
    try {
        const std::vector<OracleResponse> responses = oracle_.evaluate(requests);
        return values_frame(responses);
    } catch (const Error& e) {
        std::optional<std::uint64_t> id;
        if (!requests.empty()) id = requests.front().request_id;
        return error_frame(id, errc_name(e.code()), e.what());
    }
}

std::string LoopbackTransport::roundtrip(const std::string& frame) {
    std::string reply = server_.handle(frame);
    if (transcript_) {
        transcript_->push_back("> " + frame);
        transcript_->push_back("< " + reply);
    }
    return reply;
}

RemoteOracle::RemoteOracle(std::unique_ptr<Transport> transport) : transport_(std::move(transport)) {
    info_ = parse_ready(exchange(hello_frame()));
}

std::string RemoteOracle::exchange(const std::string& frame) {
    if (transport_->concurrent()) return transport_->roundtrip(frame);
    std::lock_guard lock(transport_mutex_);
    return transport_->roundtrip(frame);
}

Registration RemoteOracle::do_register(const TokenizedSample& sample, const json& assets) {
    return parse_registered(exchange(register_frame(sample, assets)), sample.sample_id);
}

std::vector<OracleResponse> RemoteOracle::do_evaluate(std::span<const OracleRequest> requests) {
    return parse_values(exchange(eval_frame(requests)));
}

}  // namespace mmshap::wire
