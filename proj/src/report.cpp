#include "mmshap/report.hpp"

#include "mmshap/hashing.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mmshap {

using nlohmann::json;

namespace {

template <typename T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> opt_get(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const SampleRecord& r) {
    j = json{{"record_id", r.record_id},
             {"sample_id", r.sample_id()},
             {"split", split_name(r.split)},
             {"task", r.task},
             {"text", r.text},
             {"image", r.image_ref},
             {"tiling", r.tiling},
             {"tokens", r.tokens},
             {"attribution", r.attribution},
             {"mm", r.mm ? json(*r.mm) : json(nullptr)},
             {"status", r.status},
             {"score", r.score()},
             {"correct", opt(r.correct)}};
}

void from_json(const json& j, SampleRecord& r) {
    r.record_id = j.at("record_id").get<std::string>();
    r.split = split_from_name(j.at("split").get<std::string>());
    r.task = j.at("task").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.image_ref = j.at("image").get<std::string>();
    r.tiling = j.at("tiling").get<TilingPlan>();
    r.tokens = j.at("tokens").get<std::vector<Token>>();
    r.attribution = j.at("attribution").get<ShapleyAttribution>();
    r.mm = opt_get<MMShapScore>(j, "mm");
    r.status = j.at("status").get<std::string>();
    r.correct = opt_get<bool>(j, "correct");
}

void to_json(json& j, const EvaluationReport& report) {
    json stats = json::object();
    for (const SplitStats& s : report.stats) {
        stats[std::string(split_name(s.split))] = {{"n_samples", s.n_samples},
                                                   {"n_all_zero", s.n_all_zero},
                                                   {"mean_t_shap", opt(s.mean_t_shap)},
                                                   {"stdev_t_shap", opt(s.stdev_t_shap)}};
    }
    const AccuracyStats& a = report.accuracy;
    json correlations = json::array();
    for (const CorrelationStat& c : report.correlations) {
        correlations.push_back(
            {{"split", split_name(c.split)}, {"n", c.n}, {"spearman", opt(c.rho)}, {"note", c.note}});
    }
    json failures = json::array();
    for (const Failure& f : report.failures) {
        failures.push_back({{"sample_id", f.sample_id}, {"code", f.code}, {"message", f.message}});
    }
    j = json{{"schema_version", report.schema_version},
             {"config", report.config},
             {"oracle", {{"batch_limit", report.oracle_info.batch_limit},
                         {"score_kind", score_kind_name(report.oracle_info.score_kind)}}},
             {"samples", report.samples},
             {"stats", std::move(stats)},
             {"accuracy", {{"n_pairs", a.n_pairs},
                           {"acc_r", opt(a.acc_r)},
                           {"acc_c", opt(a.acc_c)},
                           {"acc_f", opt(a.acc_f)},
                           {"acc", opt(a.acc)},
                           {"n_vqa", a.n_vqa},
                           {"vqa_accuracy", opt(a.vqa_accuracy)}}},
             {"correlations", std::move(correlations)},
             {"failures", std::move(failures)},
             {"aborted", report.aborted},
             {"runtime", {{"oracle_calls", report.oracle_calls},
                          {"wall_time_seconds", report.wall_time_seconds}}}};
}

void from_json(const json& j, EvaluationReport& report) {
    report.schema_version = j.at("schema_version").get<int>();
    if (report.schema_version != kReportSchemaVersion) {
        throw Error(Errc::ParseError, "unsupported report schema_version " +
                                          std::to_string(report.schema_version));
    }
    report.config = j.at("config");
    report.oracle_info.batch_limit = j.at("oracle").at("batch_limit").get<int>();
    report.oracle_info.score_kind =
        score_kind_from_name(j.at("oracle").at("score_kind").get<std::string>());
    report.samples = j.at("samples").get<std::vector<SampleRecord>>();
    report.stats.clear();
    for (const auto& [name, s] : j.at("stats").items()) {
        SplitStats st;
        st.split = split_from_name(name);
        st.n_samples = s.at("n_samples").get<std::size_t>();
        st.n_all_zero = s.at("n_all_zero").get<std::size_t>();
        st.mean_t_shap = opt_get<double>(s, "mean_t_shap");
        st.stdev_t_shap = opt_get<double>(s, "stdev_t_shap");
        report.stats.push_back(st);
    }
    const json& a = j.at("accuracy");
    report.accuracy.n_pairs = a.at("n_pairs").get<std::size_t>();
    report.accuracy.acc_r = opt_get<double>(a, "acc_r");
    report.accuracy.acc_c = opt_get<double>(a, "acc_c");
    report.accuracy.acc_f = opt_get<double>(a, "acc_f");
    report.accuracy.acc = opt_get<double>(a, "acc");
    report.accuracy.n_vqa = a.at("n_vqa").get<std::size_t>();
    report.accuracy.vqa_accuracy = opt_get<double>(a, "vqa_accuracy");
    report.correlations.clear();
    for (const json& c : j.at("correlations")) {
        report.correlations.push_back({split_from_name(c.at("split").get<std::string>()),
                                       c.at("n").get<std::size_t>(), opt_get<double>(c, "spearman"),
                                       c.at("note").get<std::string>()});
    }
    report.failures.clear();
    for (const json& f : j.at("failures")) {
        report.failures.push_back({f.at("sample_id").get<std::string>(), f.at("code").get<std::string>(),
                                   f.at("message").get<std::string>()});
    }
    report.aborted = j.at("aborted").get<bool>();
    report.oracle_calls = j.at("runtime").at("oracle_calls").get<std::uint64_t>();
    report.wall_time_seconds = j.at("runtime").at("wall_time_seconds").get<double>();
}

std::string file_stem_for(const std::string& sample_id) {
    std::string safe;
    for (char c : sample_id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '-' || c == '_' || c == '.';
        safe.push_back(ok ? c : '_');
    }
    if (safe.size() > 80) safe.resize(80);
    char hash[9];
    std::snprintf(hash, sizeof(hash), "%08llx",
                  static_cast<unsigned long long>(fnv1a64(sample_id) >> 32));
    return safe + "-" + hash;
}

std::string dump_report(const EvaluationReport& report) {
    return json(report).dump(2) + "\n";
}

EvaluationReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::FileNotFound, "report '" + path.string() + "' not found");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str()).get<EvaluationReport>();
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, "report '" + path.string() + "': " + e.what());
    }
}

}  // namespace mmshap
