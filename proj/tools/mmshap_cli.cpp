#include <iostream>
#include <mutex>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

#include "mmshap/harness.hpp"
#include "mmshap/render.hpp"
#include "mmshap/selftest.hpp"
#include "mmshap/synthetic_oracles.hpp"
#include "mmshap/wire_protocol.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitProtocol = 3;
constexpr int kExitPartial = 4;

int exit_code_for(mmshap::Errc code) {
    switch (code) {
        case mmshap::Errc::ProtocolViolation:
        case mmshap::Errc::OracleTimeout:
        case mmshap::Errc::OracleError:
        case mmshap::Errc::TokenizationMismatch:
            return kExitProtocol;
        default:
            return kExitConfig;
    }
}

void print_summary(const mmshap::EvaluationReport& report) {
    for (const auto& st : report.stats) {
        std::cout << "T-SHAP[" << mmshap::split_name(st.split) << "]: "
                  << (st.mean_t_shap ? mmshap::format_percent(*st.mean_t_shap) + "%" : std::string("n/a"))
                  << " (stdev " << (st.stdev_t_shap ? mmshap::format_percent(*st.stdev_t_shap) : std::string("n/a"))
                  << ", n=" << st.n_samples << ", all-zero=" << st.n_all_zero << ")\n";
    }
    const auto& acc = report.accuracy;
    auto pct = [](const std::optional<double>& v) {
        return v ? mmshap::format_percent(100.0 * *v) + "%" : std::string("n/a");
    };
    std::cout << "acc_r: " << pct(acc.acc_r) << "  acc_c: " << pct(acc.acc_c) << "  acc_f: " << pct(acc.acc_f)
              << "  acc: " << pct(acc.acc) << "  (pairs=" << acc.n_pairs << ")\n";
    if (acc.n_vqa > 0) std::cout << "vqa accuracy: " << pct(acc.vqa_accuracy) << " (n=" << acc.n_vqa << ")\n";
    for (const auto& c : report.correlations) {
        std::cout << "spearman[" << mmshap::split_name(c.split) << "]: "
                  << (c.rho ? std::to_string(*c.rho) : c.note) << " (n=" << c.n << ")\n";
    }
    std::cout << "oracle calls: " << report.oracle_calls << ", failures: " << report.failures.size() << "\n";
}

int serve(const std::string& spec, const std::string& http_bind) {
    auto oracle = mmshap::make_builtin_oracle(spec.rfind("builtin:", 0) == 0 ? spec.substr(8) : spec);
    mmshap::wire::ProtocolServer server(*oracle);
    if (http_bind.empty()) {
        std::string line;
        while (std::getline(std::cin, line)) {
            if (line.empty()) continue;
            std::cout << server.handle(line) << '\n' << std::flush;
        }
        return kExitOk;
    }
    const auto colon = http_bind.rfind(':');
    const std::string host = colon == std::string::npos ? "127.0.0.1" : http_bind.substr(0, colon);
    const int port = std::stoi(colon == std::string::npos ? http_bind : http_bind.substr(colon + 1));
    httplib::Server http;
    std::mutex mutex;
    http.Post("/", [&](const httplib::Request& req, httplib::Response& res) {
        std::string body = req.body;
        while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
        std::lock_guard lock(mutex);
        res.set_content(server.handle(body) + "\n", "application/x-ndjson");
    });
    std::cerr << "serving " << spec << " on http://" << host << ':' << port << "/\n";
    return http.listen(host, port) ? kExitOk : kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MM-SHAP: Shapley-based multimodality scores for black-box vision-language predictors"};
    app.require_subcommand(1);

    mmshap::RunConfig cfg;
    std::string mode = "mc";
    std::string coalitions = "auto";
    std::string dataset;
    std::string out_dir;
    std::string splits = "caption,foil";
    long timeout_ms = 60'000;
    auto* run_cmd = app.add_subcommand("run", "Explain a dataset and write report.json");
    run_cmd->add_option("--dataset", dataset, "JSONL dataset")->required();
    run_cmd->add_option("--oracle", cfg.oracle_spec, "builtin:<name> | http://host:port/path | command")->required();
    run_cmd->add_option("--mode", mode, "exact | mc")->check(CLI::IsMember({"exact", "mc"}));
    run_cmd->add_option("--coalitions", coalitions, "auto | N (coalition budget per sample)");
    run_cmd->add_option("--seed", cfg.estimator.seed, "run seed");
    run_cmd->add_option("--exact-limit", cfg.estimator.exact_limit, "max maskable tokens for exact mode");
    run_cmd->add_option("--workers", cfg.workers, "parallel samples")->check(CLI::PositiveNumber);
    run_cmd->add_option("--splits", splits, "comma-separated: caption,foil");
    run_cmd->add_option("--timeout-ms", timeout_ms, "oracle reply timeout");
    run_cmd->add_option("--out", out_dir, "output directory")->required();
    run_cmd->add_flag("--render", cfg.render, "also write HTML/SVG pages");

    std::string report_path;
    std::string render_out;
    auto* render_cmd = app.add_subcommand("render", "Render HTML/SVG pages from a report");
    render_cmd->add_option("--report", report_path, "report.json")->required();
    render_cmd->add_option("--out", render_out, "output directory")->required();

    auto* selftest_cmd = app.add_subcommand("selftest", "Run the synthetic-oracle property suite");

    std::string serve_spec;
    std::string serve_http;
    auto* serve_cmd = app.add_subcommand("serve", "Serve a builtin oracle over the wire protocol");
    serve_cmd->add_option("--oracle", serve_spec, "builtin:<name>")->required();
    serve_cmd->add_option("--http", serve_http, "host:port to serve over HTTP instead of stdio");

    std::string baseline;
    std::string candidate;
    auto* compare_cmd = app.add_subcommand("compare", "Mean T-SHAP shift between two reports");
    compare_cmd->add_option("--baseline", baseline, "report.json")->required();
    compare_cmd->add_option("--candidate", candidate, "report.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run_cmd) {
            cfg.dataset_path = dataset;
            cfg.output_dir = out_dir;
            cfg.oracle_timeout = std::chrono::milliseconds(timeout_ms);
            cfg.estimator.mode = mode == "exact" ? mmshap::EstimatorKind::exact : mmshap::EstimatorKind::permutation_mc;
            if (coalitions != "auto") {
                try {
                    cfg.estimator.n_coalitions = std::stoull(coalitions);
                } catch (const std::exception&) {
                    std::cerr << "error: --coalitions must be 'auto' or a positive integer\n";
                    return kExitConfig;
                }
            }
            cfg.splits.clear();
            std::stringstream ss(splits);
            for (std::string s; std::getline(ss, s, ',');) cfg.splits.push_back(mmshap::split_from_name(s));

            const mmshap::EvaluationReport report = mmshap::run(cfg);
            print_summary(report);
            std::cout << "report: " << (cfg.output_dir / "report.json").string() << "\n";
            if (report.aborted) return kExitProtocol;
            return report.failures.empty() ? kExitOk : kExitPartial;
        }
        if (*render_cmd) {
            const auto files = mmshap::render(mmshap::load_report(report_path), render_out);
            std::cout << "wrote " << files.size() << " files to " << render_out << "\n";
            return kExitOk;
        }
        if (*selftest_cmd) {
            bool ok = true;
            for (const auto& r : mmshap::run_selftest()) {
                std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
                ok = ok && r.passed;
            }
            return ok ? kExitOk : 1;
        }
        if (*serve_cmd) return serve(serve_spec, serve_http);
        if (*compare_cmd) {
            const auto deltas = mmshap::compare_reports(mmshap::load_report(baseline), mmshap::load_report(candidate));
            for (const auto& d : deltas) {
                std::cout << mmshap::split_name(d.split) << ": " << mmshap::format_percent(d.baseline_mean) << "% -> "
                          << mmshap::format_percent(d.candidate_mean) << "% (" << (d.delta >= 0 ? "+" : "")
                          << mmshap::format_percent(d.delta) << " pts)\n";
            }
            return kExitOk;
        }
    } catch (const mmshap::Error& e) {
        std::cerr << "error [" << mmshap::errc_name(e.code()) << "]: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}
