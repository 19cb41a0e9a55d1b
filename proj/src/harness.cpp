#include "mmshap/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "mmshap/hashing.hpp"
#include "mmshap/image_probe.hpp"
#include "mmshap/masking_policy.hpp"
#include "mmshap/metrics.hpp"
#include "mmshap/render.hpp"
#include "mmshap/synthetic_oracles.hpp"
#include "mmshap/wire_protocol.hpp"

namespace mmshap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kDecisionThreshold = 0.5;

struct Task {
    const DatasetRecord* record = nullptr;
    Split split = Split::caption;
    std::string sample_id;
    std::string text;
};

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json config_echo(const RunConfig& config) {
    json splits = json::array();
    for (Split s : config.splits) splits.push_back(split_name(s));
    const EstimatorConfig& est = config.estimator;
    return json{{"dataset", config.dataset_path.string()},
                {"oracle", config.oracle_spec},
                {"estimator", {{"mode", estimator_name(est.mode)},
                               {"coalitions", est.n_coalitions ? json(*est.n_coalitions) : json("auto")},
                               {"seed", est.seed},
                               {"exact_limit", est.exact_limit}}},
                {"splits", std::move(splits)},
                {"permutation_stream", kPermutationStream}};
}

std::vector<Task> plan_tasks(const std::vector<DatasetRecord>& records, const RunConfig& config) {
    const bool want_caption =
        std::find(config.splits.begin(), config.splits.end(), Split::caption) != config.splits.end();
    const bool want_foil =
        std::find(config.splits.begin(), config.splits.end(), Split::foil) != config.splits.end();
    std::vector<Task> tasks;
    for (const DatasetRecord& rec : records) {
        if (want_caption) tasks.push_back({&rec, Split::caption, rec.id + "/caption", rec.caption});
        if (want_foil && rec.foil) tasks.push_back({&rec, Split::foil, rec.id + "/foil", *rec.foil});
    }
    return tasks;
}

ImageSize resolve_image_size(const DatasetRecord& rec, const fs::path& base_dir) {
    if (rec.width && rec.height) return {*rec.width, *rec.height};
    if (auto bytes = load_image_bytes(rec.image, base_dir)) {
        if (auto size = probe_image_size(*bytes)) return *size;
    }
    throw Error(Errc::FileNotFound, "cannot determine the size of image '" + rec.image.substr(0, 80) +
                                        "' for record '" + rec.id + "'");
}

std::size_t maskable_text_count(const std::vector<TextTokenSpec>& tokens) {
    return static_cast<std::size_t>(
        std::count_if(tokens.begin(), tokens.end(), [](const TextTokenSpec& t) { return !t.is_special; }));
}

SampleRecord explain(const Task& task, Oracle& oracle, const RunConfig& config, const fs::path& base_dir) {
    const DatasetRecord& rec = *task.record;
    const ImageSize size = resolve_image_size(rec, base_dir);
    const std::map<std::string, std::string> metadata{
        {"record_id", rec.id}, {"split", std::string(split_name(task.split))}, {"task", rec.task}};

    std::vector<TextTokenSpec> text_tokens = whitespace_tokenize(task.text);
    TilingPlan tiling = plan_tiling(size.width, size.height, maskable_text_count(text_tokens));
    TokenizedSample sample = build_sample(task.sample_id, text_tokens, tiling, metadata);
    json assets{{"image", rec.image}, {"text", task.text}, {"tiling", tiling}};

    Registration reg = oracle.register_sample(sample, assets);
    if (reg.realized_text && *reg.realized_text != text_tokens) {
        // The oracle tokenized differently: rebuild on its tokens and re-register.
        text_tokens = *reg.realized_text;
        tiling = plan_tiling(size.width, size.height, maskable_text_count(text_tokens));
        sample = build_sample(task.sample_id, text_tokens, tiling, metadata);
        assets["tiling"] = tiling;
        reg = oracle.register_sample(sample, assets);
        if (reg.realized_text && *reg.realized_text != text_tokens) {
            throw Error(Errc::TokenizationMismatch,
                        "oracle changed its tokenization of '" + task.sample_id + "' on re-registration");
        }
    }

    SampleRecord out;
    out.record_id = rec.id;
    out.split = task.split;
    out.task = rec.task;
    out.text = task.text;
    out.image_ref = rec.image;
    out.tiling = tiling;
    out.tokens = sample.tokens;
    out.attribution = estimate(sample, oracle, config.estimator);
    try {
        out.mm = mm_shap(out.attribution, sample);
    } catch (const Error& e) {
        if (e.code() != Errc::AllZeroContributions) throw;
        out.status = "all_zero";
    }
    return out;
}

std::string task_fingerprint(const json& echo, const Task& task) {
    return hex64(fnv1a64(echo.dump() + "\n" + record_to_json(*task.record).dump() + "\n" +
                         std::string(split_name(task.split))));
}

std::optional<SampleRecord> load_cached(const fs::path& file, const std::string& fingerprint) {
    std::ifstream in(file);
    if (!in) return std::nullopt;
    try {
        const json j = json::parse(in);
        if (j.at("fingerprint").get<std::string>() != fingerprint) return std::nullopt;
        return j.at("record").get<SampleRecord>();
    } catch (const std::exception&) {
        return std::nullopt;  // unreadable cache entries are recomputed
    }
}

void store_cached(const fs::path& file, const std::string& fingerprint, const SampleRecord& record) {
    const fs::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp);
        out << json{{"fingerprint", fingerprint}, {"record", record}}.dump() << '\n';
    }
    fs::rename(tmp, file);
}

std::optional<bool> sample_correctness(const SampleRecord& s, const DatasetRecord& rec,
                                       const SampleRecord* caption, const SampleRecord* foil,
                                       ScoreKind kind) {
    if (rec.task == "vqa") return rec.correct;
    const bool probability = kind == ScoreKind::probability;
    if (s.split == Split::caption) {
        if (rec.correct) return rec.correct;
        if (probability) return s.score() > kDecisionThreshold;
    } else if (probability) {
        return s.score() <= kDecisionThreshold;
    }
    if (caption && foil) return caption->score() > foil->score();
    return std::nullopt;
}

void summarize(EvaluationReport& report, const std::vector<DatasetRecord>& records,
               const RunConfig& config) {
    std::sort(report.samples.begin(), report.samples.end(),
              [](const SampleRecord& a, const SampleRecord& b) { return a.sample_id() < b.sample_id(); });
    std::sort(report.failures.begin(), report.failures.end(),
              [](const Failure& a, const Failure& b) { return a.sample_id < b.sample_id; });

    std::map<std::string, const DatasetRecord*> by_id;
    for (const DatasetRecord& r : records) by_id[r.id] = &r;
    std::map<std::string, std::pair<SampleRecord*, SampleRecord*>> pairs;  // record -> caption, foil
    for (SampleRecord& s : report.samples) {
        auto& slot = pairs[s.record_id];
        (s.split == Split::caption ? slot.first : slot.second) = &s;
    }

    report.oracle_calls = 0;
    for (SampleRecord& s : report.samples) {
        const auto& [cap, foil] = pairs[s.record_id];
        s.correct = sample_correctness(s, *by_id.at(s.record_id), cap, foil, report.oracle_info.score_kind);
        report.oracle_calls += s.attribution.oracle_calls;
    }

    // Per-split MM-SHAP statistics, keyed alphabetically like the JSON form.
    std::vector<Split> split_order{Split::all};
    for (Split s : {Split::caption, Split::foil}) {
        if (std::find(config.splits.begin(), config.splits.end(), s) != config.splits.end()) {
            split_order.push_back(s);
        }
    }
    report.stats.clear();
    for (Split split : split_order) {
        SplitStats st;
        st.split = split;
        std::vector<MMShapScore> scored;
        for (const SampleRecord& s : report.samples) {
            if (split != Split::all && s.split != split) continue;
            ++st.n_samples;
            if (s.mm) {
                scored.push_back(*s.mm);
            } else {
                ++st.n_all_zero;
            }
        }
        if (!scored.empty()) {
            const DatasetMMStats agg = aggregate(scored, split);
            st.mean_t_shap = agg.mean_t_shap;
            st.stdev_t_shap = agg.stdev_t_shap;
        }
        report.stats.push_back(st);
    }

    AccuracyStats& acc = report.accuracy;
    acc = {};
    std::vector<PairPrediction> preds;
    std::size_t vqa_correct = 0;
    for (const auto& [id, slot] : pairs) {
        const DatasetRecord& rec = *by_id.at(id);
        if (rec.task == "vqa") {
            if (slot.first && rec.correct) {
                ++acc.n_vqa;
                if (*rec.correct) ++vqa_correct;
            }
            continue;
        }
        if (slot.first && slot.second) {
            preds.push_back({id, slot.first->score(), slot.second->score(), kDecisionThreshold});
        }
    }
    acc.n_pairs = preds.size();
    if (!preds.empty()) {
        acc.acc_r = pairwise_accuracy(preds);
        if (report.oracle_info.score_kind == ScoreKind::probability) {
            const ThresholdAccuracies t = threshold_accuracies(preds);
            acc.acc_c = t.acc_c;
            acc.acc_f = t.acc_f;
            acc.acc = t.acc;
        }
    }
    if (acc.n_vqa > 0) acc.vqa_accuracy = double(vqa_correct) / double(acc.n_vqa);

    report.correlations.clear();
    for (Split split : split_order) {
        if (split == Split::all) continue;
        CorrelationStat c;
        c.split = split;
        std::vector<double> xs;
        std::vector<double> ys;
        for (const SampleRecord& s : report.samples) {
            if (s.split != split || !s.mm || !s.correct) continue;
            xs.push_back(*s.correct ? 1.0 : 0.0);
            ys.push_back(s.mm->t_shap);
        }
        c.n = xs.size();
        try {
            c.rho = spearman(xs, ys);
        } catch (const Error& e) {
            c.note = e.code() == Errc::DegenerateInput ? "undefined: correctness or T-SHAP is constant"
                                                       : "undefined: fewer than two samples";
        }
        report.correlations.push_back(c);
    }
}

EvaluationReport execute(const std::vector<DatasetRecord>& records, const RunConfig& config,
                         Oracle& oracle, const std::optional<fs::path>& cache_dir) {
    const auto started = std::chrono::steady_clock::now();
    const json echo = config_echo(config);
    const fs::path base_dir = config.dataset_path.parent_path();
    const std::vector<Task> tasks = plan_tasks(records, config);

    std::vector<std::optional<SampleRecord>> results(tasks.size());
    std::vector<std::optional<Failure>> failures(tasks.size());
    std::vector<char> attempted(tasks.size(), 0);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};

    auto work = [&] {
        for (;;) {
            if (abort.load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            attempted[i] = 1;
            const Task& task = tasks[i];
            std::optional<fs::path> cache_file;
            std::string fingerprint;
            if (cache_dir) {
                cache_file = *cache_dir / (file_stem_for(task.sample_id) + ".json");
                fingerprint = task_fingerprint(echo, task);
                if (auto cached = load_cached(*cache_file, fingerprint)) {
                    results[i] = std::move(cached);
                    continue;
                }
            }
            try {
                SampleRecord rec = explain(task, oracle, config, base_dir);
                if (cache_file) store_cached(*cache_file, fingerprint, rec);
                results[i] = std::move(rec);
            } catch (const Error& e) {
                failures[i] = Failure{task.sample_id, std::string(errc_name(e.code())), e.what()};
                if (e.code() == Errc::ProtocolViolation || e.code() == Errc::OracleTimeout) abort = true;
            } catch (const std::exception& e) {
                failures[i] = Failure{task.sample_id, "InternalError", e.what()};
            }
        }
    };

    const int n_workers = std::max(1, config.workers);
    if (n_workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    }

    EvaluationReport report;
    report.config = echo;
    report.oracle_info = oracle.info();
    report.aborted = abort.load();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (results[i]) {
            report.samples.push_back(std::move(*results[i]));
        } else if (failures[i]) {
            report.failures.push_back(std::move(*failures[i]));
        } else if (!attempted[i]) {
            report.failures.push_back({tasks[i].sample_id, "NotAttempted", "run aborted before this sample"});
        }
    }
    summarize(report, records, config);
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::ConfigError, "cannot write '" + path.string() + "'");
    out << text;
}

}  // namespace

std::shared_ptr<Oracle> make_oracle(const std::string& spec, std::chrono::milliseconds timeout) {
    if (spec.empty()) throw Error(Errc::ConfigError, "empty oracle spec");
    if (spec.rfind("builtin:", 0) == 0) return make_builtin_oracle(spec.substr(8));
    if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
        return std::make_shared<wire::RemoteOracle>(std::make_unique<wire::HttpTransport>(spec, timeout));
    }
    const std::string command = spec.rfind("cmd:", 0) == 0 ? spec.substr(4) : spec;
    return std::make_shared<wire::RemoteOracle>(std::make_unique<wire::ProcessTransport>(command, timeout));
}

EvaluationReport evaluate_records(const std::vector<DatasetRecord>& records, const RunConfig& config,
                                  Oracle& oracle) {
    return execute(records, config, oracle, std::nullopt);
}

EvaluationReport run(const RunConfig& config, Oracle& oracle) {
    if (config.workers < 1) throw Error(Errc::ConfigError, "workers must be >= 1");
    if (config.output_dir.empty()) throw Error(Errc::ConfigError, "output directory is required");
    const std::vector<DatasetRecord> records = ingest(config.dataset_path);
    const fs::path samples_dir = config.output_dir / "samples";
    fs::create_directories(samples_dir);

    EvaluationReport report = execute(records, config, oracle, samples_dir);

    write_text(config.output_dir / "report.json", dump_report(report));
    const fs::path manifest = config.output_dir / "failures.json";
    if (!report.failures.empty()) {
        json failures = json::array();
        for (const Failure& f : report.failures) {
            failures.push_back({{"sample_id", f.sample_id}, {"code", f.code}, {"message", f.message}});
        }
        write_text(manifest, json{{"aborted", report.aborted}, {"failures", failures}}.dump(2) + "\n");
    } else {
        fs::remove(manifest);
    }
    if (config.render) render(report, config.output_dir / "render");
    return report;
}

EvaluationReport run(const RunConfig& config) {
    if (config.workers < 1) throw Error(Errc::ConfigError, "workers must be >= 1");
    std::shared_ptr<Oracle> oracle = make_oracle(config.oracle_spec, config.oracle_timeout);
    return run(config, *oracle);
}

std::vector<SplitDelta> compare_reports(const EvaluationReport& baseline, const EvaluationReport& candidate) {
    std::vector<SplitDelta> out;
    for (const SplitStats& b : baseline.stats) {
        for (const SplitStats& c : candidate.stats) {
            if (b.split != c.split || !b.mean_t_shap || !c.mean_t_shap) continue;
            out.push_back({b.split, *b.mean_t_shap, *c.mean_t_shap, *c.mean_t_shap - *b.mean_t_shap});
        }
    }
    return out;
}

std::string deterministic_dump(const EvaluationReport& report) {
    json j = report;
    j["runtime"].erase("wall_time_seconds");
    return j.dump(2) + "\n";
}

}  // namespace mmshap
