#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mmshap/dataset.hpp"
#include "mmshap/harness.hpp"
#include "mmshap/image_probe.hpp"
#include "mmshap/synthetic_oracles.hpp"
#include "mmshap/wire_protocol.hpp"
#include "support/test_support.hpp"

using namespace mmshap;
using mmshap::testing::error_code_of;
using mmshap::testing::TempDir;
using mmshap::testing::write_synthetic_dataset;

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig config_for(const TempDir& dir, const std::string& oracle, const std::string& out = "out") {
    RunConfig cfg;
    cfg.dataset_path = dir / "data.jsonl";
    cfg.oracle_spec = oracle;
    cfg.output_dir = dir / out;
    cfg.estimator.seed = 7;
    return cfg;
}

int run_cli(const std::string& args) {
    const int status = std::system((std::string("'") + MMSHAP_CLI_PATH + "' " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Oracle that tokenizes on its own side: lowercases words and adds its own
/// special tokens. Optionally changes its mind on every registration.
class TokenizingOracle : public GameOracle {
public:
    explicit TokenizingOracle(bool unstable = false) : GameOracle({4, ScoreKind::probability}), unstable_(unstable) {}

    double value(const TokenizedSample& s, const CoalitionMask& m) const override {
        return static_cast<double>(m.count()) / static_cast<double>(s.token_count());
    }

protected:
    Registration do_register(const TokenizedSample& s, const nlohmann::json& assets) override {
        Registration reg = GameOracle::do_register(s, assets);
        std::vector<TextTokenSpec> toks{{"<s>", "0", true}};
        std::istringstream in(assets.at("text").get<std::string>());
        for (std::string w; in >> w;) {
            for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            toks.push_back({w, w, false});
        }
        if (unstable_) toks.push_back({"extra" + std::to_string(++calls_), "x", false});
        toks.push_back({"</s>", "2", true});
        reg.realized_text = std::move(toks);
        return reg;
    }

private:
    bool unstable_;
    std::atomic<int> calls_{0};
};

}  // namespace

TEST_CASE("ingest") {
    TempDir dir("ingest");
    write_file(dir / "ok.jsonl",
               R"({"id":"a","image":"a.jpg","caption":"x","foil":"y","task":"isa"})"
               "\n\n"
               R"({"id":"b","image":"b.jpg","caption":"x"})"
               "\n"
               R"({"id":"c","image":"c.jpg","caption":"q","task":"vqa","correct":true})"
               "\n");
    const auto recs = ingest(dir / "ok.jsonl");
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].foil == "y");
    CHECK_FALSE(recs[1].foil);
    CHECK(recs[1].task == "isa");
    CHECK(recs[2].correct == true);
    CHECK(recs[2].line == 4);

    write_file(dir / "bad.jsonl", "{\"id\":\"a\",\"image\":\"a.jpg\",\"caption\":\"x\"}\n{\"id\":\"b\",\"image\":\"b.jpg\"}\n");
    try {
        ingest(dir / "bad.jsonl");
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ParseError);
        CHECK(e.line() == 2);
    }

    write_file(dir / "dup.jsonl", "{\"id\":\"a\",\"image\":\"a\",\"caption\":\"x\"}\n{\"id\":\"a\",\"image\":\"a\",\"caption\":\"y\"}\n");
    CHECK(error_code_of([&] { ingest(dir / "dup.jsonl"); }) == Errc::ParseError);
    write_file(dir / "task.jsonl", "{\"id\":\"a\",\"image\":\"a\",\"caption\":\"x\",\"task\":\"nli\"}\n");
    CHECK(error_code_of([&] { ingest(dir / "task.jsonl"); }) == Errc::ParseError);
    write_file(dir / "junk.jsonl", "{nope\n");
    CHECK(error_code_of([&] { ingest(dir / "junk.jsonl"); }) == Errc::ParseError);
    CHECK(error_code_of([&] { ingest(dir / "missing.jsonl"); }) == Errc::FileNotFound);
}

TEST_CASE("image sizes come from hints or image headers") {
    TempDir dir("probe");
    // 1x1 PNG.
    const std::string png = base64_decode(
        "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNk+M9QDwADhgGAWjR9awAAAABJRU5ErkJggg==")
                                .value();
    REQUIRE(png.size() > 24);
    std::string wide = png;
    wide[16] = 0; wide[17] = 0; wide[18] = 0x01; wide[19] = 0x40;  // width 320
    wide[20] = 0; wide[21] = 0; wide[22] = 0x00; wide[23] = 0xF0;  // height 240
    write_file(dir / "img.png", wide);
    const auto size = probe_image_size(wide);
    REQUIRE(size);
    CHECK(size->width == 320);
    CHECK(size->height == 240);
    CHECK(image_mime(wide) == "image/png");

    write_file(dir / "data.jsonl",
               R"({"id":"p","image":"img.png","caption":"a red ball"})"
               "\n"
               R"({"id":"q","image":"data:image/png;base64,)" + base64_encode(wide) + R"(","caption":"two cats"})" "\n"
               R"({"id":"r","image":"missing.png","caption":"nothing"})" "\n");
    RunConfig cfg = config_for(dir, "builtin:linear");
    const EvaluationReport report = run(cfg);
    REQUIRE(report.samples.size() == 2);
    CHECK(report.samples[0].tiling.image_width == 320);
    CHECK(report.samples[1].tiling.image_height == 240);
    REQUIRE(report.failures.size() == 1);
    CHECK(report.failures[0].sample_id == "r/caption");
    CHECK(report.failures[0].code == "FileNotFound");
    CHECK_FALSE(report.aborted);
    CHECK(std::filesystem::exists(dir / "out" / "failures.json"));
}

TEST_CASE("unimodal oracles collapse the report mean") {
    TempDir dir("collapse");
    write_synthetic_dataset(dir / "data.jsonl", 12, 1);
    for (auto [name, expected] : {std::pair{"unimodal-text", 100.0}, std::pair{"unimodal-image", 0.0}}) {
        RunConfig cfg = config_for(dir, std::string("builtin:") + name, name);
        const EvaluationReport report = run(cfg);
        CHECK(report.failures.empty());
        CHECK(report.samples.size() == 24);
        for (const SplitStats& st : report.stats) {
            REQUIRE(st.mean_t_shap);
            CHECK(*st.mean_t_shap == expected);
            CHECK(*st.stdev_t_shap == 0.0);
        }
    }
}

TEST_CASE("mirror oracle with the exact estimator splits evenly") {
    TempDir dir("mirror");
    RunConfig cfg = config_for(dir, "builtin:mirror");
    cfg.estimator.mode = EstimatorKind::exact;
    const std::vector<std::string> captions{"a", "a dog", "two red balls", "a man rides a", "the cat on the grass"};
    std::vector<DatasetRecord> records;
    for (std::size_t i = 0; i < captions.size(); ++i) {
        DatasetRecord r;
        r.id = "m" + std::to_string(i);
        r.image = "x.jpg";
        r.caption = captions[i];
        r.width = 100 + static_cast<std::int64_t>(i);
        r.height = 80;
        records.push_back(r);
    }
    auto oracle = make_builtin_oracle("mirror");
    const EvaluationReport report = evaluate_records(records, cfg, *oracle);
    REQUIRE(report.samples.size() == 5);
    for (const SampleRecord& s : report.samples) {
        REQUIRE(s.mm);
        CHECK(std::abs(s.mm->t_shap - 50.0) <= 1e-9);
    }
}

TEST_CASE("foil-less records only join the caption split") {
    TempDir dir("foilless");
    write_file(dir / "data.jsonl",
               R"({"id":"a","image":"a.jpg","caption":"a dog runs","foil":"a cat runs","width":64,"height":64})"
               "\n"
               R"({"id":"b","image":"b.jpg","caption":"two red balls","width":64,"height":64})"
               "\n");
    const EvaluationReport report = run(config_for(dir, "builtin:linear"));
    CHECK(report.samples.size() == 3);
    CHECK(report.accuracy.n_pairs == 1);
    REQUIRE(report.stats.size() == 3);
    CHECK(report.stats[0].split == Split::all);
    CHECK(report.stats[0].n_samples == 3);
    CHECK(report.stats[1].split == Split::caption);
    CHECK(report.stats[1].n_samples == 2);
    CHECK(report.stats[2].n_samples == 1);
    CHECK(report.accuracy.acc_c);
    CHECK(report.oracle_info.score_kind == ScoreKind::probability);
}

TEST_CASE("unbounded scores only get pairwise accuracy") {
    TempDir dir("unbounded");
    write_synthetic_dataset(dir / "data.jsonl", 6, 3);
    RunConfig cfg = config_for(dir, "unused");
    auto game = hashed_logistic_oracle(5);
    auto scaled = affine_oracle(game, 10.0, -3.0);
    const EvaluationReport report = run(cfg, *scaled);
    CHECK(report.oracle_info.score_kind == ScoreKind::unbounded);
    CHECK(report.accuracy.acc_r);
    CHECK_FALSE(report.accuracy.acc_c);
    CHECK_FALSE(report.accuracy.acc);
}

TEST_CASE("vqa records use the provided correctness flag") {
    TempDir dir("vqa");
    write_file(dir / "data.jsonl",
               R"({"id":"q1","image":"a.jpg","caption":"what color is the ball","task":"vqa","correct":true,"width":32,"height":32})"
               "\n"
               R"({"id":"q2","image":"a.jpg","caption":"how many dogs","task":"vqa","correct":false,"width":32,"height":32})"
               "\n");
    const EvaluationReport report = run(config_for(dir, "builtin:linear"));
    CHECK(report.accuracy.n_vqa == 2);
    CHECK(report.accuracy.vqa_accuracy == 0.5);
    CHECK(report.accuracy.n_pairs == 0);
    CHECK(report.samples[0].correct == true);
    CHECK(report.samples[1].correct == false);
}

TEST_CASE("constant oracle yields all-zero samples that are counted, not averaged") {
    TempDir dir("constant");
    write_synthetic_dataset(dir / "data.jsonl", 3, 4);
    const EvaluationReport report = run(config_for(dir, "builtin:constant"));
    CHECK(report.failures.empty());
    for (const SampleRecord& s : report.samples) {
        CHECK(s.status == "all_zero");
        CHECK_FALSE(s.mm);
    }
    CHECK(report.stats[0].n_all_zero == 6);
    CHECK_FALSE(report.stats[0].mean_t_shap);
}

TEST_CASE("oracle-side tokenization is adopted") {
    TempDir dir("tokenize");
    write_file(dir / "data.jsonl", R"({"id":"a","image":"a.jpg","caption":"A Dog RUNS","width":64,"height":64})" "\n");
    TokenizingOracle oracle;
    const EvaluationReport report = run(config_for(dir, "unused"), oracle);
    REQUIRE(report.samples.size() == 1);
    const auto& toks = report.samples[0].tokens;
    CHECK(toks[0].label == "<s>");
    CHECK_FALSE(toks[0].maskable);
    CHECK(toks[2].label == "dog");

    TokenizingOracle unstable(true);
    const EvaluationReport bad = run(config_for(dir, "unused", "out2"), unstable);
    REQUIRE(bad.failures.size() == 1);
    CHECK(bad.failures[0].code == "TokenizationMismatch");
}

TEST_CASE("reported oracle calls equal unique coalitions") {
    TempDir dir("calls");
    write_synthetic_dataset(dir / "data.jsonl", 8, 5);
    auto inner = make_builtin_oracle("linear");
    RecordingOracle rec(inner);
    const EvaluationReport report = run(config_for(dir, "unused"), rec);
    std::uint64_t sum = 0;
    for (const SampleRecord& s : report.samples) sum += s.attribution.oracle_calls;
    CHECK(report.oracle_calls == sum);
    CHECK(report.oracle_calls == rec.unique_masks());
}

TEST_CASE("reruns resume from the per-sample cache") {
    TempDir dir("resume");
    write_synthetic_dataset(dir / "data.jsonl", 10, 6);
    RunConfig cfg = config_for(dir, "unused");
    auto inner = make_builtin_oracle("linear");
    RecordingOracle first(inner);
    const EvaluationReport a = run(cfg, first);
    CHECK(first.calls() > 0);

    // Drop three cached samples; only those are recomputed.
    std::vector<std::filesystem::path> cached;
    for (const auto& e : std::filesystem::directory_iterator(cfg.output_dir / "samples")) cached.push_back(e.path());
    std::sort(cached.begin(), cached.end());
    REQUIRE(cached.size() == 20);
    for (int k = 0; k < 3; ++k) std::filesystem::remove(cached[k]);

    RecordingOracle second(inner);
    const EvaluationReport b = run(cfg, second);
    CHECK(second.calls() > 0);
    CHECK(second.calls() < first.calls());
    CHECK(deterministic_dump(a) == deterministic_dump(b));

    RecordingOracle third(inner);
    const EvaluationReport c = run(cfg, third);
    CHECK(third.calls() == 0);
    CHECK(deterministic_dump(a) == deterministic_dump(c));

    // A different seed invalidates the cache.
    cfg.estimator.seed = 8;
    RecordingOracle fourth(inner);
    const EvaluationReport d = run(cfg, fourth);
    RunConfig fresh = cfg;
    fresh.output_dir = dir / "fresh";
    RecordingOracle fifth(inner);
    const EvaluationReport e = run(fresh, fifth);
    CHECK(fourth.calls() == fifth.calls());
    CHECK(deterministic_dump(d) == deterministic_dump(e));
}

TEST_CASE("results do not depend on the worker count") {
    TempDir dir("workers");
    write_synthetic_dataset(dir / "data.jsonl", 30, 7);
    RunConfig one = config_for(dir, "builtin:linear", "w1");
    RunConfig eight = config_for(dir, "builtin:linear", "w8");
    eight.workers = 8;
    const std::string a = deterministic_dump(run(one));
    const std::string b = deterministic_dump(run(eight));
    CHECK(a == b);
    CHECK(a.find("wall_time") == std::string::npos);
    CHECK(read_file(dir / "w1" / "report.json").find("wall_time_seconds") != std::string::npos);
}

TEST_CASE("report JSON round trip") {
    TempDir dir("roundtrip");
    write_synthetic_dataset(dir / "data.jsonl", 5, 8);
    const EvaluationReport report = run(config_for(dir, "builtin:linear"));
    const EvaluationReport back = load_report(dir / "out" / "report.json");
    CHECK(dump_report(back) == dump_report(report));
    CHECK(back.samples == report.samples);
    CHECK(back.stats == report.stats);
    CHECK(back.accuracy == report.accuracy);
    const auto j = nlohmann::json::parse(read_file(dir / "out" / "report.json"));
    CHECK(j["schema_version"] == 1);
}

TEST_CASE("protocol violations abort the run and flush a failure manifest") {
    TempDir dir("abort");
    write_synthetic_dataset(dir / "data.jsonl", 4, 9);
    auto game = make_builtin_oracle("linear");
    wire::ProtocolServer server(*game);

    class Lying : public wire::Transport {
    public:
        explicit Lying(wire::ProtocolServer& s) : server_(s) {}
        std::string roundtrip(const std::string& frame) override {
            const std::string reply = server_.handle(frame);
            if (frame.find("\"type\":\"eval\"") != std::string::npos && ++evals_ > 3) {
                return R"({"responses":[],"type":"values"})";
            }
            return reply;
        }

    private:
        wire::ProtocolServer& server_;
        int evals_ = 0;
    };

    wire::RemoteOracle remote(std::make_unique<Lying>(server));
    const EvaluationReport report = run(config_for(dir, "unused"), remote);
    CHECK(report.aborted);
    CHECK_FALSE(report.failures.empty());
    bool saw_violation = false;
    bool saw_not_attempted = false;
    for (const Failure& f : report.failures) {
        saw_violation = saw_violation || f.code == "ProtocolViolation";
        saw_not_attempted = saw_not_attempted || f.code == "NotAttempted";
    }
    CHECK(saw_violation);
    CHECK(saw_not_attempted);
    CHECK(report.samples.size() + report.failures.size() == 8);
    CHECK(std::filesystem::exists(dir / "out" / "failures.json"));
    CHECK(std::filesystem::exists(dir / "out" / "report.json"));
}

TEST_CASE("compare reports") {
    EvaluationReport a;
    EvaluationReport b;
    a.stats = {{Split::all, 2, 0, 40.0, 1.0}, {Split::caption, 1, 0, std::nullopt, std::nullopt}};
    b.stats = {{Split::all, 2, 0, 47.5, 1.0}, {Split::caption, 1, 0, 30.0, 0.0}};
    const auto d = compare_reports(a, b);
    REQUIRE(d.size() == 1);
    CHECK(d[0].split == Split::all);
    CHECK(d[0].delta == 7.5);
}

TEST_CASE("CLI exit codes") {
    TempDir dir("cli");
    write_synthetic_dataset(dir / "data.jsonl", 3, 10);
    const std::string data = "'" + (dir / "data.jsonl").string() + "'";
    const std::string out = "'" + (dir / "out").string() + "'";

    CHECK(run_cli("run --dataset " + data + " --oracle builtin:linear --out " + out) == 0);
    CHECK(std::filesystem::exists(dir / "out" / "report.json"));
    CHECK(run_cli("render --report '" + (dir / "out" / "report.json").string() + "' --out '" +
                  (dir / "html").string() + "'") == 0);
    CHECK(std::filesystem::exists(dir / "html" / "index.html"));
    CHECK(run_cli("run --dataset " + data + " --oracle builtin:linear --mode exact --exact-limit 2 --out '" +
                  (dir / "partial").string() + "'") == 4);
    CHECK(run_cli("run --dataset " + data + " --oracle builtin:nope --out " + out) == 2);
    CHECK(run_cli("run --dataset '" + (dir / "missing.jsonl").string() + "' --oracle builtin:linear --out " + out) == 2);
    CHECK(run_cli("run --dataset " + data + " --oracle builtin:linear --coalitions many --out " + out) == 2);
    CHECK(run_cli("run --dataset " + data + " --oracle builtin:linear --workers 0 --out " + out) == 2);
    CHECK(run_cli("run --dataset " + data + " --oracle 'exit 0' --out '" + (dir / "dead").string() + "'") == 3);
    CHECK(run_cli("run --dataset " + data + " --oracle 'cat' --timeout-ms 500 --out '" + (dir / "echo").string() +
                  "'") == 3);
    CHECK(run_cli("run --dataset " + data + " --oracle \"'" + MMSHAP_CLI_PATH +
                  "' serve --oracle builtin:mirror\" --out '" + (dir / "sub").string() + "'") == 0);
    CHECK(run_cli("selftest") == 0);
    CHECK(run_cli("") == 2);
}
