#include "mmshap/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mmshap/image_probe.hpp"

namespace mmshap {

namespace fs = std::filesystem;

namespace {

constexpr int kNeutral[3] = {255, 255, 255};
constexpr int kPositive[3] = {30, 136, 229};  // blue
constexpr int kNegative[3] = {255, 13, 87};   // red
constexpr int kDisplayWidth = 384;

std::string escape_html(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out += c; break;
        }
    }
    return out;
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

constexpr const char* kStyle = R"(body{font-family:Helvetica,Arial,sans-serif;margin:24px;color:#222}
h1{font-size:18px;margin:0 0 8px 0}
.header{font-size:16px;font-weight:bold;margin:0 0 12px 0}
.warning{background:#fff3cd;border:1px solid #e0b000;padding:6px 10px;margin:0 0 12px 0}
.text{font-size:18px;line-height:2.2em;margin:0 0 16px 0}
.tok{padding:3px 4px;margin:0 1px;border-radius:3px}
.special{border:1px dashed #999;color:#777}
.legend{font-size:12px;color:#555}
table{border-collapse:collapse}td,th{padding:3px 8px;border-bottom:1px solid #ddd;text-align:left})";

double max_abs_phi(const SampleRecord& s) {
    double m = 0.0;
    for (double v : s.attribution.phi) m = std::max(m, std::abs(v));
    return m;
}

void require_attributions(const SampleRecord& s) {
    if (s.attribution.phi.empty() || s.attribution.phi.size() != s.tokens.size()) {
        throw Error(Errc::MissingAttributions, "sample '" + s.sample_id() + "' has no per-token attributions");
    }
}

std::string score_header(const SampleRecord& s) {
    std::string header = "ISA: " + fmt("%.4f", s.score()) + " | T-SHAP: ";
    if (s.mm) {
        header += format_percent(s.mm->t_shap) + "% | V-SHAP: " + format_percent(s.mm->v_shap()) + "%";
    } else {
        header += "n/a";
    }
    return header;
}

}  // namespace

std::string diverging_color(double t) {
    t = std::clamp(t, -1.0, 1.0);
    const int* target = t >= 0.0 ? kPositive : kNegative;
    const double a = std::abs(t);
    int rgb[3];
    for (int k = 0; k < 3; ++k) {
        rgb[k] = static_cast<int>(std::lround(kNeutral[k] + (target[k] - kNeutral[k]) * a));
    }
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

std::string render_sample_html(const SampleRecord& s, const std::optional<std::string>& image_bytes) {
    require_attributions(s);
    const double scale = max_abs_phi(s);
    auto shade = [&](double phi) { return diverging_color(scale > 0.0 ? phi / scale : 0.0); };

    std::ostringstream out;
    out << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>" << escape_html(s.sample_id())
        << "</title>\n<style>\n" << kStyle << "\n</style>\n</head>\n<body>\n";
    out << "<h1>" << escape_html(s.sample_id()) << " (" << split_name(s.split) << ")</h1>\n";
    out << "<p class=\"header\">" << score_header(s) << "</p>\n";
    if (scale == 0.0) {
        out << "<p class=\"warning\">All token contributions are zero: no modality share can be computed "
               "for this sample.</p>\n";
    }

    out << "<div class=\"text\">\n";
    for (std::size_t j = 0; j < s.tokens.size(); ++j) {
        const Token& tok = s.tokens[j];
        if (tok.modality != Modality::text()) continue;
        const double phi = s.attribution.phi[j];
        out << "<span class=\"tok" << (tok.maskable ? "" : " special") << "\" style=\"background:"
            << (tok.maskable ? shade(phi) : diverging_color(0.0)) << "\" title=\"phi="
            << fmt("%+.6f", phi) << "\">" << escape_html(tok.label) << "</span>\n";
    }
    out << "</div>\n";

    const TilingPlan& tiling = s.tiling;
    const std::int64_t w = std::max<std::int64_t>(tiling.image_width, 1);
    const std::int64_t h = std::max<std::int64_t>(tiling.image_height, 1);
    const long display_h = std::lround(double(kDisplayWidth) * double(h) / double(w));
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kDisplayWidth << "\" height=\""
        << display_h << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
    const std::string mime = image_bytes ? image_mime(*image_bytes) : std::string();
    if (!mime.empty()) {
        out << "<image x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" href=\"data:" << mime
            << ";base64," << base64_encode(*image_bytes) << "\"/>\n";
    } else {
        out << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"#d0d0d0\"/>\n";
    }
    std::size_t patch = 0;
    for (std::size_t j = 0; j < s.tokens.size(); ++j) {
        const Token& tok = s.tokens[j];
        if (tok.modality != Modality::image() || patch >= tiling.patch_rects.size()) continue;
        const PatchRect& r = tiling.patch_rects[patch++];
        const double phi = s.attribution.phi[j];
        out << "<rect x=\"" << r.x0 << "\" y=\"" << r.y0 << "\" width=\"" << (r.x1 - r.x0) << "\" height=\""
            << (r.y1 - r.y0) << "\" fill=\"" << shade(phi)
            << "\" fill-opacity=\"0.6\" stroke=\"#ffffff\" stroke-width=\"" << std::max<std::int64_t>(1, w / 256)
            << "\"><title>" << escape_html(tok.label) << " phi=" << fmt("%+.6f", phi) << "</title></rect>\n";
    }
    out << "</svg>\n";

    out << "<p class=\"legend\">Blue: pushes the score up. Red: pushes it down. Intensity is relative to "
           "the largest |phi| in this sample ("
        << fmt("%.6f", scale) << "). Base value " << fmt("%.6f", s.attribution.base_value) << ", "
        << estimator_name(s.attribution.estimator) << " estimator over " << s.attribution.n_coalitions
        << " coalitions.</p>\n";
    out << "</body>\n</html>\n";
    return out.str();
}

std::string render_index_html(const EvaluationReport& report, const std::vector<std::string>& pages) {
    std::ostringstream out;
    out << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>MM-SHAP report</title>\n<style>\n"
        << kStyle << "\n</style>\n</head>\n<body>\n<h1>MM-SHAP report</h1>\n<table>\n"
        << "<tr><th>split</th><th>samples</th><th>all-zero</th><th>mean T-SHAP</th><th>stdev</th></tr>\n";
    for (const SplitStats& st : report.stats) {
        out << "<tr><td>" << split_name(st.split) << "</td><td>" << st.n_samples << "</td><td>" << st.n_all_zero
            << "</td><td>" << (st.mean_t_shap ? format_percent(*st.mean_t_shap) + "%" : "n/a") << "</td><td>"
            << (st.stdev_t_shap ? format_percent(*st.stdev_t_shap) : "n/a") << "</td></tr>\n";
    }
    out << "</table>\n<h1>Samples</h1>\n<table>\n<tr><th>sample</th><th>ISA</th><th>T-SHAP</th></tr>\n";
    for (std::size_t i = 0; i < report.samples.size() && i < pages.size(); ++i) {
        const SampleRecord& s = report.samples[i];
        out << "<tr><td><a href=\"" << escape_html(pages[i]) << "\">" << escape_html(s.sample_id())
            << "</a></td><td>" << fmt("%.4f", s.score()) << "</td><td>"
            << (s.mm ? format_percent(s.mm->t_shap) + "%" : "n/a") << "</td></tr>\n";
    }
    out << "</table>\n</body>\n</html>\n";
    return out.str();
}

std::vector<fs::path> render(const EvaluationReport& report, const fs::path& out_dir) {
    for (const SampleRecord& s : report.samples) require_attributions(s);
    fs::create_directories(out_dir);
    fs::path base_dir;
    if (report.config.is_object() && report.config.contains("dataset")) {
        base_dir = fs::path(report.config["dataset"].get<std::string>()).parent_path();
    }

    std::vector<fs::path> written;
    std::vector<std::string> pages;
    for (const SampleRecord& s : report.samples) {
        const std::string name = file_stem_for(s.sample_id()) + ".html";
        std::ofstream(out_dir / name, std::ios::binary) << render_sample_html(s, load_image_bytes(s.image_ref, base_dir));
        pages.push_back(name);
        written.push_back(out_dir / name);
    }
    std::ofstream(out_dir / "index.html", std::ios::binary) << render_index_html(report, pages);
    written.push_back(out_dir / "index.html");
    return written;
}

}  // namespace mmshap
