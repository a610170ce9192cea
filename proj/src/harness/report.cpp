#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "sortlab/error.hpp"
#include "sortlab/harness.hpp"

namespace sortlab::harness {

namespace {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

std::string line_plot(const std::string& title, const std::string& y_label, const std::vector<Series>& series) {
    const double w = 640, h = 400, left = 70, right = 160, top = 40, bottom = 50;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 1, x1 += 1;
    if (y1 == y0) y0 -= 1, y1 += 1;
    const double pw = w - left - right, ph = h - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::ostringstream os;
    char buf[256];
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">", left);
    os << buf << escape(title) << "</text>\n";
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"black\"/>\n", left,
                  top, pw, ph);
    os << buf;
    for (int t = 0; t <= 4; ++t) {
        const double yv = y0 + (y1 - y0) * t / 4.0, xv = x0 + (x1 - x0) * t / 4.0;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\" "
                      "text-anchor=\"end\">%.4g</text>\n",
                      left - 6, py(yv) + 4, yv);
        os << buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\" "
                      "text-anchor=\"middle\">%.4g</text>\n",
                      px(xv), top + ph + 16, xv);
        os << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"12\" "
                  "text-anchor=\"middle\">epoch</text>\n",
                  left + pw / 2, h - 12);
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"16\" y=\"%g\" font-family=\"sans-serif\" font-size=\"12\" "
                  "transform=\"rotate(-90 16 %g)\" text-anchor=\"middle\">",
                  top + ph / 2, top + ph / 2);
    os << buf << escape(y_label) << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % std::size(kPalette)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : series[i].points) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(x), py(y));
            os << buf;
        }
        os << "\"/>\n";
        for (const auto& [x, y] : series[i].points) {
            std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"%s\"/>\n", px(x), py(y),
                          color);
            os << buf;
        }
        const double ly = top + 14 + 18 * static_cast<double>(i);
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"%s\" stroke-width=\"2\"/>"
                      "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"12\">",
                      left + pw + 10, ly, left + pw + 30, ly, color, left + pw + 36, ly + 4);
        os << buf << escape(series[i].label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::filesystem::path resolve(const RunManifest& m, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : std::filesystem::path(m.directory) / path;
}

}  // namespace

void emit_report(const std::vector<std::string>& manifest_paths, const std::string& output_dir) {
    if (manifest_paths.empty()) throw Error(ErrorKind::usage, "report needs at least one manifest");
    std::vector<RunManifest> manifests;
    std::vector<std::pair<std::string, metrics::MetricsReport>> rows;
    std::map<std::string, int> seen;
    for (const auto& path : manifest_paths) {
        RunManifest m = RunManifest::load(path);
        const auto metrics_path = resolve(m, m.metrics_path);
        if (!std::filesystem::exists(metrics_path)) {
            throw Error(ErrorKind::io, "manifest '" + path + "' references missing report '" + metrics_path.string() + "'");
        }
        const auto report = metrics::report_from_json(read_file(metrics_path.string()));
        std::string label = loss::variant_name(m.config.variant);
        if (seen[label]++ > 0) label += "-" + std::to_string(seen[label]);
        rows.emplace_back(label, report);
        manifests.push_back(std::move(m));
    }

    std::error_code ec;
    std::filesystem::create_directories(output_dir, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create '" + output_dir + "': " + ec.message());
    const std::filesystem::path dir(output_dir);
    write_file((dir / "comparison.txt").string(), metrics::render_table(rows));
    write_file((dir / "comparison.csv").string(), metrics::render_csv(rows));

    std::vector<Series> loss_series, consistency_series;
    for (std::size_t i = 0; i < manifests.size(); ++i) {
        const auto& m = manifests[i];
        Series l{rows[i].first, {}};
        for (const auto& e : m.epochs) l.points.emplace_back(e.epoch, e.mean.total);
        loss_series.push_back(std::move(l));
        Series c{rows[i].first, {}};
        for (const auto& v : m.validation_consistency) c.points.emplace_back(v.epoch, v.consistency);
        const double last = m.epochs.empty() ? 0.0 : m.epochs.back().epoch;
        if (c.points.empty() || c.points.back().first != last) c.points.emplace_back(last, rows[i].second.consistency);
        consistency_series.push_back(std::move(c));
    }
    write_file((dir / "loss.svg").string(), line_plot("Training loss", "mean total loss", loss_series));
    write_file((dir / "consistency.svg").string(),
               line_plot("Validation consistency", "consistency (%)", consistency_series));
}

}  // namespace sortlab::harness
