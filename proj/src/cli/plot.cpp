#include "cdpo/cli/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "cdpo/cli/experiment.hpp"
#include "cdpo/core/error.hpp"
#include "cdpo/genmodels/checkpoint.hpp"

namespace cdpo::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2",
                                    "#17becf"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::string tick_label(double v) {
    if (v != 0.0 && (std::abs(v) >= 1e5 || std::abs(v) < 1e-3)) {
        std::ostringstream os;
        os.precision(2);
        os << v;
        return os.str();
    }
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

struct Axis {
    bool log = false;
    double lo = 0.0;
    double hi = 1.0;
    double pix_lo = 0.0;
    double pix_hi = 1.0;

    double map(double v) const {
        const double t = log ? (std::log10(v) - lo) / (hi - lo) : (v - lo) / (hi - lo);
        return pix_lo + t * (pix_hi - pix_lo);
    }
    bool admissible(double v) const { return std::isfinite(v) && (!log || v > 0.0); }

    std::vector<double> ticks() const {
        std::vector<double> out;
        if (log) {
            for (int e = static_cast<int>(std::floor(lo)); e <= static_cast<int>(std::ceil(hi)); ++e)
                if (e >= lo - 1e-9 && e <= hi + 1e-9) out.push_back(std::pow(10.0, e));
            return out;
        }
        const double slack = 1e-9 * (hi - lo);
        for (double t : nice_ticks(lo, hi))
            if (t >= lo - slack && t <= hi + slack) out.push_back(t);
        return out;
    }
};

void fit_range(Axis& axis, std::vector<double> values) {
    if (axis.log)
        for (double& v : values) v = std::log10(v);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) {
        const double pad = lo == 0.0 ? 1.0 : 0.1 * std::abs(lo);
        lo -= axis.log ? 0.5 : pad;
        hi += axis.log ? 0.5 : pad;
    } else {
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
    if (axis.log) {
        if (std::floor(hi) - std::ceil(lo) < 1.0) lo = std::floor(lo), hi = std::ceil(hi);
        axis.lo = lo;
        axis.hi = hi;
        return;
    }
    axis.lo = lo;
    axis.hi = hi;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<double> nice_ticks(double lo, double hi, int target) {
    require(std::isfinite(lo) && std::isfinite(hi) && hi > lo && target >= 2, "invalid tick range");
    const double raw = (hi - lo) / (target - 1);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    std::vector<double> out;
    const auto first = static_cast<long long>(std::floor(lo / step));
    const auto last = static_cast<long long>(std::ceil(hi / step));
    for (long long k = first; k <= last; ++k) out.push_back(static_cast<double>(k) * step);
    return out;
}

std::string render_svg(const LineChart& chart, int width, int height) {
    const double left = 72, right = 200, top = 40, bottom = 56;
    Axis ax{chart.log_x, 0, 1, left, width - right};
    Axis ay{chart.log_y, 0, 1, height - bottom, top};

    std::vector<double> xs, ys;
    for (const Series& s : chart.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!ax.admissible(s.x[i]) || !ay.admissible(s.y[i])) continue;
            xs.push_back(s.x[i]);
            const double e = i < s.err.size() && std::isfinite(s.err[i]) ? s.err[i] : 0.0;
            ys.push_back(s.y[i]);
            if (ay.admissible(s.y[i] - e)) ys.push_back(s.y[i] - e);
            ys.push_back(s.y[i] + e);
        }
    fit_range(ax, xs);
    fit_range(ay, ys);

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << (left + width - right) / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
       << escape(chart.title) << "</text>\n";

    for (double t : ax.ticks()) {
        const double px = ax.map(t);
        os << "<line x1=\"" << num(px) << "\" y1=\"" << top << "\" x2=\"" << num(px) << "\" y2=\"" << height - bottom
           << "\" stroke=\"#e6e6e6\"/>\n";
        os << "<text x=\"" << num(px) << "\" y=\"" << height - bottom + 16 << "\" text-anchor=\"middle\">"
           << tick_label(t) << "</text>\n";
    }
    for (double t : ay.ticks()) {
        const double py = ay.map(t);
        os << "<line x1=\"" << left << "\" y1=\"" << num(py) << "\" x2=\"" << width - right << "\" y2=\"" << num(py)
           << "\" stroke=\"#e6e6e6\"/>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">" << tick_label(t)
           << "</text>\n";
    }
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << width - right - left << "\" height=\""
       << height - bottom - top << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 14 << "\" text-anchor=\"middle\">"
       << escape(chart.x_label) << "</text>\n";
    os << "<text transform=\"translate(18," << (top + height - bottom) / 2
       << ") rotate(-90)\" text-anchor=\"middle\">" << escape(chart.y_label) << "</text>\n";

    std::vector<std::string> legend;
    for (std::size_t k = 0; k < chart.series.size(); ++k) {
        const Series& s = chart.series[k];
        const std::size_t style = s.style >= 0 ? static_cast<std::size_t>(s.style) : k;
        const char* color = kPalette[style % std::size(kPalette)];
        os << "<g class=\"series\" data-label=\"" << escape(s.label) << "\" stroke=\"" << color << "\" fill=\""
           << color << "\">\n";
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!ax.admissible(s.x[i]) || !ay.admissible(s.y[i])) continue;
            const double px = ax.map(s.x[i]), py = ay.map(s.y[i]);
            pts.emplace_back(px, py);
            if (i < s.err.size() && std::isfinite(s.err[i])) {
                const double e = s.err[i];
                const double lo_v = ay.admissible(s.y[i] - e) ? s.y[i] - e : s.y[i];
                const double y1 = ay.map(lo_v), y2 = ay.map(s.y[i] + e);
                os << "<path class=\"errorbar\" d=\"M" << num(px) << ' ' << num(y1) << " V" << num(y2) << " M"
                   << num(px - 4) << ' ' << num(y1) << " h8 M" << num(px - 4) << ' ' << num(y2)
                   << " h8\" fill=\"none\"/>\n";
            }
            os << "<circle class=\"point\" cx=\"" << num(px) << "\" cy=\"" << num(py) << "\" r=\"3.5\"/>\n";
        }
        if (pts.size() >= 2) {
            os << "<polyline fill=\"none\" stroke-width=\"1.8\" points=\"";
            for (std::size_t i = 0; i < pts.size(); ++i)
                os << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
            os << "\"/>\n";
        }
        os << "</g>\n";
        if (std::find(legend.begin(), legend.end(), s.label) != legend.end()) continue;
        legend.push_back(s.label);
        const double ly = top + 10 + 20.0 * static_cast<double>(legend.size() - 1);
        os << "<line x1=\"" << width - right + 12 << "\" y1=\"" << ly << "\" x2=\"" << width - right + 36
           << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << width - right + 42 << "\" y=\"" << ly + 4 << "\">" << escape(s.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::vector<LineChart> w2_charts(const std::vector<nlohmann::json>& records, std::vector<std::string>& problems) {
    // family -> learner -> n_train -> per-seed values
    std::map<std::string, std::map<std::string, std::map<int, std::vector<double>>>> table;
    for (const nlohmann::json& r : records) {
        const std::string where = r.value("_file", r.value("config_hash", std::string("record")));
        if (!r.contains("cell") || !r["cell"].is_object()) {
            problems.push_back(where + ": missing field 'cell'");
            continue;
        }
        const nlohmann::json& cell = r["cell"];
        if (!cell.contains("family") || !cell.contains("learner") || !cell.contains("n_train")) {
            problems.push_back(where + ": incomplete 'cell' (needs family, learner, n_train)");
            continue;
        }
        if (!r.contains("scores") || !r["scores"].contains("w2") || !r["scores"]["w2"].is_number()) {
            problems.push_back(where + ": missing metric field 'scores.w2'");
            continue;
        }
        table[cell["family"].get<std::string>()][cell["learner"].get<std::string>()][cell["n_train"].get<int>()]
            .push_back(r["scores"]["w2"].get<double>());
    }
    std::vector<LineChart> charts;
    for (const auto& [family, learners] : table) {
        LineChart chart{"W2 vs training size (" + family + ")", "n_train", "mean out-sample W2", false, false, {}};
        for (const auto& [learner, by_n] : learners) {
            Series s{learner, {}, {}, {}};
            for (const auto& [n, values] : by_n) {
                const double m = mean_of(values);
                double ss = 0.0;
                for (double v : values) ss += (v - m) * (v - m);
                const std::size_t k = values.size();
                s.x.push_back(n);
                s.y.push_back(m);
                s.err.push_back(k > 1 ? std::sqrt(ss / static_cast<double>(k - 1) / static_cast<double>(k)) : 0.0);
            }
            chart.series.push_back(std::move(s));
        }
        charts.push_back(std::move(chart));
    }
    return charts;
}

LineChart scaling_chart(const nlohmann::json& report) {
    if (!report.contains("scaling") || !report["scaling"].is_array())
        throw SchemaError("orthocheck report has no 'scaling' array");
    LineChart chart{"Remainder scaling", "nuisance perturbation size", "squared error of the risk minimizer", true,
                    true, {}};
    std::map<std::string, std::pair<double, int>> slopes;
    for (const nlohmann::json& s : report["scaling"])
        if (s.contains("slope") && s["slope"].is_number()) {
            auto& acc = slopes[s.at("learner").get<std::string>()];
            acc.first += s["slope"].get<double>();
            ++acc.second;
        }
    std::vector<std::string> learners;
    for (const nlohmann::json& s : report["scaling"]) {
        const std::string learner = s.at("learner").get<std::string>();
        auto it = std::find(learners.begin(), learners.end(), learner);
        if (it == learners.end()) it = learners.insert(learners.end(), learner);
        Series series;
        series.style = static_cast<int>(it - learners.begin());
        series.label = learner;
        if (const auto sl = slopes.find(learner); sl != slopes.end()) {
            std::ostringstream os;
            os.precision(3);
            os << learner << " (mean slope " << sl->second.first / sl->second.second << ")";
            series.label = os.str();
        }
        series.x = s.at("epsilon").get<std::vector<double>>();
        for (const nlohmann::json& e : s.at("squared_error"))
            series.y.push_back(e.is_number() ? e.get<double>() : std::numeric_limits<double>::quiet_NaN());
        if (series.x.size() != series.y.size()) throw SchemaError("scaling series with mismatched lengths");
        chart.series.push_back(std::move(series));
    }
    return chart;
}

PlotOutput plot_results(const fs::path& results_dir, const fs::path& out_dir) {
    PlotOutput out;
    const std::vector<nlohmann::json> records = load_records(results_dir);
    const fs::path report_path = results_dir / "orthocheck_report.json";
    const bool have_report = fs::exists(report_path);
    if (records.empty() && !have_report)
        throw InvalidArgument("no results in " + results_dir.string() +
                              " (expected records/*.json or orthocheck_report.json)");
    fs::create_directories(out_dir);
    const auto write = [&](const fs::path& name, const LineChart& chart) {
        const fs::path path = out_dir / name;
        std::ofstream f(path);
        if (!f) throw InvalidArgument("cannot write " + path.string());
        f << render_svg(chart);
        out.files.push_back(path);
    };
    for (const LineChart& chart : w2_charts(records, out.problems)) {
        const std::string family = chart.title.substr(chart.title.rfind('(') + 1, std::string::npos);
        write("w2_vs_n_train_" + family.substr(0, family.size() - 1) + ".svg", chart);
    }
    if (have_report) write("remainder_scaling.svg", scaling_chart(gen::read_json(report_path)));
    if (out.files.empty()) throw InvalidArgument("no results with plottable metrics in " + results_dir.string());
    return out;
}

}  // namespace cdpo::cli
