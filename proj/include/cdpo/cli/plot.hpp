#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cdpo::cli {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> err;  // half-width of the error bar, empty for none
    int style = -1;           // palette index; series sharing a style and label share one legend entry
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<Series> series;
};

/// Standalone SVG document. Points with non-finite coordinates (or
/// non-positive ones on a log axis) are skipped.
std::string render_svg(const LineChart& chart, int width = 700, int height = 420);

/// Ticks at 1, 2, 5 times a power of ten covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 6);

/// One chart per family: mean arm-averaged W2 over seeds against n_train,
/// one series per learner, error bars = standard error (0 for a single run).
/// Records without a finite W2 score are reported in `problems`.
std::vector<LineChart> w2_charts(const std::vector<nlohmann::json>& records, std::vector<std::string>& problems);

/// Log-log remainder curves from an orthocheck report.
LineChart scaling_chart(const nlohmann::json& report);

struct PlotOutput {
    std::vector<std::filesystem::path> files;
    std::vector<std::string> problems;
};

/// Reads records/ and orthocheck_report.json under `results_dir` and writes
/// SVG files to `out_dir`. Throws InvalidArgument with "no results" when
/// there is nothing to plot.
PlotOutput plot_results(const std::filesystem::path& results_dir, const std::filesystem::path& out_dir);

}  // namespace cdpo::cli
