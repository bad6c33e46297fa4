#include "cdpo/data/tabular_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "cdpo/core/error.hpp"

namespace cdpo::data {

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        while (!field.empty() && field.front() == ' ') field.erase(field.begin());
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

int count_prefixed(const std::map<std::string, int>& cols, const std::string& prefix) {
    int k = 0;
    while (cols.count(prefix + std::to_string(k))) ++k;
    return k;
}

double parse_value(const std::string& s, int row, const std::string& col) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw SchemaError("row " + std::to_string(row) + ": column '" + col + "' is not a number: '" + s + "'");
    if (std::isnan(v)) throw SchemaError("row " + std::to_string(row) + ": column '" + col + "' is NaN");
    if (!std::isfinite(v)) throw SchemaError("row " + std::to_string(row) + ": column '" + col + "' is not finite");
    return v;
}

}  // namespace

void save_tabular_dataset(const PODataset& ds, const std::filesystem::path& path) {
    ds.validate();
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot open '" + path.string() + "' for writing");
    std::string header;
    for (int j = 0; j < ds.dx(); ++j) header += "x_" + std::to_string(j) + ",";
    header += "a";
    for (int j = 0; j < ds.dy(); ++j) header += ",y_" + std::to_string(j);
    if (ds.has_joint_po()) {
        for (int j = 0; j < ds.dy(); ++j) header += ",y0_" + std::to_string(j);
        for (int j = 0; j < ds.dy(); ++j) header += ",y1_" + std::to_string(j);
    }
    out << header << '\n';
    for (int i = 0; i < ds.size(); ++i) {
        for (int j = 0; j < ds.dx(); ++j) out << format_double(ds.x(i, j)) << ',';
        out << ds.a(i);
        for (int j = 0; j < ds.dy(); ++j) out << ',' << format_double(ds.y(i, j));
        if (ds.has_joint_po()) {
            for (int j = 0; j < ds.dy(); ++j) out << ',' << format_double((*ds.y0)(i, j));
            for (int j = 0; j < ds.dy(); ++j) out << ',' << format_double((*ds.y1)(i, j));
        }
        out << '\n';
    }
    if (!out) throw SchemaError("write to '" + path.string() + "' failed");
}

PODataset load_tabular_dataset(const std::filesystem::path& path, const TabularSchema& schema) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("'" + path.string() + "' is empty");
    const std::vector<std::string> header = split_fields(line);
    std::map<std::string, int> cols;
    for (std::size_t i = 0; i < header.size(); ++i) cols[header[i]] = static_cast<int>(i);

    const int dx = count_prefixed(cols, "x_");
    const int dy = count_prefixed(cols, "y_");
    if (dx == 0) throw SchemaError("missing column 'x_0'");
    if (dy == 0) throw SchemaError("missing column 'y_0'");
    if (!cols.count("a")) throw SchemaError("missing column 'a'");
    if (schema.dx && *schema.dx != dx)
        throw SchemaError("expected " + std::to_string(*schema.dx) + " covariate columns, found " + std::to_string(dx));
    if (schema.dy && *schema.dy != dy)
        throw SchemaError("expected " + std::to_string(*schema.dy) + " outcome columns, found " + std::to_string(dy));
    const int n0 = count_prefixed(cols, "y0_");
    const int n1 = count_prefixed(cols, "y1_");
    const bool joint = n0 > 0 || n1 > 0;
    if (joint && (n0 != dy || n1 != dy))
        throw SchemaError("joint potential-outcome columns must be y0_0..y0_" + std::to_string(dy - 1) +
                          " and y1_0..y1_" + std::to_string(dy - 1));
    if (schema.require_joint_po && !joint) throw SchemaError("missing joint potential-outcome columns y0_*, y1_*");

    std::vector<std::vector<double>> xs, ys, y0s, y1s;
    std::vector<int> as;
    int row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        const std::vector<std::string> f = split_fields(line);
        if (f.size() != header.size())
            throw SchemaError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                              " fields, found " + std::to_string(f.size()));
        auto block = [&](const std::string& prefix, int d) {
            std::vector<double> v(static_cast<std::size_t>(d));
            for (int j = 0; j < d; ++j) {
                const std::string name = prefix + std::to_string(j);
                v[static_cast<std::size_t>(j)] =
                    parse_value(f[static_cast<std::size_t>(cols.at(name))], row, name);
            }
            return v;
        };
        xs.push_back(block("x_", dx));
        ys.push_back(block("y_", dy));
        if (joint) {
            y0s.push_back(block("y0_", dy));
            y1s.push_back(block("y1_", dy));
        }
        const std::string& as_text = f[static_cast<std::size_t>(cols.at("a"))];
        if (as_text != "0" && as_text != "1")
            throw SchemaError("row " + std::to_string(row) + ": treatment must be 0 or 1, found '" + as_text + "'");
        as.push_back(as_text == "1" ? 1 : 0);
    }

    PODataset ds;
    const auto n = static_cast<Eigen::Index>(as.size());
    ds.x.resize(n, dx);
    ds.y.resize(n, dy);
    ds.a.resize(n);
    if (joint) {
        ds.y0 = Matrix(n, dy);
        ds.y1 = Matrix(n, dy);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        for (int j = 0; j < dx; ++j) ds.x(i, j) = xs[k][static_cast<std::size_t>(j)];
        for (int j = 0; j < dy; ++j) ds.y(i, j) = ys[k][static_cast<std::size_t>(j)];
        if (joint) {
            for (int j = 0; j < dy; ++j) (*ds.y0)(i, j) = y0s[k][static_cast<std::size_t>(j)];
            for (int j = 0; j < dy; ++j) (*ds.y1)(i, j) = y1s[k][static_cast<std::size_t>(j)];
        }
        ds.a(i) = as[k];
    }
    return ds;
}

}  // namespace cdpo::data
