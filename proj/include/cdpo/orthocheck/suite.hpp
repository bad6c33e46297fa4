#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cdpo::ortho {

struct SuiteConfig {
    int n_dgps = 5;
    int nx = 6;
    int ny = 4;
    int nv = 3;  // groups of the restricted target class
    std::uint64_t seed = 2024;
    double step = 1e-3;
    std::vector<double> epsilons{0.02, 0.04, 0.08, 0.16};
    bool flip_correction = false;  // fault injection: negate the GDR correction

    void validate() const;
};

struct CheckResult {
    std::string name;
    int instance = 0;
    double value = 0.0;
    double lower = 0.0;  // -inf when unbounded
    double upper = 0.0;  // +inf when unbounded
    bool passed = false;
    std::string detail;
};

/// One remainder-study curve, kept for plotting.
struct ScalingSeries {
    std::string learner;
    int instance = 0;
    std::vector<double> epsilon;
    std::vector<double> squared_error;
    double slope = 0.0;
};

struct SuiteReport {
    SuiteConfig config;
    std::vector<CheckResult> checks;
    std::vector<ScalingSeries> scaling;
    double seconds = 0.0;

    bool passed() const;
    /// Checks whose name starts with `prefix`, all passing.
    bool passed(const std::string& prefix) const;
    nlohmann::json to_json() const;
    std::string to_text() const;
};

/// Runs every theory check on n_dgps random enumerable DGPs.
SuiteReport run_theory_suite(const SuiteConfig& config = {});

}  // namespace cdpo::ortho
