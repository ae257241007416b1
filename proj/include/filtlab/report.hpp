#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace filtlab {

/// Machine-readable outcome of one check: pass/fail verdict, the residual
/// that drove it, worst offending locations, and optional refinement data.
struct SuiteReport {
    std::string name;
    bool pass = false;
    double max_residual = 0.0;
    double tolerance = 0.0;

    struct Offender {
        std::string location;
        double magnitude = 0.0;
    };
    std::vector<Offender> worst;

    // (dt, residual) pairs for refinement studies, coarsest first.
    std::vector<std::pair<double, double>> refinement;

    // Named sub-residuals (e.g. both directions of an equivalence).
    std::vector<std::pair<std::string, double>> metrics;

    double wall_time_ms = 0.0;
    std::string note;

    void record(double residual, const std::string& location);
    void metric(const std::string& key, double value);
    double metric_value(const std::string& key, double fallback = 0.0) const;

    // True when each successive residual is at least `factor` times smaller
    // than the previous one (residuals at the noise floor count as shrunk).
    static bool shrinks(const std::vector<std::pair<double, double>>& pts,
                        double factor, double floor = 1e-14);

    nlohmann::ordered_json to_json() const;
};

SuiteReport merge_reports(const std::string& name,
                          const std::vector<SuiteReport>& parts);

}  // namespace filtlab
