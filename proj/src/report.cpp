#include "filtlab/report.hpp"

#include <algorithm>

namespace filtlab {

void SuiteReport::record(double residual, const std::string& location) {
    if (residual > max_residual) {
        max_residual = residual;
        worst.insert(worst.begin(), {location, residual});
        if (worst.size() > 5) worst.resize(5);
    }
}

void SuiteReport::metric(const std::string& key, double value) {
    metrics.emplace_back(key, value);
}

double SuiteReport::metric_value(const std::string& key, double fallback) const {
    for (const auto& [k, v] : metrics)
        if (k == key) return v;
    return fallback;
}

bool SuiteReport::shrinks(const std::vector<std::pair<double, double>>& pts,
                          double factor, double floor) {
    if (pts.size() < 2) return false;
    for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
        double coarse = pts[j].second;
        double fine = pts[j + 1].second;
        if (fine <= floor) continue;
        if (!(coarse >= factor * fine)) return false;
    }
    return true;
}

nlohmann::ordered_json SuiteReport::to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["pass"] = pass;
    j["max_residual"] = max_residual;
    j["tolerance"] = tolerance;
    if (!worst.empty()) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& o : worst)
            arr.push_back({{"location", o.location}, {"magnitude", o.magnitude}});
        j["worst"] = arr;
    }
    if (!refinement.empty()) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& [dt, r] : refinement)
            arr.push_back({{"dt", dt}, {"residual", r}});
        j["refinement"] = arr;
    }
    if (!metrics.empty()) {
        auto obj = nlohmann::ordered_json::object();
        for (const auto& [k, v] : metrics) obj[k] = v;
        j["metrics"] = obj;
    }
    if (!note.empty()) j["note"] = note;
    j["wall_time_ms"] = wall_time_ms;
    return j;
}

SuiteReport merge_reports(const std::string& name,
                          const std::vector<SuiteReport>& parts) {
    SuiteReport out;
    out.name = name;
    out.pass = true;
    for (const auto& p : parts) {
        out.pass = out.pass && p.pass;
        if (p.max_residual > out.max_residual) out.max_residual = p.max_residual;
        out.tolerance = std::max(out.tolerance, p.tolerance);
        out.wall_time_ms += p.wall_time_ms;
        out.metric(p.name, p.max_residual);
    }
    return out;
}

}  // namespace filtlab
