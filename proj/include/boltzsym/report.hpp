#pragma once

#include "core.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace boltzsym {

using json = nlohmann::ordered_json;

struct ReportCell {
    json inputs = json::object();
    double lhs = 0, rhs = 0, ratio = 0;
};

/// Outcome of one numerical check. Pass/fail is a deterministic threshold decision.
struct VerificationReport {
    std::string name;
    json params = json::object();
    std::vector<ReportCell> cells;
    std::map<std::string, double> fitted_constants;
    double drift = 0;
    bool pass = false;
    std::string note;
    std::string headline;  // fitted constant reported as fitted_C in summaries

    void add(json inputs, double lhs, double rhs)
    {
        cells.push_back({std::move(inputs), lhs, rhs, rhs != 0 ? lhs / rhs : (lhs == 0 ? 0.0 : INFINITY)});
    }

    double ratio_min() const
    {
        double m = INFINITY;
        for (const auto& c : cells) m = std::min(m, c.ratio);
        return cells.empty() ? 0.0 : m;
    }
    double headline_value() const
    {
        auto it = fitted_constants.find(headline);
        return it == fitted_constants.end() ? NAN : it->second;
    }

    double ratio_max() const
    {
        double m = -INFINITY;
        for (const auto& c : cells) m = std::max(m, c.ratio);
        return cells.empty() ? 0.0 : m;
    }

    json to_json() const
    {
        json j;
        j["name"] = name;
        j["params"] = params;
        json cs = json::array();
        for (const auto& c : cells) cs.push_back({{"inputs", c.inputs}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"ratio", c.ratio}});
        j["cells"] = cs;
        json fc = json::object();
        for (const auto& [k, v] : fitted_constants) fc[k] = v;
        j["fitted_constants"] = fc;
        j["drift"] = drift;
        j["pass"] = pass;
        if (!note.empty()) j["note"] = note;
        if (!headline.empty()) j["headline"] = headline;
        return j;
    }

    // JSON has no inf/nan; they are written as null and read back as nan.
    static double number(const json& j) { return j.is_null() ? NAN : j.get<double>(); }

    static VerificationReport from_json(const json& j)
    {
        VerificationReport r;
        r.name = j.at("name").get<std::string>();
        r.params = j.value("params", json::object());
        for (const auto& c : j.at("cells"))
            r.cells.push_back({c.at("inputs"), number(c.at("lhs")), number(c.at("rhs")), number(c.at("ratio"))});
        for (const auto& [k, v] : j.at("fitted_constants").items()) r.fitted_constants[k] = number(v);
        r.drift = number(j.at("drift"));
        r.pass = j.at("pass").get<bool>();
        r.note = j.value("note", std::string());
        r.headline = j.value("headline", std::string());
        return r;
    }
};

/// |a - b| / max(|a|, |b|), zero when both vanish.
inline double rel_change(double a, double b)
{
    double m = std::max(std::abs(a), std::abs(b));
    return m > 0 ? std::abs(a - b) / m : 0.0;
}

}  // namespace boltzsym
