#pragma once

// Result record shared by all experiments, with JSON and ladder-CSV output.

#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "qou/error.hpp"
#include "qou/rng.hpp"

namespace qou {

using Json = nlohmann::ordered_json;

struct Estimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

/// One row of a ladder CSV.
struct LadderRow {
    double epsilon;
    double value;
    double stderr_;
};

struct ExperimentReport {
    std::string name;
    Json config = Json::object();
    std::vector<std::pair<std::string, Estimate>> estimates;
    std::vector<std::pair<std::string, bool>> verdicts;
    std::optional<std::uint64_t> master_seed;
    std::optional<double> wall_time_seconds;
    /// Experiment-specific extras (histograms, witnesses).
    Json details = Json::object();
    std::vector<LadderRow> ladder;

    void add_estimate(const std::string& key, double value, double stderr_ = 0.0) {
        estimates.emplace_back(key, Estimate{value, stderr_});
    }
    void add_verdict(const std::string& key, bool ok) { verdicts.emplace_back(key, ok); }

    const Estimate& estimate(const std::string& key) const {
        for (const auto& [k, e] : estimates)
            if (k == key) return e;
        throw InvalidArgument("ExperimentReport", "no estimate named " + key);
    }
    bool verdict(const std::string& key) const {
        for (const auto& [k, v] : verdicts)
            if (k == key) return v;
        throw InvalidArgument("ExperimentReport", "no verdict named " + key);
    }
    /// True when every verdict holds (and there is at least one).
    bool passed() const {
        if (verdicts.empty()) return false;
        for (const auto& [k, v] : verdicts)
            if (!v) return false;
        return true;
    }

    Json to_json() const {
        Json j;
        j["name"] = name;
        j["config"] = config;
        Json est = Json::object();
        for (const auto& [k, e] : estimates) est[k] = {{"value", e.value}, {"stderr", e.stderr_}};
        j["estimates"] = est;
        Json ver = Json::object();
        for (const auto& [k, v] : verdicts) ver[k] = v;
        j["verdicts"] = ver;
        j["seed"] = master_seed ? Json(*master_seed) : Json(nullptr);
        j["wall_time"] = wall_time_seconds ? Json(*wall_time_seconds) : Json(nullptr);
        if (!details.empty()) j["details"] = details;
        return j;
    }

    void write_ladder_csv(std::ostream& os) const {
        os << "epsilon,value,stderr\n";
        for (const auto& r : ladder)
            os << Json(r.epsilon).dump() << ',' << Json(r.value).dump() << ',' << Json(r.stderr_).dump() << '\n';
    }
};

}  // namespace qou
