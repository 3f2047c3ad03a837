#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "birth_death.hpp"
#include "clonal_analysis.hpp"
#include "clonal_growth.hpp"
#include "cpp_sim.hpp"
#include "harness.hpp"
#include "mutation_sim.hpp"
#include "simple_tree.hpp"

namespace cpplab {

inline nlohmann::json to_json(const CombTree& t) {
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& a : t.atoms) atoms.push_back({a.t, a.x});
    return {{"z", t.z}, {"T_z", t.T_z}, {"epsilon", t.epsilon}, {"atoms", std::move(atoms)}};
}

inline CombTree comb_from_json(const nlohmann::json& j) {
    CombTree t;
    t.z = j.at("z").get<double>();
    t.T_z = j.at("T_z").get<double>();
    t.epsilon = j.at("epsilon").get<double>();
    for (const auto& a : j.at("atoms")) {
        if (!a.is_array() || a.size() != 2) throw std::invalid_argument("comb json: atoms must be [t, x] pairs");
        t.atoms.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    t.validate();
    return t;
}

inline nlohmann::json to_json(const MutationSet& m) {
    nlohmann::json marks = nlohmann::json::array();
    for (const auto& k : m.marks) marks.push_back({k.branch, k.t, k.y, k.level});
    return {{"theta_max", m.theta_max}, {"coupled", m.coupled}, {"marks", std::move(marks)}};
}

inline MutationSet mutations_from_json(const nlohmann::json& j) {
    MutationSet m;
    m.theta_max = j.at("theta_max").get<double>();
    m.coupled = j.at("coupled").get<bool>();
    for (const auto& k : j.at("marks")) {
        if (!k.is_array() || k.size() != 4) throw std::invalid_argument("mutation json: marks must be [branch, t, y, level]");
        m.marks.push_back({k[0].get<int>(), k[1].get<double>(), k[2].get<double>(), k[3].get<double>()});
    }
    return m;
}

inline nlohmann::json to_json(const BDTree& t) {
    return {{"start", t.start}, {"horizon", t.horizon}, {"beta_mass", t.beta_mass}, {"deaths", t.deaths}, {"tree", to_json(t.tree)}};
}

inline BDTree bd_tree_from_json(const nlohmann::json& j) {
    BDTree t;
    t.start = j.at("start").get<double>();
    t.horizon = j.at("horizon").get<double>();
    t.beta_mass = j.at("beta_mass").get<double>();
    t.deaths = j.at("deaths").get<bool>();
    t.tree = simple_tree_from_json(j.at("tree"));
    t.validate();
    return t;
}

// Minimal CSV writer: every field is a number or a label without commas.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : width_(header.size()) { row_strings(header); }

    template <class... Ts>
    void row(const Ts&... fields) {
        if (sizeof...(Ts) != width_) throw std::invalid_argument("csv: row width does not match the header");
        std::vector<std::string> f{cell(fields)...};
        row_strings(f);
    }

    const std::string& str() const { return out_; }

private:
    static std::string cell(const std::string& s) {
        if (s.find_first_of(",\"\n") != std::string::npos) throw std::invalid_argument("csv: field needs quoting: " + s);
        return s;
    }
    static std::string cell(const char* s) { return cell(std::string(s)); }
    static std::string cell(double v) { return format_real(v); }
    static std::string cell(bool v) { return v ? "1" : "0"; }
    template <class T>
    static std::string cell(T v)
        requires std::is_integral_v<T>
    {
        return std::to_string(v);
    }

    void row_strings(const std::vector<std::string>& f) {
        for (std::size_t i = 0; i < f.size(); ++i) out_ += (i ? "," : "") + f[i];
        out_ += "\n";
    }

    std::size_t width_;
    std::string out_;
};

inline std::string partition_csv(const std::vector<AllelicPartition>& parts) {
    CsvWriter w({"replicate", "cluster_id", "mass"});
    for (std::size_t r = 0; r < parts.size(); ++r)
        for (const auto& c : parts[r].clusters) w.row(r, c.id(), c.mass);
    return w.str();
}

struct SpectrumRow {
    double q;
    double count;
    double T_z;
};

inline std::string spectrum_csv(const std::vector<SpectrumRow>& rows) {
    CsvWriter w({"q", "count", "T_z"});
    for (const auto& r : rows) w.row(r.q, r.count, r.T_z);
    return w.str();
}

struct TrajectoryEvent {
    std::size_t replicate;
    GrowthEvent event;
};

inline std::string trajectory_csv(const std::vector<TrajectoryEvent>& log) {
    CsvWriter w({"replicate", "eta", "event", "bud_label", "new_buds"});
    for (const auto& [r, e] : log) w.row(r, e.eta, e.event, e.bud.empty() ? std::string("root") : e.bud, e.new_buds);
    return w.str();
}

inline nlohmann::json reports_json(const std::vector<TestReport>& reps, bool complete, const std::string& suite = "") {
    nlohmann::json rs = nlohmann::json::array();
    bool pass = true;
    for (const auto& r : reps) {
        rs.push_back(r.to_json());
        pass = pass && r.pass();
    }
    nlohmann::json j = {{"complete", complete}, {"pass", complete && pass}, {"reports", std::move(rs)}};
    if (!suite.empty()) j["suite"] = suite;
    return j;
}

inline std::string reports_csv(const std::vector<TestReport>& reps) {
    CsvWriter w({"experiment", "criterion", "seed", "epsilon", "replicates", "config_hash", "check", "kind", "statistic",
                 "p_value", "z_score", "pass"});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : reps)
        for (const auto& c : r.checks) {
            const bool z = c.kind == "mean" || c.kind == "ratio";
            std::string name = c.name;
            for (auto& ch : name)
                if (ch == ',') ch = ';';
            w.row(r.experiment, r.criterion, r.seed, r.epsilon, r.replicates, r.config_hash, name, c.kind, c.statistic,
                  z ? nan : c.p_value, z ? c.p_value : nan, c.pass);
        }
    return w.str();
}

// Wall-clock times live apart from the reports so the reports stay reproducible.
inline nlohmann::json runtime_sidecar(const std::vector<TestReport>& reps) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& r : reps) j[r.experiment] = r.runtime_seconds;
    return j;
}

}  // namespace cpplab
