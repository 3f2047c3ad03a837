#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "clonal_analysis.hpp"
#include "cpp_sim.hpp"
#include "measures.hpp"
#include "mutation_sim.hpp"
#include "random.hpp"
#include "simple_tree.hpp"

namespace cpplab {

// Points of the comb whose root path carries no mark of level <= theta, origin
// marks included. Each branch is cut at its highest active mark, which becomes a bud.
inline SimpleTree clonal_subtree_at_level(const CombTree& tree, const MutationSet& m, double theta) {
    check_provenance(tree, m);
    if (m.coupled && theta > m.theta_max * (1 + 1e-12))
        throw std::invalid_argument("clonal_subtree_at_level: theta exceeds the materialized theta_max");
    std::unordered_map<int, std::vector<double>> cuts;
    for (const auto& k : m.marks)
        if (k.level <= theta) cuts[k.branch].push_back(k.y);
    for (auto& [b, ys] : cuts) std::sort(ys.begin(), ys.end());
    CombIndex index(tree);
    return comb_to_simple_tree(tree, index, [&](int branch, double hi, double lo) -> std::optional<double> {
        auto it = cuts.find(branch);
        if (it == cuts.end()) return std::nullopt;
        const auto& ys = it->second;
        auto p = std::lower_bound(ys.begin(), ys.end(), hi);
        if (p == ys.begin() || !(*std::prev(p) > lo)) return std::nullopt;
        return *std::prev(p);
    });
}

struct GrowthEvent {
    double eta = 0.0;
    std::string event;  // "graft" or "freeze"
    Label bud;
    std::size_t new_buds = 0;
};

// X_eta: the clonal subtree at level e^{-eta}, with the absolute ring time of
// each live bud. Buds at or below the height floor are frozen and carry no clock.
struct GrowthState {
    double eta = 0.0;
    SimpleTree tree;
    std::map<Label, double> clocks;
    std::set<Label> frozen;
    IntensityMeasure nu;
    double epsilon = 0.0;

    std::size_t live_buds() const { return clocks.size(); }

    void validate() const {
        tree.validate();
        if (!tree.reversed) throw std::logic_error("growth state: tree must be reversed");
        std::size_t n = 0;
        for (const auto& b : tree.buds()) {
            ++n;
            if (clocks.count(b) == frozen.count(b)) throw std::logic_error("growth state: bud '" + b + "' must be live or frozen");
        }
        if (n != clocks.size() + frozen.size()) throw std::logic_error("growth state: clocks on non-buds");
        for (const auto& [b, t] : clocks)
            if (!(t > eta)) throw std::logic_error("growth state: clock at '" + b + "' already rang");
    }
};

namespace detail {

inline void arm_buds(GrowthState& s, const Label& prefix, RandomStream& rng, std::vector<GrowthEvent>* log) {
    for (auto it = s.tree.nodes.lower_bound(prefix); it != s.tree.nodes.end() && it->first.compare(0, prefix.size(), prefix) == 0;
         ++it) {
        const Label& u = it->first;
        if (!s.tree.is_bud(u)) continue;
        if (it->second.omega <= s.epsilon) {
            s.frozen.insert(u);
            if (log) log->push_back({s.eta, "freeze", u, 0});
        } else {
            s.clocks[u] = s.eta + rng.exponential(1.0);
        }
    }
}

}  // namespace detail

inline GrowthState make_growth_state(const IntensityMeasure& nu, SimpleTree tree, double eta, double epsilon,
                                     RandomStream& rng, std::vector<GrowthEvent>* log = nullptr) {
    if (!tree.reversed) throw std::invalid_argument("growth state: tree must be reversed");
    GrowthState s{eta, std::move(tree), {}, {}, nu, epsilon};
    detail::arm_buds(s, "", rng, log);
    return s;
}

// Starts from a materialized coupling at eta0.
inline GrowthState growth_from_coupling(const IntensityMeasure& nu, const CombTree& tree, const MutationSet& m,
                                        double eta0, RandomStream& rng, std::vector<GrowthEvent>* log = nullptr) {
    return make_growth_state(nu, clonal_subtree_at_level(tree, m, std::exp(-eta0)), eta0, tree.epsilon, rng, log);
}

// Clonal tree below a bud at height z: a fresh comb of depth z with marks of
// intensity theta dx, cut at level theta.
inline SimpleTree sample_clonal_tree(const IntensityMeasure& nu, double z, double theta, double epsilon,
                                     RandomStream& rng) {
    CombTree c = sample_cpp(nu, z, epsilon, rng);
    MutationSet m = sample_mutations(c, MutationMeasure::uniform(theta), rng);
    return clonal_subtree_at_level(c, m, 0.0);
}

// Rings the earliest clock and grafts a clonal tree of the new level on its bud.
inline void grow_step(GrowthState& s, RandomStream& rng, std::vector<GrowthEvent>* log = nullptr) {
    if (s.clocks.empty()) throw std::logic_error("grow_step: no live buds");
    auto first = std::min_element(s.clocks.begin(), s.clocks.end(),
                                  [](const auto& a, const auto& b) { return a.second < b.second; });
    const Label bud = first->first;
    s.eta = first->second;
    s.clocks.erase(first);
    const double h = s.tree.at(bud).omega;
    SimpleTree y = sample_clonal_tree(s.nu, h, std::exp(-s.eta), s.epsilon, rng);
    s.tree = graft(s.tree, bud, y);
    const std::size_t before = s.clocks.size() + s.frozen.size();
    detail::arm_buds(s, bud, rng, log);
    if (log) log->push_back({s.eta, "graft", bud, s.clocks.size() + s.frozen.size() - before});
}

// Runs every jump up to eta1, then moves the state to eta1.
inline void grow_until(GrowthState& s, double eta1, RandomStream& rng, std::vector<GrowthEvent>* log = nullptr,
                       std::size_t max_steps = 1'000'000) {
    if (eta1 < s.eta) throw std::invalid_argument("grow_until: eta1 is in the past");
    for (std::size_t i = 0;; ++i) {
        auto first = std::min_element(s.clocks.begin(), s.clocks.end(),
                                      [](const auto& a, const auto& b) { return a.second < b.second; });
        if (first == s.clocks.end() || first->second > eta1) break;
        if (i == max_steps) throw std::runtime_error("grow_until: step cap reached");
        grow_step(s, rng, log);
    }
    s.eta = eta1;
}

struct TreeSummary {
    std::size_t buds = 0;
    double total_length = 0.0;
    double highest_leaf = 0.0;
};

inline TreeSummary summarize_tree(const SimpleTree& t) {
    TreeSummary out;
    out.total_length = t.total_length();
    for (const auto& u : t.leaves()) {
        if (t.is_bud(u)) ++out.buds;
        out.highest_leaf = std::max(out.highest_leaf, t.at(u).omega);
    }
    return out;
}

// First eta at which a boundary point becomes clonal. Censored when some
// lineage carries no mark up to theta_max, in which case tau <= -ln theta_max.
struct TauSample {
    double tau = 0.0;
    bool censored = false;
};

inline TauSample tau_z_from_coupling(const CombTree& tree, const MutationSet& m) {
    check_provenance(tree, m);
    CombIndex index(tree);
    struct Ev {
        double t;
        bool open;
        double level;
    };
    std::vector<Ev> ev;
    for (const auto& s : shadows(tree, index, m, m.theta_max, true)) {
        ev.push_back({s.a, true, m.marks[s.mark].level});
        ev.push_back({s.b, false, m.marks[s.mark].level});
    }
    std::sort(ev.begin(), ev.end(), [](const Ev& a, const Ev& b) { return a.t < b.t; });
    std::multiset<double> active;
    double best = 0.0, cursor = 0.0;
    bool free_lineage = false;
    auto close_segment = [&](double t) {
        if (!(t > cursor)) return;
        if (active.empty()) free_lineage = true;
        else best = std::max(best, *active.begin());
    };
    for (std::size_t i = 0; i < ev.size();) {
        close_segment(ev[i].t);
        cursor = std::max(cursor, ev[i].t);
        const double t = ev[i].t;
        for (; i < ev.size() && ev[i].t == t; ++i) {
            if (ev[i].open) active.insert(ev[i].level);
            else active.erase(active.find(ev[i].level));
        }
    }
    close_segment(tree.T_z);
    if (free_lineage) return {-std::log(m.theta_max), true};
    return {-std::log(best), false};
}

}  // namespace cpplab
