#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpp_sim.hpp"
#include "mutation_sim.hpp"

namespace cpplab {

struct Interval {
    double a = 0.0;
    double b = 0.0;
    double length() const { return b - a; }
    bool operator==(const Interval&) const = default;
};

// Sorted, disjoint, nonempty half-open intervals.
struct IntervalSet {
    std::vector<Interval> intervals;

    double total_length() const {
        double s = 0.0;
        for (const auto& i : intervals) s += i.length();
        return s;
    }
    bool empty() const { return intervals.empty(); }
    bool contains(double t) const {
        auto it = std::upper_bound(intervals.begin(), intervals.end(), t,
                                   [](double v, const Interval& i) { return v < i.a; });
        return it != intervals.begin() && t < std::prev(it)->b;
    }
    void validate() const {
        for (std::size_t i = 0; i < intervals.size(); ++i) {
            if (!(intervals[i].a < intervals[i].b)) throw std::logic_error("interval set: empty member");
            if (i > 0 && !(intervals[i - 1].b < intervals[i].a))
                throw std::logic_error("interval set: members must be sorted and disjoint");
        }
    }
    bool operator==(const IntervalSet&) const = default;
};

// Union of arbitrary half-open intervals; touching pieces are merged.
inline IntervalSet interval_union(std::vector<Interval> pieces) {
    std::sort(pieces.begin(), pieces.end(), [](const Interval& x, const Interval& y) { return x.a < y.a; });
    IntervalSet out;
    for (const auto& p : pieces) {
        if (!(p.a < p.b)) continue;
        if (!out.intervals.empty() && p.a <= out.intervals.back().b)
            out.intervals.back().b = std::max(out.intervals.back().b, p.b);
        else
            out.intervals.push_back(p);
    }
    return out;
}

inline IntervalSet complement(const IntervalSet& s, double a, double b) {
    IntervalSet out;
    double cursor = a;
    for (const auto& i : s.intervals) {
        if (i.a > cursor) out.intervals.push_back({cursor, std::min(i.a, b)});
        cursor = std::max(cursor, i.b);
        if (cursor >= b) break;
    }
    if (cursor < b) out.intervals.push_back({cursor, b});
    return out;
}

// Boundary points whose lineage passes through a mark: [t_i, t_j) where j is
// the first later atom reaching the mark height.
struct Shadow {
    double a = 0.0;
    double b = 0.0;
    std::size_t mark = 0;
};

inline bool mark_active(const Mark& k, double theta, bool include_origin) {
    return k.level <= theta && (include_origin || k.branch != kOriginBranch);
}

inline std::vector<Shadow> shadows(const CombTree& tree, const CombIndex& index, const MutationSet& m, double theta,
                                   bool include_origin) {
    std::vector<Shadow> out;
    for (std::size_t i = 0; i < m.marks.size(); ++i) {
        const Mark& k = m.marks[i];
        if (!mark_active(k, theta, include_origin)) continue;
        std::size_t j = shadow_end_index(index, k.branch, k.y);
        double end = j < tree.atoms.size() ? tree.atoms[j].t : tree.T_z;
        double start = tree.branch_time(k.branch);
        if (start < end) out.push_back({start, end, i});
    }
    return out;
}

// Origin marks are ignored unless include_origin is set, which gives the
// unconditional clonal boundary instead of the one conditioned on a clean origin.
inline IntervalSet clonal_set(const CombTree& tree, const MutationSet& m, double theta, bool include_origin = false) {
    check_provenance(tree, m);
    CombIndex index(tree);
    std::vector<Interval> covered;
    for (const auto& s : shadows(tree, index, m, theta, include_origin)) covered.push_back({s.a, s.b});
    return complement(interval_union(std::move(covered)), 0.0, tree.T_z);
}

inline double clonal_mass(const IntervalSet& s) { return s.total_length(); }

inline bool clonal_existence(const CombTree& tree, const MutationSet& m, double theta) {
    return !clonal_set(tree, m, theta, true).empty();
}

inline constexpr int kRootClone = -1;

struct Cluster {
    int mark = kRootClone;  // index into the mutation set, or kRootClone
    double mass = 0.0;
    std::string id() const { return mark == kRootClone ? "root-clone" : "m" + std::to_string(mark); }
    bool operator==(const Cluster&) const = default;
};

struct AllelicPartition {
    std::vector<Cluster> clusters;  // root clone first when it has positive mass
    double T_z = 0.0;
    double q_floor = 0.0;

    double root_mass() const {
        for (const auto& c : clusters)
            if (c.mark == kRootClone) return c.mass;
        return 0.0;
    }
    double total_mass() const {
        double s = 0.0;
        for (const auto& c : clusters) s += c.mass;
        return s;
    }
};

// Each boundary point belongs to the cluster of the most recent (lowest) mark
// on its lineage. Shadows are laminar, so the innermost covering shadow wins and
// a cluster's mass is its shadow length minus that of its direct sub-shadows.
inline AllelicPartition allelic_partition(const CombTree& tree, const MutationSet& m, double theta,
                                          bool include_origin = false) {
    check_provenance(tree, m);
    CombIndex index(tree);
    auto sh = shadows(tree, index, m, theta, include_origin);
    std::sort(sh.begin(), sh.end(), [&](const Shadow& x, const Shadow& y) {
        if (x.a != y.a) return x.a < y.a;
        if (x.b != y.b) return x.b > y.b;
        const Mark &mx = m.marks[x.mark], &my = m.marks[y.mark];
        if (mx.y != my.y) return mx.y > my.y;
        return mx.level < my.level;
    });
    std::vector<double> mass(sh.size());
    std::vector<std::size_t> stack;
    double top_level = 0.0;
    for (std::size_t i = 0; i < sh.size(); ++i) {
        while (!stack.empty() && sh[stack.back()].b <= sh[i].a) stack.pop_back();
        const double len = sh[i].b - sh[i].a;
        mass[i] = len;
        if (stack.empty()) top_level += len;
        else mass[stack.back()] -= len;
        stack.push_back(i);
    }
    AllelicPartition p;
    p.T_z = tree.T_z;
    p.q_floor = tree.T_z / static_cast<double>(tree.atoms.size() + 1);
    double root = tree.T_z - top_level;
    if (root > 0.0) p.clusters.push_back({kRootClone, root});
    for (std::size_t i = 0; i < sh.size(); ++i)
        if (mass[i] > 0.0) p.clusters.push_back({static_cast<int>(sh[i].mark), mass[i]});
    return p;
}

// Number of mutation clusters (root clone excluded) with mass above q.
// Thresholds at or below the resolution floor are rejected unless allowed.
inline std::size_t spectrum_tail(const AllelicPartition& p, double q, bool allow_unresolved = false) {
    if (!(q > 0.0)) throw std::invalid_argument("spectrum_tail: q must be positive");
    if (!allow_unresolved && q <= p.q_floor)
        throw std::domain_error("spectrum_tail: q is at or below the resolution floor " + std::to_string(p.q_floor));
    std::size_t n = 0;
    for (const auto& c : p.clusters)
        if (c.mark != kRootClone && c.mass > q) ++n;
    return n;
}

// Comb over the clonal points: clonal time is re-parameterized by its running
// Lebesgue mass, atoms inside clonal intervals keep their heights, and each gap
// between clonal intervals becomes one atom at the highest depth it spans.
inline CombTree reduced_clonal_subtree(const CombTree& tree, const MutationSet& m, double theta,
                                       bool include_origin = false) {
    IntervalSet r = clonal_set(tree, m, theta, include_origin);
    if (r.empty()) throw std::domain_error("reduced_clonal_subtree: clonal set is empty");
    CombTree out{tree.z, r.total_length(), tree.epsilon, {}};
    CombIndex index(tree);
    const auto& at = tree.atoms;
    auto first_after = [&](double t, bool inclusive) {
        return static_cast<std::size_t>(
            (inclusive ? std::lower_bound(at.begin(), at.end(), t, [](const Atom& a, double v) { return a.t < v; })
                       : std::upper_bound(at.begin(), at.end(), t, [](double v, const Atom& a) { return v < a.t; })) -
            at.begin());
    };
    double sigma = 0.0;
    for (std::size_t k = 0; k < r.intervals.size(); ++k) {
        const Interval& iv = r.intervals[k];
        if (k > 0) {
            // gap [b_{k-1}, a_k], both ends included
            std::size_t l = first_after(r.intervals[k - 1].b, true), h = first_after(iv.a, false);
            if (h > l) out.atoms.push_back({sigma, at[index.argmax(l, h)].x});
        }
        for (std::size_t j = first_after(iv.a, false); j < at.size() && at[j].t < iv.b; ++j)
            out.atoms.push_back({sigma + (at[j].t - iv.a), at[j].x});
        sigma += iv.length();
    }
    return out;
}

}  // namespace cpplab
