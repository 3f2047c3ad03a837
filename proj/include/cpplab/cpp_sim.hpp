#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "measures.hpp"
#include "random.hpp"
#include "simple_tree.hpp"

namespace cpplab {

struct Atom {
    double t = 0.0;
    double x = 0.0;
    bool operator==(const Atom&) const = default;
};

// Branch index of the origin branch {0} x (0, z].
inline constexpr int kOriginBranch = -1;

struct CombTree {
    double z = 1.0;
    double T_z = 0.0;
    double epsilon = 0.0;
    std::vector<Atom> atoms;

    double origin_height() const { return z; }
    double branch_height(int b) const { return b == kOriginBranch ? z : atoms.at(static_cast<std::size_t>(b)).x; }
    double branch_time(int b) const { return b == kOriginBranch ? 0.0 : atoms.at(static_cast<std::size_t>(b)).t; }

    void validate() const {
        if (!(z > 0.0) || !(T_z > 0.0) || !(epsilon > 0.0)) throw std::logic_error("comb tree: z, T_z, epsilon must be positive");
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            const auto& a = atoms[i];
            if (!(a.t > 0.0 && a.t < T_z)) throw std::logic_error("comb tree: atom time outside (0, T_z)");
            if (!(a.x >= epsilon && a.x < z)) throw std::logic_error("comb tree: atom height outside [epsilon, z)");
            if (i > 0 && !(a.t > atoms[i - 1].t)) throw std::logic_error("comb tree: atom times must strictly increase");
        }
    }

    bool operator==(const CombTree&) const = default;
};

// Sparse-table range maximum over atom heights.
class CombIndex {
public:
    explicit CombIndex(const CombTree& tree) : n_(tree.atoms.size()) {
        x_.reserve(n_);
        for (const auto& a : tree.atoms) x_.push_back(a.x);
        std::size_t levels = 1;
        while ((std::size_t{1} << levels) <= n_) ++levels;
        arg_.assign(levels, {});
        arg_[0].resize(n_);
        for (std::size_t i = 0; i < n_; ++i) arg_[0][i] = i;
        for (std::size_t k = 1; k < levels; ++k) {
            std::size_t w = std::size_t{1} << k, half = w >> 1;
            arg_[k].resize(n_ + 1 - w);
            for (std::size_t i = 0; i + w <= n_; ++i) {
                std::size_t a = arg_[k - 1][i], b = arg_[k - 1][i + half];
                arg_[k][i] = x_[b] > x_[a] ? b : a;
            }
        }
    }

    std::size_t size() const { return n_; }

    // index of the highest atom in [l, r), r > l
    std::size_t argmax(std::size_t l, std::size_t r) const {
        std::size_t k = 0;
        while ((std::size_t{2} << k) <= r - l) ++k;
        std::size_t a = arg_[k][l], b = arg_[k][r - (std::size_t{1} << k)];
        return x_[b] > x_[a] ? b : a;
    }

    // first atom index j >= from with height >= y, or size() if none
    std::size_t first_at_least(std::size_t from, double y) const {
        std::size_t p = from;
        for (std::size_t k = arg_.size(); k-- > 0;) {
            std::size_t w = std::size_t{1} << k;
            if (p + w <= n_ && x_[arg_[k][p]] < y) p += w;
        }
        return p;
    }

private:
    std::size_t n_;
    std::vector<double> x_;
    std::vector<std::vector<std::size_t>> arg_;
};

namespace detail {

inline void sort_unique_times(std::vector<double>& ts, double T, RandomStream& rng) {
    for (;;) {
        std::sort(ts.begin(), ts.end());
        bool dup = false;
        for (std::size_t i = 1; i < ts.size(); ++i)
            if (ts[i] == ts[i - 1]) {
                ts[i] = rng.uniform() * T;
                dup = true;
            }
        if (!dup) return;
    }
}

}  // namespace detail

inline CombTree sample_cpp(const IntensityMeasure& nu, double z, double epsilon, RandomStream& rng) {
    if (!(epsilon > 0.0) || !(epsilon < z)) throw std::invalid_argument("sample_cpp: need 0 < epsilon < z");
    const double top = nu.tail(z), bottom = nu.tail(epsilon);
    if (!(top > 0.0)) throw std::domain_error("sample_cpp: tail at z must be positive");
    if (!std::isfinite(bottom)) throw std::domain_error("sample_cpp: tail at epsilon must be finite");
    CombTree tree;
    tree.z = z;
    tree.epsilon = epsilon;
    tree.T_z = rng.exponential(top);
    const auto n = rng.poisson((bottom - top) * tree.T_z);
    std::vector<double> ts(n);
    for (auto& t : ts) t = rng.uniform() * tree.T_z;
    detail::sort_unique_times(ts, tree.T_z, rng);
    tree.atoms.reserve(n);
    for (double t : ts) tree.atoms.push_back({t, sample_tail_between(nu, rng, epsilon, z)});
    return tree;
}

inline CombTree sample_cpp(const MeasurePair& pair, double z, double epsilon, RandomStream& rng) {
    return sample_cpp(pair.nu, z, epsilon, rng);
}

// Comb restricted to the window [0, t_max) x [epsilon, inf) with no stopping
// height; z is placed above every atom so the origin branch is inert.
inline CombTree sample_comb_window(const IntensityMeasure& nu, double t_max, double epsilon, RandomStream& rng) {
    if (!(t_max > 0.0) || !(epsilon > 0.0)) throw std::invalid_argument("sample_comb_window: bad window");
    if (nu.atom_at_infinity() > 0.0) throw std::domain_error("sample_comb_window: measure has an atom at infinity");
    CombTree tree;
    tree.T_z = t_max;
    tree.epsilon = epsilon;
    const auto n = rng.poisson(nu.tail(epsilon) * t_max);
    std::vector<double> ts(n);
    for (auto& t : ts) t = rng.uniform() * t_max;
    detail::sort_unique_times(ts, t_max, rng);
    double hi = epsilon;
    for (double t : ts) {
        double x = sample_tail(nu, rng, epsilon);
        tree.atoms.push_back({t, x});
        hi = std::max(hi, x);
    }
    tree.z = 2.0 * hi;
    return tree;
}

struct LineageSegment {
    int branch = kOriginBranch;
    double t = 0.0;
    double x_hi = 0.0;
    double x_lo = 0.0;
};

// Path from the root down to the leaf alpha_s, root segment first.
struct Lineage {
    std::vector<LineageSegment> segments;
};

inline Lineage lineage(const CombTree& tree, double s) {
    if (!(s >= 0.0 && s < tree.T_z)) throw std::out_of_range("lineage: time outside [0, T_z)");
    std::vector<LineageSegment> up;
    auto it = std::upper_bound(tree.atoms.begin(), tree.atoms.end(), s, [](double v, const Atom& a) { return v < a.t; });
    long j = static_cast<long>(it - tree.atoms.begin()) - 1;
    double lo = 0.0;
    while (j >= 0) {
        const auto& a = tree.atoms[static_cast<std::size_t>(j)];
        if (a.x > lo) {
            up.push_back({static_cast<int>(j), a.t, a.x, lo});
            lo = a.x;
        }
        --j;
    }
    up.push_back({kOriginBranch, 0.0, tree.z, lo});
    return {{up.rbegin(), up.rend()}};
}

// first atom after branch b with height >= y; returns its index or atoms.size()
inline std::size_t shadow_end_index(const CombIndex& index, int branch, double y) {
    return index.first_at_least(static_cast<std::size_t>(branch + 1), y);
}

namespace detail {

struct CartesianFrame {
    Label label;
    int branch;
    std::size_t l, r;  // atoms strictly inside the block
    double tl, tr;     // block [tl, tr)
    double alpha;
};

}  // namespace detail

// Builds the reversed simple tree of the comb, pruning each branch at
// cut(branch, hi, lo): a height in (lo, hi) where the branch is truncated into a bud.
template <class Cut>
SimpleTree comb_to_simple_tree(const CombTree& tree, const CombIndex& index, Cut&& cut) {
    SimpleTree out;
    out.reversed = true;
    std::vector<detail::CartesianFrame> st{{"", kOriginBranch, 0, tree.atoms.size(), 0.0, tree.T_z, tree.z}};
    while (!st.empty()) {
        detail::CartesianFrame f = std::move(st.back());
        st.pop_back();
        const bool leaf = f.l == f.r;
        const std::size_t m = leaf ? 0 : index.argmax(f.l, f.r);
        const double lo = leaf ? 0.0 : tree.atoms[m].x;
        TreeNode node;
        node.alpha = f.alpha;
        if (std::optional<double> y = cut(f.branch, f.alpha, lo)) {
            node.omega = *y;
            out.nodes.emplace(f.label, node);
            continue;
        }
        if (leaf) {
            node.omega = 0.0;
            node.leaf_mass = f.tr - f.tl;
            out.nodes.emplace(f.label, node);
            continue;
        }
        node.omega = lo;
        out.nodes.emplace(f.label, node);
        const double tm = tree.atoms[m].t;
        st.push_back({f.label + "1", static_cast<int>(m), m + 1, f.r, tm, f.tr, lo});
        st.push_back({f.label + "0", f.branch, f.l, m, f.tl, tm, lo});
    }
    return out;
}

inline SimpleTree to_simple_tree(const CombTree& tree) {
    CombIndex index(tree);
    return comb_to_simple_tree(tree, index, [](int, double, double) { return std::optional<double>{}; });
}

// Inverse of to_simple_tree: in-order leaf masses give the boundary, internal
// nodes give atoms at the start of their right subtree.
inline CombTree comb_from_simple_tree(const SimpleTree& t, double epsilon) {
    if (!t.reversed) throw std::invalid_argument("comb_from_simple_tree: tree must be reversed");
    t.validate();
    CombTree out;
    out.z = t.at("").alpha;
    out.epsilon = epsilon;
    double cursor = 0.0;
    struct Frame {
        Label u;
        int stage;
    };
    std::vector<Frame> st{{"", 0}};
    while (!st.empty()) {
        Frame& f = st.back();
        if (t.is_leaf(f.u)) {
            const auto& n = t.at(f.u);
            if (!n.leaf_mass) throw std::invalid_argument("comb_from_simple_tree: leaf '" + f.u + "' has no mass");
            cursor += *n.leaf_mass;
            st.pop_back();
            continue;
        }
        if (f.stage == 0) {
            f.stage = 1;
            st.push_back({f.u + "0", 0});
        } else if (f.stage == 1) {
            f.stage = 2;
            out.atoms.push_back({cursor, t.at(f.u).omega});
            st.push_back({f.u + "1", 0});
        } else {
            st.pop_back();
        }
    }
    out.T_z = cursor;
    return out;
}

// Drop atoms below a coarser floor; returns old->new index map (-2 = dropped).
inline CombTree coarsen(const CombTree& tree, double epsilon, std::vector<long>* remap = nullptr) {
    if (!(epsilon >= tree.epsilon)) throw std::invalid_argument("coarsen: floor must not decrease");
    CombTree out{tree.z, tree.T_z, epsilon, {}};
    if (remap) remap->assign(tree.atoms.size(), -2);
    for (std::size_t i = 0; i < tree.atoms.size(); ++i)
        if (tree.atoms[i].x >= epsilon) {
            if (remap) (*remap)[i] = static_cast<long>(out.atoms.size());
            out.atoms.push_back(tree.atoms[i]);
        }
    return out;
}

inline double first_branch_height(const SimpleTree& t) {
    return t.is_leaf("") ? 0.0 : t.at("").omega;
}

}  // namespace cpplab
