#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cpp_sim.hpp"
#include "measures.hpp"
#include "quadrature.hpp"

namespace cpplab {

struct Mark {
    int branch = kOriginBranch;
    double t = 0.0;
    double y = 0.0;
    double level = 0.0;
    bool operator==(const Mark&) const = default;
};

// Marks are materialized only at heights >= epsilon of the tree they sit on.
struct MutationSet {
    std::vector<Mark> marks;
    double theta_max = 1.0;
    bool coupled = false;

    std::size_t size() const { return marks.size(); }
    bool operator==(const MutationSet&) const = default;
};

namespace detail {

template <class HeightFn>
void place_marks(const CombTree& tree, std::vector<Mark>& out, double level_max, RandomStream& rng,
                 HeightFn&& count_and_height) {
    auto one_branch = [&](int b) {
        const double x = tree.branch_height(b), t = tree.branch_time(b);
        if (!(x > tree.epsilon)) return;
        const auto k = count_and_height.count(x, rng);
        for (std::uint64_t i = 0; i < k; ++i) {
            double y = count_and_height.height(x, rng);
            double lv = level_max > 0.0 ? rng.uniform() * level_max : 0.0;
            out.push_back({b, t, y, lv});
        }
    };
    one_branch(kOriginBranch);
    for (std::size_t i = 0; i < tree.atoms.size(); ++i) one_branch(static_cast<int>(i));
}

}  // namespace detail

// Fixed measure mu: per branch Poisson(mu(x) - mu(eps)) marks at heights drawn by inverse transform, level 0.
inline MutationSet sample_mutations(const CombTree& tree, const MutationMeasure& mu, RandomStream& rng) {
    MutationSet m;
    m.theta_max = 1.0;
    if (mu.is_zero()) return m;
    const double me = mu.cum(tree.epsilon);
    struct {
        const MutationMeasure& mu;
        double me;
        std::uint64_t count(double x, RandomStream& r) const { return r.poisson(mu.cum(x) - me); }
        double height(double x, RandomStream& r) const {
            double top = mu.cum(x);
            for (;;) {
                double y = mu.inverse_cum(me + (top - me) * r.uniform());
                if (y < x) return y;
            }
        }
    } law{mu, me};
    detail::place_marks(tree, m.marks, 0.0, rng, law);
    return m;
}

// Level coupling: Lebesgue-intensity heights with i.i.d. uniform levels on [0, theta_max].
inline MutationSet sample_mutations(const CombTree& tree, const MutationMeasure& mu, double theta_max,
                                    RandomStream& rng) {
    if (mu.uniform_rate() != 1.0)
        throw std::invalid_argument("coupled mutations need the Lebesgue measure (uniform, theta = 1)");
    if (!(theta_max > 0.0)) throw std::invalid_argument("coupled mutations need theta_max > 0");
    MutationSet m;
    m.theta_max = theta_max;
    m.coupled = true;
    struct {
        double eps, th;
        std::uint64_t count(double x, RandomStream& r) const { return r.poisson(th * (x - eps)); }
        double height(double x, RandomStream& r) const { return r.uniform(eps, x); }
    } law{tree.epsilon, theta_max};
    detail::place_marks(tree, m.marks, theta_max, rng, law);
    return m;
}

inline MutationSet sample_coupled_mutations(const CombTree& tree, double theta_max, RandomStream& rng) {
    return sample_mutations(tree, MutationMeasure::uniform(1.0), theta_max, rng);
}

inline MutationSet restrict_level(const MutationSet& m, double theta) {
    if (theta < 0.0) throw std::invalid_argument("restrict_level: theta must be >= 0");
    if (m.coupled && theta > m.theta_max * (1 + 1e-12))
        throw std::invalid_argument("restrict_level: theta exceeds the materialized theta_max");
    MutationSet out;
    out.theta_max = m.coupled ? theta : m.theta_max;
    out.coupled = m.coupled;
    for (const auto& k : m.marks)
        if (k.level <= theta) out.marks.push_back(k);
    return out;
}

// Exact coupling of a coarser floor: atoms and marks below epsilon are dropped.
inline std::pair<CombTree, MutationSet> coarsen(const CombTree& tree, const MutationSet& m, double epsilon) {
    std::vector<long> remap;
    CombTree c = coarsen(tree, epsilon, &remap);
    MutationSet out;
    out.theta_max = m.theta_max;
    out.coupled = m.coupled;
    for (const auto& k : m.marks) {
        if (k.y < epsilon) continue;
        if (k.branch == kOriginBranch) {
            out.marks.push_back(k);
            continue;
        }
        long nb = remap.at(static_cast<std::size_t>(k.branch));
        if (nb < 0) continue;
        Mark c2 = k;
        c2.branch = static_cast<int>(nb);
        out.marks.push_back(c2);
    }
    return {std::move(c), std::move(out)};
}

inline void check_provenance(const CombTree& tree, const MutationSet& m) {
    for (const auto& k : m.marks) {
        if (k.branch < kOriginBranch || k.branch >= static_cast<long>(tree.atoms.size()))
            throw std::invalid_argument("mutation provenance mismatch: branch index out of range");
        if (k.t != tree.branch_time(k.branch) || !(k.y > 0.0) || !(k.y < tree.branch_height(k.branch)))
            throw std::invalid_argument("mutation provenance mismatch: mark does not sit on its branch");
    }
}

enum class Finiteness { finite, infinite };

struct InconclusiveError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// int_a^b mu dnu by parts: mu(a)nu(a) - mu(b)nu(b) + int_{mu(a)}^{mu(b)} nu(mu^{-1}(u)) du
inline double mu_dnu_shell(const MeasurePair& p, double a, double b, const QuadratureConfig& q) {
    double ma = p.mu.cum(a), mb = p.mu.cum(b);
    if (mb == 0.0) return 0.0;
    double inner = integrate([&](double u) { return p.nu.tail(std::max(p.mu.inverse_cum(u), a)); }, ma, mb, q);
    return ma * p.nu.tail(a) - mb * p.nu.tail(b) + inner;
}

inline constexpr int kFinitenessShells = 40;

// Dyadic shell comparison of int_0 mu dnu over [2^-40, 1]: the first and last
// ten shells are compared, and a persistent log-linear trend is required
// before declaring divergence.
inline Finiteness mutation_finiteness(const MeasurePair& p, const QuadratureConfig& q = {}) {
    if (p.mu.is_zero()) return Finiteness::finite;
    std::vector<double> s(kFinitenessShells);
    for (int k = 0; k < kFinitenessShells; ++k)
        s[static_cast<std::size_t>(k)] = mu_dnu_shell(p, std::ldexp(1.0, -k - 1), std::ldexp(1.0, -k), q);
    double head = 0.0, tail = 0.0;
    for (int k = 0; k < 10; ++k) {
        head += s[static_cast<std::size_t>(k)];
        tail += s[static_cast<std::size_t>(kFinitenessShells - 10 + k)];
    }
    if (tail == 0.0) return Finiteness::finite;
    if (head == 0.0) return Finiteness::infinite;
    double ratio = tail / head;
    if (ratio <= 0.1) return Finiteness::finite;
    double sk = 0, sy = 0, skk = 0, sky = 0, n = 0;
    for (int k = 0; k < kFinitenessShells; ++k) {
        double v = s[static_cast<std::size_t>(k)];
        if (!(v > 0.0)) continue;
        double y = std::log(v);
        sk += k, sy += y, skk += double(k) * k, sky += k * y, n += 1;
    }
    double slope = (n * sky - sk * sy) / (n * skk - sk * sk);
    if (ratio >= 0.5 && slope >= -0.01) return Finiteness::infinite;
    throw InconclusiveError("mutation_finiteness: shell sums neither decay nor persist clearly (ratio " +
                            std::to_string(ratio) + ", log-slope " + std::to_string(slope) + ")");
}

// E[total marks] = mu(z) + W(z) int_[0,z] mu dnu = W(z) int_0^{mu(z)} nu(mu^{-1}(u)) du
inline double expected_total_mutations(const MeasurePair& p, double z, const QuadratureConfig& q = {}) {
    if (p.mu.is_zero()) return 0.0;
    if (mutation_finiteness(p, q) == Finiteness::infinite)
        throw std::domain_error("expected_total_mutations: total number of mutations is infinite");
    double mz = p.mu.cum(z);
    return W(p.nu, z) * integrate([&](double u) { return p.nu.tail(p.mu.inverse_cum(u)); }, 0.0, mz, q);
}

// Expected marks the epsilon floor does not materialize:
// mu(eps) + W(z) [mu(eps)(nu(eps) - nu(z)) + int_0^eps mu dnu]
inline double missing_mutation_mass(const MeasurePair& p, double z, double epsilon, const QuadratureConfig& q = {}) {
    if (p.mu.is_zero()) return 0.0;
    double me = p.mu.cum(epsilon);
    double below = integrate([&](double u) { return p.nu.tail(p.mu.inverse_cum(u)); }, 0.0, me, q) -
                   me * p.nu.tail(epsilon);
    return me + W(p.nu, z) * (me * (p.nu.tail(epsilon) - p.nu.tail(z)) + below);
}

}  // namespace cpplab
