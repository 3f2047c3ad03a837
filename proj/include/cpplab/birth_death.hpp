#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "analytics.hpp"
#include "cpp_sim.hpp"
#include "measures.hpp"
#include "quadrature.hpp"
#include "random.hpp"
#include "rate_measure.hpp"
#include "simple_tree.hpp"

namespace cpplab {

struct PopulationCapError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultPopulationCap = 1'000'000;

// Genealogy of a birth-death process. Each node's alive interval is
// [alpha, omega); leaves alive at the horizon carry the censored flag, other
// leaves were killed. Times stay in the simulation axis; reversed marks trees
// whose axis was flipped by a decreasing time change.
struct BDTree {
    SimpleTree tree;
    double start = 0.0;
    double horizon = 0.0;
    double beta_mass = 0.0;  // beta([start, horizon]), invariant under time changes
    bool deaths = false;

    bool reversed() const { return tree.reversed; }

    std::size_t alive_at_horizon(const Label& u = "") const {
        std::size_t n = 0;
        for (auto it = tree.nodes.lower_bound(u); it != tree.nodes.end() && it->first.compare(0, u.size(), u) == 0; ++it)
            if (it->second.censored && tree.is_leaf(it->first)) ++n;
        return n;
    }

    void validate() const {
        if (!tree.contains("")) throw std::logic_error("bd tree: root missing");
        for (const auto& [u, n] : tree.nodes) {
            double life = tree.lifetime(u);
            if (!(life >= 0.0)) throw std::logic_error("bd tree: negative lifetime at '" + u + "'");
            if (!u.empty() && n.alpha != tree.at(parent_of(u)).omega)
                throw std::logic_error("bd tree: alpha('" + u + "') != omega(parent)");
            if (tree.contains(u + "0") != tree.contains(u + "1"))
                throw std::logic_error("bd tree: node '" + u + "' is not binary");
            if (tree.is_leaf(u) && n.censored != (n.omega == horizon))
                throw std::logic_error("bd tree: leaf '" + u + "' censor flag disagrees with the horizon");
            if (!tree.is_leaf(u) && !(life > 0.0)) throw std::logic_error("bd tree: internal node with zero lifetime");
        }
    }
};

// Each individual born at a dies at the first atom of a kappa-Poisson process
// and gives birth (splitting into u0, u1) at the first atom of a beta-Poisson
// process, whichever comes first; individuals reaching the horizon are censored.
inline BDTree simulate_bd(const RateMeasure& beta, const RateMeasure& kappa, double start, double horizon,
                          RandomStream& rng, std::size_t cap = kDefaultPopulationCap) {
    if (!(start <= horizon)) throw std::invalid_argument("simulate_bd: need start <= horizon");
    if (start < beta.t0() || start < kappa.t0() || !(horizon < beta.t_inf()) || !(horizon < kappa.t_inf()))
        throw std::invalid_argument("simulate_bd: [start, horizon] must lie inside the rate interval");
    BDTree out;
    out.start = start;
    out.horizon = horizon;
    out.beta_mass = beta.measure(start, horizon);
    out.deaths = !kappa.is_zero();
    out.tree.reversed = false;
    struct Pending {
        Label u;
        double alpha;
    };
    std::vector<Pending> st{{"", start}};
    std::size_t created = 1;
    while (!st.empty()) {
        Pending p = std::move(st.back());
        st.pop_back();
        TreeNode n;
        n.alpha = p.alpha;
        const double death = kappa.is_zero() ? kInf : kappa.next_event(p.alpha, rng);
        const double birth = beta.next_event(p.alpha, rng);
        if (birth < death && birth < horizon) {
            n.omega = birth;
            created += 2;
            if (created > cap)
                throw PopulationCapError("simulate_bd: more than " + std::to_string(cap) + " individuals");
            st.push_back({p.u + "1", birth});
            st.push_back({p.u + "0", birth});
        } else if (death < horizon) {
            n.omega = death;
        } else {
            n.omega = horizon;
            n.censored = true;
        }
        out.tree.nodes.emplace(std::move(p.u), n);
    }
    return out;
}

// Finite-horizon estimator N_u(horizon) e^{-beta([start, horizon])} of the
// boundary measure of the descendants of u; pure-birth trees only.
inline double boundary_measure(const BDTree& t, const Label& u = "") {
    if (t.deaths) throw std::invalid_argument("boundary_measure: defined for pure-birth trees only");
    if (!t.tree.contains(u)) throw std::out_of_range("boundary_measure: no node '" + u + "'");
    return static_cast<double>(t.alive_at_horizon(u)) * std::exp(-t.beta_mass);
}

// Exact-in-law completion: each individual alive at the horizon founds an
// independent pure-birth process whose boundary measure is Exp(1) e^{-beta mass}.
inline double completed_boundary_measure(const BDTree& t, RandomStream& rng, const Label& u = "") {
    if (t.deaths) throw std::invalid_argument("completed_boundary_measure: defined for pure-birth trees only");
    double s = 0.0;
    for (std::size_t i = t.alive_at_horizon(u); i > 0; --i) s += rng.exponential(1.0);
    return s * std::exp(-t.beta_mass);
}

struct TimeChange {
    std::function<double(double)> phi;
    bool increasing = true;
};

inline TimeChange compose(const TimeChange& outer, const TimeChange& inner) {
    auto f = outer.phi, g = inner.phi;
    return {[f, g](double t) { return f(g(t)); }, outer.increasing == inner.increasing};
}

// Relabels every time through phi; a decreasing phi flips the orientation.
inline BDTree time_change(const BDTree& t, const TimeChange& tc) {
    BDTree out = t;
    out.start = tc.phi(t.start);
    out.horizon = tc.phi(t.horizon);
    if ((tc.increasing && !(out.horizon >= out.start)) || (!tc.increasing && !(out.horizon <= out.start)))
        throw std::invalid_argument("time_change: phi is not monotone in the declared direction");
    out.tree.reversed = tc.increasing ? t.tree.reversed : !t.tree.reversed;
    for (auto& [u, n] : out.tree.nodes) {
        double a = tc.phi(n.alpha), w = tc.phi(n.omega);
        const bool up = out.tree.reversed ? a >= w : w >= a;
        if (!up) throw std::invalid_argument("time_change: phi is not monotone on node '" + u + "'");
        n.alpha = a;
        n.omega = w;
    }
    return out;
}

// Push-forward of a rate measure by an increasing map with known inverse.
inline RateMeasure push_forward(const RateMeasure& r, std::function<double(double)> phi,
                                std::function<double(double)> phi_inv) {
    nlohmann::json d = {{"family", "push_forward"}, {"base", r.description()}};
    return RateMeasure::from_functions([r, phi_inv](double s) { return r.cum(phi_inv(s)); },
                                       [r, phi](double m) {
                                           double t = r.inverse_cum(m);
                                           return std::isinf(t) ? t : phi(t);
                                       },
                                       phi(r.t0()), phi(r.t_inf()), std::move(d));
}

// Birth intensity on the reversed axis s = -height, s in [-z, 0):
// beta([-z, s]) = log(nu(-s) / nu(z)).
inline RateMeasure cpp_as_pure_birth(const IntensityMeasure& nu, double z) {
    const double top = nu.tail(z);
    if (!(top > 0.0)) throw std::domain_error("cpp_as_pure_birth: tail at z must be positive");
    nlohmann::json d = {{"family", "cpp_pure_birth"}, {"nu", nu.description()}, {"z", z}};
    return RateMeasure::from_functions(
        [nu, z, top](double s) {
            if (s <= -z) return 0.0;
            if (s >= 0.0) return nu.infinite_mass() ? kInf : std::log(nu.total_mass() / top);
            return std::log(nu.tail(-s) / top);
        },
        [nu, top](double m) {
            double v = top * std::exp(m);
            if (!nu.infinite_mass() && v >= nu.total_mass()) return kInf;
            return -nu.inverse_tail(v);
        },
        -z, 0.0, std::move(d));
}

inline RateMeasure cpp_as_pure_birth(const MeasurePair& p, double z) { return cpp_as_pure_birth(p.nu, z); }

// CPP(nu, z) at floor eps through the reversed pure-birth process: internal
// nodes in order give the atoms, and each individual alive at height eps gets
// an Exp(nu(eps)) boundary mass, the exact law of the gaps between atoms.
inline CombTree sample_cpp_via_pure_birth(const IntensityMeasure& nu, double z, double eps, RandomStream& rng) {
    if (!(eps > 0.0 && eps < z)) throw std::invalid_argument("sample_cpp_via_pure_birth: need 0 < eps < z");
    BDTree bd = simulate_bd(cpp_as_pure_birth(nu, z), RateMeasure::zero(-z, 0.0), -z, -eps, rng);
    SimpleTree h = bd.tree;
    h.reversed = true;
    const double gap = nu.tail(eps);
    for (auto& [u, n] : h.nodes) {
        n.alpha = -n.alpha;
        n.omega = -n.omega;
        if (n.censored) {
            n.omega = 0.0;
            n.censored = false;
            n.leaf_mass = rng.exponential(gap);
        }
    }
    CombTree c = comb_from_simple_tree(h, eps);
    c.z = z;
    return c;
}

struct Backbone {
    std::function<double(double)> survival;  // 1 / I_t
    RateMeasure beta_star;
};

// I_t = int_[t, t_inf) e^{-beta([t,s]) + kappa([t,s])} beta(ds), taken in u = beta([t,s]).
inline double backbone_integral(const RateMeasure& beta, const RateMeasure& kappa, double t,
                                const QuadratureConfig& q = {}) {
    const double b0 = beta.cum(t), k0 = kappa.cum(t);
    double top = beta.total() - b0;
    if (top > 700.0) top = kInf;
    if (kappa.is_zero()) return -std::expm1(-top);
    double v;
    try {
        v = integrate(
            [&](double u) {
                double s = beta.inverse_cum(b0 + u);
                double kk = std::isinf(s) ? kappa.total() : kappa.cum(s);
                return std::exp(kk - k0 - u);
            },
            0.0, top, q);
    } catch (const QuadratureError&) {
        throw std::domain_error("backbone: the survival integral diverges (subcritical rates)");
    }
    if (!std::isfinite(v) || v > 1e12) throw std::domain_error("backbone: the survival integral diverges (subcritical rates)");
    return v;
}

inline Backbone backbone_rate(const RateMeasure& beta, const RateMeasure& kappa, const QuadratureConfig& q = {}) {
    if (beta.constant_rate() && kappa.constant_rate() && std::isinf(beta.t_inf())) {
        const double b = *beta.constant_rate(), k = *kappa.constant_rate();
        if (!(b > k)) throw std::domain_error("backbone: subcritical constant rates");
        return {[b, k](double) { return 1.0 - k / b; }, RateMeasure::constant(b - k, beta.t0(), beta.t_inf())};
    }
    if (kappa.is_zero() && std::isinf(beta.total())) return {[](double) { return 1.0; }, beta};
    backbone_integral(beta, kappa, beta.t0(), q);
    auto surv = [beta, kappa, q](double t) { return 1.0 / backbone_integral(beta, kappa, t, q); };
    nlohmann::json d = {{"family", "backbone"}, {"beta", beta.description()}, {"kappa", kappa.description()}};
    auto cum = [beta, surv, q](double t) {
        double m = beta.cum(t);
        return integrate([&](double u) { return surv(beta.inverse_cum(u)); }, 0.0, m, q);
    };
    return {surv, RateMeasure::from_functions(cum, nullptr, beta.t0(), beta.t_inf(), std::move(d))};
}

}  // namespace cpplab
