#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "measures.hpp"
#include "quadrature.hpp"
#include "rate_measure.hpp"

namespace cpplab {

// Every integral against mu(dx) is taken in the variable u = mu[0,x].
namespace detail {

inline double height_at(const MeasurePair& p, double u) { return u <= 0.0 ? 0.0 : p.mu.inverse_cum(u); }

inline double tail_at(const IntensityMeasure& nu, double x) {
    if (x <= 0.0) return nu.infinite_mass() ? kInf : nu.total_mass();
    return nu.tail(x);
}

inline double wmu_at(const MeasurePair& p, double x, const QuadratureConfig& q) {
    return x <= 0.0 ? W0(p.nu) : W_mu(p, x, q);
}

// e^{-q/w}/w^k with the w -> 0 limit
inline double family_kernel(double q, double w, int k) {
    if (!(w > 0.0)) return 0.0;
    return std::exp(-q / w) / std::pow(w, k);
}

}  // namespace detail

// Exponential integral E1 by power series below 1 and a continued fraction above.
inline double expint_e1(double x) {
    if (!(x > 0.0)) throw std::domain_error("expint_e1 needs x > 0");
    constexpr double gamma = 0.57721566490153286061;
    if (x <= 1.0) {
        double sum = 0.0, term = 1.0;
        for (int k = 1; k < 200; ++k) {
            term *= -x / k;
            double add = -term / k;
            sum += add;
            if (std::abs(add) < 1e-17 * std::abs(sum)) break;
        }
        return -gamma - std::log(x) + sum;
    }
    // modified Lentz on e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
    constexpr double tiny = 1e-300;
    double b = x + 1.0, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 1000; ++i) {
        double an = -static_cast<double>(i) * i;
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        double del = c * d;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x);
}

// phi(lambda) from 1/phi = int e^{-mu(x)} / (lambda + nu(x)) mu(dx)
inline double laplace_exponent(const MeasurePair& p, double lambda, const QuadratureConfig& q = {}) {
    if (!(lambda >= 0.0)) throw std::domain_error("laplace_exponent needs lambda >= 0");
    if (p.mu.is_zero()) return kInf;
    const double top = p.mu.cum(kInf);
    double inv = integrate(
        [&](double u) {
            double t = detail::tail_at(p.nu, detail::height_at(p, u));
            return std::isinf(t) ? 0.0 : std::exp(-u) / (lambda + t);
        },
        0.0, top, q);
    return 1.0 / inv;
}

// P(t in the clonal regenerative set) = int e^{-t nu(x) - mu(x)} mu(dx)
inline double renewal_density(const MeasurePair& p, double t, const QuadratureConfig& q = {}) {
    if (!(t >= 0.0)) throw std::domain_error("renewal_density needs t >= 0");
    if (p.mu.is_zero()) return 0.0;
    return integrate(
        [&](double u) {
            double v = detail::tail_at(p.nu, detail::height_at(p, u));
            if (t == 0.0) return std::exp(-u);
            return std::isinf(v) ? 0.0 : std::exp(-u - t * v);
        },
        0.0, p.mu.cum(kInf), q);
}

// int_0^inf e^{-lambda t} renewal_density(t) dt by nested quadrature
inline double renewal_laplace_transform(const MeasurePair& p, double lambda, const QuadratureConfig& q = {}) {
    if (!(lambda > 0.0)) throw std::domain_error("renewal_laplace_transform needs lambda > 0");
    return integrate([&](double t) { return std::exp(-lambda * t) * renewal_density(p, t, q); }, 0.0, kInf, q);
}

inline double expected_clonal_mass(const MeasurePair& p, double z) { return W(p.nu, z) * std::exp(-p.mu.cum(z)); }

inline double clonal_probability(const MeasurePair& p, double z, const QuadratureConfig& q = {}) {
    if (!(p.nu.tail(z) > 0.0)) throw std::domain_error("clonal_probability needs a positive tail at z");
    return expected_clonal_mass(p, z) / W_mu(p, z, q);
}

inline double tau_z_cdf(const IntensityMeasure& nu, double z, double eta, const QuadratureConfig& q = {}) {
    const double theta = std::exp(-eta);
    if (theta == 0.0) return 1.0;
    return clonal_probability({nu, MutationMeasure::uniform(theta)}, z, q);
}

// Density of the spectrum intensity at q: the clonal-leaf term at z plus the
// integral over mutation heights.
inline double spectrum_density(const MeasurePair& p, double z, double qv, const QuadratureConfig& q = {}) {
    if (!(qv > 0.0)) throw std::domain_error("spectrum_density needs q > 0");
    if (p.mu.is_zero()) return 0.0;
    const double mz = p.mu.cum(z);
    double inner = integrate(
        [&](double u) { return std::exp(-u) * detail::family_kernel(qv, detail::wmu_at(p, detail::height_at(p, u), q), 2); },
        0.0, mz, q);
    return W(p.nu, z) * (std::exp(-mz) * detail::family_kernel(qv, W_mu(p, z, q), 2) + inner);
}

// Expected number of clusters above q among leaves whose last mutation is a
// real mutation (the root clone is excluded).
inline double spectrum_tail_mutations(const MeasurePair& p, double z, double qv, const QuadratureConfig& q = {}) {
    if (!(qv > 0.0)) throw std::domain_error("spectrum tail needs q > 0");
    if (p.mu.is_zero()) return 0.0;
    double inner = integrate(
        [&](double u) { return std::exp(-u) * detail::family_kernel(qv, detail::wmu_at(p, detail::height_at(p, u), q), 1); },
        0.0, p.mu.cum(z), q);
    return W(p.nu, z) * inner;
}

// P(clonal mass > q): the root-clone contribution to the full tail intensity
inline double root_clone_tail(const MeasurePair& p, double z, double qv, const QuadratureConfig& q = {}) {
    return W(p.nu, z) * std::exp(-p.mu.cum(z)) * detail::family_kernel(qv, W_mu(p, z, q), 1);
}

// Lambda_z((q, inf)) as displayed in the spectrum formula, root-clone term included
inline double spectrum_tail_intensity(const MeasurePair& p, double z, double qv, const QuadratureConfig& q = {}) {
    return root_clone_tail(p, z, qv, q) + spectrum_tail_mutations(p, z, qv, q);
}

inline double limit_spectrum_density(const MeasurePair& p, double qv, const QuadratureConfig& q = {}) {
    if (!(qv > 0.0)) throw std::domain_error("limit spectrum needs q > 0");
    if (p.mu.is_zero()) return 0.0;
    return integrate(
        [&](double u) { return std::exp(-u) * detail::family_kernel(qv, detail::wmu_at(p, detail::height_at(p, u), q), 2); },
        0.0, p.mu.cum(kInf), q);
}

inline double limit_spectrum_tail(const MeasurePair& p, double qv, const QuadratureConfig& q = {}) {
    if (!(qv > 0.0)) throw std::domain_error("limit spectrum needs q > 0");
    if (p.mu.is_zero()) return 0.0;
    return integrate(
        [&](double u) { return std::exp(-u) * detail::family_kernel(qv, detail::wmu_at(p, detail::height_at(p, u), q), 1); },
        0.0, p.mu.cum(kInf), q);
}

// Law of the population size N_T of a birth-death process started from one
// individual: E[s^N] = 1 - (1 - s) / (A + (1 - s) B).
struct BirthDeathLaw {
    double A = 1.0;  // e^{kappa - beta} over [t, T]
    double B = 0.0;  // int e^{kappa([t,s]) - beta([t,s])} beta(ds)

    double survival() const { return 1.0 / (A + B); }
    double laplace(double alpha) const {
        if (!(alpha >= 0.0)) throw std::domain_error("bd laplace needs alpha >= 0");
        if (std::isinf(alpha)) return 1.0 - survival();
        double a = -std::expm1(-alpha);
        return 1.0 - a / (A + a * B);
    }
    double pmf(std::uint64_t n) const {
        const double d = A + B;
        if (n == 0) return 1.0 - 1.0 / d;
        return A / (d * d) * std::pow(B / d, static_cast<double>(n - 1));
    }
    double mean() const { return 1.0 / A; }
};

inline BirthDeathLaw bd_law(double b, double k, double t, double T) {
    if (!(b >= 0.0) || !(k >= 0.0)) throw std::invalid_argument("bd rates must be >= 0");
    if (!(t <= T)) throw std::invalid_argument("bd law needs t <= T");
    const double tau = T - t, r = k - b;
    BirthDeathLaw L;
    L.A = std::exp(r * tau);
    L.B = r == 0.0 ? b * tau : b * std::expm1(r * tau) / r;
    return L;
}

inline BirthDeathLaw bd_law(const RateMeasure& beta, const RateMeasure& kappa, double t, double T,
                            const QuadratureConfig& q = {}) {
    if (!(t <= T)) throw std::invalid_argument("bd law needs t <= T");
    if (beta.constant_rate() && kappa.constant_rate()) return bd_law(*beta.constant_rate(), *kappa.constant_rate(), t, T);
    const double b0 = beta.cum(t), k0 = kappa.cum(t), bt = beta.cum(T) - b0;
    BirthDeathLaw L;
    L.A = std::exp(kappa.cum(T) - k0 - bt);
    L.B = integrate([&](double u) { return std::exp(kappa.cum(beta.inverse_cum(b0 + u)) - k0 - u); }, 0.0, bt, q);
    return L;
}

inline double bd_survival(double b, double k, double t, double T) { return bd_law(b, k, t, T).survival(); }

inline double bd_laplace(double b, double k, double t, double T, double alpha) {
    return bd_law(b, k, t, T).laplace(alpha);
}

inline double bd_laplace(const RateMeasure& beta, const RateMeasure& kappa, double t, double T, double alpha,
                         const QuadratureConfig& q = {}) {
    return bd_law(beta, kappa, t, T, q).laplace(alpha);
}

}  // namespace cpplab
