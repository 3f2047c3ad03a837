#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace cpplab {

struct QuadratureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct QuadratureConfig {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    int max_depth = 60;

    void validate() const {
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || max_depth < 1)
            throw std::invalid_argument("QuadratureConfig: tolerances must be positive and max_depth >= 1");
    }
};

namespace detail {

struct QuadPiece {
    double a, b, value, error;
    int depth;
};

// Single 15-point Kronrod rule with the embedded 7-point Gauss rule; the
// error estimate is |K - G| scaled to the interval.
template <class F>
QuadPiece gk15(F& f, double a, double b, int depth) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    using G = boost::math::quadrature::gauss<double, 7>;
    static const auto& xk = GK::abscissa();
    static const auto& wk = GK::weights();
    static const auto& wg = G::weights();
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double fc = f(c);
    double k = fc * wk[0], g = fc * wg[0];
    for (std::size_t i = 1; i < xk.size(); ++i) {
        double s = f(c - h * xk[i]) + f(c + h * xk[i]);
        k += wk[i] * s;
        if (i % 2 == 0) g += wg[i / 2] * s;
    }
    return {a, b, h * k, std::abs(h * (k - g)), depth};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod (15-point) on [a,b]; b may be +infinity.
// The piece with the largest error estimate is bisected until the summed
// estimate meets max(abs_tol, rel_tol*|I|); max_depth bounds bisection levels.
template <class F>
double integrate_finite(F& f, double a, double b, const QuadratureConfig& q) {
    constexpr std::size_t kMaxPieces = 20000;
    auto cmp = [](const detail::QuadPiece& x, const detail::QuadPiece& y) { return x.error < y.error; };
    std::vector<detail::QuadPiece> heap{detail::gk15(f, a, b, 0)}, done;
    double total = heap.front().value, err = heap.front().error;
    for (;;) {
        if (!std::isfinite(total))
            throw QuadratureError("quadrature produced a non-finite value on [" + std::to_string(a) + ", " +
                                  std::to_string(b) + "]");
        double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(total);
        double target = std::max({q.abs_tol, q.rel_tol * std::abs(total), floor});
        if (err <= target) break;
        if (heap.empty() || heap.size() + done.size() > kMaxPieces)
            throw QuadratureError("quadrature did not converge: error estimate " + std::to_string(err) +
                                  " exceeds tolerance " + std::to_string(target));
        std::pop_heap(heap.begin(), heap.end(), cmp);
        detail::QuadPiece p = heap.back();
        heap.pop_back();
        if (p.depth >= q.max_depth || p.b - p.a <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(p.a)) {
            done.push_back(p);
            if (heap.empty())
                throw QuadratureError("quadrature did not converge within max_depth; error estimate " +
                                      std::to_string(err));
            continue;
        }
        double m = 0.5 * (p.a + p.b);
        detail::QuadPiece l = detail::gk15(f, p.a, m, p.depth + 1), r = detail::gk15(f, m, p.b, p.depth + 1);
        total += l.value + r.value - p.value;
        err += l.error + r.error - p.error;
        heap.push_back(l);
        std::push_heap(heap.begin(), heap.end(), cmp);
        heap.push_back(r);
        std::push_heap(heap.begin(), heap.end(), cmp);
    }
    // re-sum to shed drift from incremental updates
    double s = 0.0;
    for (const auto& p : heap) s += p.value;
    for (const auto& p : done) s += p.value;
    return s;
}

template <class F>
double integrate(F&& f, double a, double b, const QuadratureConfig& q = {}) {
    q.validate();
    if (a == b) return 0.0;
    if (a > b) return -integrate(f, b, a, q);
    if (std::isinf(b)) {
        auto g = [&](double t) {
            double s = 1.0 - t;
            return f(a + t / s) / (s * s);
        };
        return integrate_finite(g, 0.0, 1.0, q);
    }
    return integrate_finite(f, a, b, q);
}

}  // namespace cpplab
