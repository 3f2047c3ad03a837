#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>

#include <json.hpp>

#include "random.hpp"

namespace cpplab {

// Diffuse Radon measure on [t0, t_inf), described by t -> measure of [t0, t]
// and its generalized inverse.
class RateMeasure {
public:
    using Fn = std::function<double(double)>;

    static RateMeasure constant(double rate, double t0 = 0.0, double t_inf = kInf) {
        if (!(rate >= 0.0) || !std::isfinite(rate)) throw std::invalid_argument("rate measure: rate must be finite and >= 0");
        if (!(t0 < t_inf)) throw std::invalid_argument("rate measure: need t0 < t_inf");
        RateMeasure r(
            [=](double t) { return rate * (std::min(t, t_inf) - t0); },
            [=](double m) { return rate > 0.0 ? t0 + m / rate : kInf; }, t0, t_inf,
            {{"family", "constant"}, {"rate", rate}, {"t0", t0}, {"t_inf", t_inf}});
        r.rate_ = rate;
        return r;
    }
    static RateMeasure zero(double t0 = 0.0, double t_inf = kInf) { return constant(0.0, t0, t_inf); }

    // cum must be continuous and nondecreasing with cum(t0) = 0; inverse may be
    // omitted and is then found by bisection.
    static RateMeasure from_functions(Fn cum, Fn inverse, double t0, double t_inf, nlohmann::json desc) {
        if (!(t0 < t_inf)) throw std::invalid_argument("rate measure: need t0 < t_inf");
        return RateMeasure(std::move(cum), std::move(inverse), t0, t_inf, std::move(desc));
    }

    double t0() const { return t0_; }
    double t_inf() const { return t_inf_; }
    const nlohmann::json& description() const { return desc_; }
    std::optional<double> constant_rate() const { return rate_; }
    bool is_zero() const { return rate_ && *rate_ == 0.0; }

    double cum(double t) const {
        if (t <= t0_) return 0.0;
        return cum_(t);
    }
    double measure(double a, double b) const { return cum(b) - cum(a); }
    double total() const { return std::isinf(t_inf_) ? cum_(kLarge) : cum_(t_inf_); }

    // inf{t : cum(t) >= m}, or +inf when the total mass is not reached
    double inverse_cum(double m) const {
        if (m <= 0.0) return t0_;
        if (inverse_) return inverse_(m);
        double lo = t0_, hi = std::isinf(t_inf_) ? t0_ + 1.0 : t_inf_;
        if (std::isinf(t_inf_)) {
            while (cum_(hi) < m) {
                if (hi - t0_ > kLarge) return kInf;
                hi = t0_ + 2.0 * (hi - t0_);
            }
        } else if (cum_(hi) < m) {
            return kInf;
        }
        for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++i) {
            double mid = 0.5 * (lo + hi);
            (cum_(mid) < m ? lo : hi) = mid;
        }
        return hi;
    }

    // next atom time of a Poisson process with this intensity after s
    double next_event(double s, RandomStream& rng) const { return inverse_cum(cum(s) + rng.exponential(1.0)); }

private:
    static constexpr double kLarge = 1e12;

    RateMeasure(Fn cum, Fn inverse, double t0, double t_inf, nlohmann::json desc)
        : cum_(std::move(cum)), inverse_(std::move(inverse)), t0_(t0), t_inf_(t_inf), desc_(std::move(desc)) {}

    Fn cum_, inverse_;
    double t0_, t_inf_;
    nlohmann::json desc_;
    std::optional<double> rate_;
};

}  // namespace cpplab
