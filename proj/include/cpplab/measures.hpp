#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "quadrature.hpp"
#include "random.hpp"

namespace cpplab {

namespace detail {

// Fritsch-Carlson monotone cubic Hermite interpolant.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n) throw std::invalid_argument("MonotoneCubic: need >= 2 matching knots");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("MonotoneCubic: knots must increase");
        std::vector<double> d(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
        m_.assign(n, 0.0);
        m_[0] = d[0];
        m_[n - 1] = d[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i) m_[i] = (d[i - 1] * d[i] <= 0.0) ? 0.0 : 0.5 * (d[i - 1] + d[i]);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (d[i] == 0.0) {
                m_[i] = m_[i + 1] = 0.0;
                continue;
            }
            double a = m_[i] / d[i], b = m_[i + 1] / d[i];
            double s = a * a + b * b;
            if (s > 9.0) {
                double t = 3.0 / std::sqrt(s);
                m_[i] = t * a * d[i];
                m_[i + 1] = t * b * d[i];
            }
        }
    }

    double operator()(double x) const {
        if (x <= x_.front()) return y_.front() + m_.front() * (x - x_.front());
        if (x >= x_.back()) return y_.back() + m_.back() * (x - x_.back());
        std::size_t i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
        double h = x_[i + 1] - x_[i], s = (x - x_[i]) / h;
        double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
        double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
        return h00 * y_[i] + h10 * h * m_[i] + h01 * y_[i + 1] + h11 * h * m_[i + 1];
    }

    double front_x() const { return x_.front(); }
    double back_x() const { return x_.back(); }
    double front_slope() const { return m_.front(); }
    double back_slope() const { return m_.back(); }

private:
    std::vector<double> x_, y_, m_;
};

struct TailModel {
    virtual ~TailModel() = default;
    virtual double tail(double x) const = 0;
    virtual double inverse_tail(double u) const = 0;
    virtual double atom_at_infinity() const { return 0.0; }
    virtual double mass() const = 0;  // lim_{x->0} tail(x)
};

struct BrownianTail final : TailModel {
    double c;
    explicit BrownianTail(double c_) : c(c_) {}
    double tail(double x) const override { return c / x; }
    double inverse_tail(double u) const override { return c / u; }
    double mass() const override { return kInf; }
};

struct PowerTail final : TailModel {
    double a, c;
    PowerTail(double a_, double c_) : a(a_), c(c_) {}
    double tail(double x) const override { return c * std::pow(x, -a); }
    double inverse_tail(double u) const override { return std::pow(c / u, 1.0 / a); }
    double mass() const override { return kInf; }
};

struct ExponentialTail final : TailModel {
    double c, r;
    ExponentialTail(double c_, double r_) : c(c_), r(r_) {}
    double tail(double x) const override { return x <= 0.0 ? c : c * std::exp(-r * x); }
    double inverse_tail(double u) const override { return u >= c ? 0.0 : std::log(c / u) / r; }
    double mass() const override { return c; }
};

// log-log monotone cubic through (x_i, tail_i) with power-law continuation at both ends
struct TabulatedTail final : TailModel {
    MonotoneCubic spline;
    double lo_x, hi_x;
    explicit TabulatedTail(const std::vector<double>& xs, const std::vector<double>& tails) {
        if (xs.size() < 2 || xs.size() != tails.size())
            throw std::invalid_argument("tabulated tail: need >= 2 matching points");
        std::vector<double> lx, ly;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!(xs[i] > 0.0) || !(tails[i] > 0.0) || !std::isfinite(tails[i]))
                throw std::invalid_argument("tabulated tail: points and values must be positive and finite");
            if (i > 0 && tails[i] > tails[i - 1])
                throw std::invalid_argument("tabulated tail: values must be nonincreasing");
            lx.push_back(std::log(xs[i]));
            ly.push_back(std::log(tails[i]));
        }
        spline = MonotoneCubic(lx, ly);
        lo_x = xs.front();
        hi_x = xs.back();
        if (spline.back_slope() > 0.0 || spline.front_slope() > 0.0)
            throw std::invalid_argument("tabulated tail: end slopes must be nonpositive");
    }
    double tail(double x) const override { return std::exp(spline(std::log(x))); }
    double inverse_tail(double u) const override {
        double lu = std::log(u);
        double a = std::log(lo_x), b = std::log(hi_x);
        if (lu >= spline(a)) {
            double s = spline.front_slope();
            if (s == 0.0) return 0.0;
            return std::exp(a + (lu - spline(a)) / s);
        }
        if (lu <= spline(b)) {
            double s = spline.back_slope();
            if (s == 0.0) return kInf;
            return std::exp(b + (lu - spline(b)) / s);
        }
        for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
            double m = 0.5 * (a + b);
            if (spline(m) > lu) a = m; else b = m;
        }
        return std::exp(b);
    }
    double mass() const override { return spline.front_slope() < 0.0 ? kInf : tail(lo_x); }
};

struct TruncatedTail final : TailModel {
    std::shared_ptr<const TailModel> base;
    double z;
    TruncatedTail(std::shared_ptr<const TailModel> b, double z_) : base(std::move(b)), z(z_) {}
    double tail(double x) const override { return base->tail(std::min(x, z)); }
    double inverse_tail(double u) const override {
        if (u < base->tail(z)) return kInf;
        return std::min(base->inverse_tail(u), z);
    }
    double atom_at_infinity() const override { return base->tail(z); }
    double mass() const override { return base->mass(); }
};

struct CumModel {
    virtual ~CumModel() = default;
    virtual double cum(double x) const = 0;
    virtual double inverse_cum(double u) const = 0;
};

struct UniformCum final : CumModel {
    double theta;
    explicit UniformCum(double t) : theta(t) {}
    double cum(double x) const override { return theta * x; }
    double inverse_cum(double u) const override { return theta > 0.0 ? u / theta : kInf; }
};

struct PowerCum final : CumModel {
    double b, c;
    PowerCum(double b_, double c_) : b(b_), c(c_) {}
    double cum(double x) const override { return c * std::pow(x, b); }
    double inverse_cum(double u) const override { return std::pow(u / c, 1.0 / b); }
};

// piecewise linear through (0,0),(x_i, m_i), extended with the last slope
struct TabulatedCum final : CumModel {
    std::vector<double> xs, ms;
    TabulatedCum(std::vector<double> x, std::vector<double> m) : xs(std::move(x)), ms(std::move(m)) {
        if (xs.empty() || xs.size() != ms.size()) throw std::invalid_argument("tabulated mu: need matching points");
        if (xs.front() != 0.0) {
            xs.insert(xs.begin(), 0.0);
            ms.insert(ms.begin(), 0.0);
        }
        if (ms.front() != 0.0) throw std::invalid_argument("tabulated mu: cum(0) must be 0");
        for (std::size_t i = 1; i < xs.size(); ++i)
            if (!(xs[i] > xs[i - 1]) || ms[i] < ms[i - 1])
                throw std::invalid_argument("tabulated mu: points must increase and values be nondecreasing");
        if (xs.size() < 2 || !(ms.back() > ms[ms.size() - 2]))
            throw std::invalid_argument("tabulated mu: last segment must have positive slope so cum grows to infinity");
    }
    double slope() const { return (ms.back() - ms[ms.size() - 2]) / (xs.back() - xs[xs.size() - 2]); }
    double cum(double x) const override {
        if (x >= xs.back()) return ms.back() + slope() * (x - xs.back());
        std::size_t i = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) - 1;
        double w = (x - xs[i]) / (xs[i + 1] - xs[i]);
        return ms[i] + w * (ms[i + 1] - ms[i]);
    }
    double inverse_cum(double u) const override {
        if (u <= 0.0) return 0.0;
        if (u > ms.back()) return xs.back() + (u - ms.back()) / slope();
        std::size_t i = static_cast<std::size_t>(std::lower_bound(ms.begin(), ms.end(), u) - ms.begin());
        double w = (u - ms[i - 1]) / (ms[i] - ms[i - 1]);
        return xs[i - 1] + w * (xs[i] - xs[i - 1]);
    }
};

}  // namespace detail

class IntensityMeasure {
public:
    static IntensityMeasure brownian(double c = 1.0) {
        if (!(c > 0.0)) throw std::invalid_argument("brownian: c must be positive");
        return {std::make_shared<detail::BrownianTail>(c), {{"family", "brownian"}, {"c", c}}};
    }
    static IntensityMeasure power(double a, double c = 1.0) {
        if (!(a > 0.0) || !(c > 0.0)) throw std::invalid_argument("power: a and c must be positive");
        return {std::make_shared<detail::PowerTail>(a, c), {{"family", "power"}, {"a", a}, {"c", c}}};
    }
    static IntensityMeasure exponential(double c, double r) {
        if (!(c > 0.0) || !(r > 0.0)) throw std::invalid_argument("exponential: c and r must be positive");
        return {std::make_shared<detail::ExponentialTail>(c, r), {{"family", "exponential"}, {"c", c}, {"r", r}}};
    }
    static IntensityMeasure tabulated(const std::vector<double>& xs, const std::vector<double>& tails) {
        return {std::make_shared<detail::TabulatedTail>(xs, tails),
                {{"family", "tabulated"}, {"x", xs}, {"tail", tails}}};
    }

    double tail(double x) const {
        if (!(x > 0.0)) throw std::domain_error("intensity tail needs x > 0");
        return model_->tail(x);
    }
    double inverse_tail(double u) const {
        if (!(u > 0.0)) throw std::domain_error("inverse tail needs u > 0");
        return model_->inverse_tail(u);
    }
    double atom_at_infinity() const { return model_->atom_at_infinity(); }
    double total_mass() const { return model_->mass(); }
    bool infinite_mass() const { return std::isinf(model_->mass()); }
    const nlohmann::json& description() const { return desc_; }

    IntensityMeasure truncated(double z) const {
        if (!(z > 0.0) || !(model_->tail(z) > 0.0))
            throw std::domain_error("truncate_at_height: tail at z must be positive");
        nlohmann::json d = {{"family", "truncated"}, {"z", z}, {"base", desc_}};
        return {std::make_shared<detail::TruncatedTail>(model_, z), std::move(d)};
    }
    // z of a truncated measure, +inf otherwise
    double truncation_height() const {
        auto t = std::dynamic_pointer_cast<const detail::TruncatedTail>(model_);
        return t ? t->z : kInf;
    }

private:
    IntensityMeasure(std::shared_ptr<const detail::TailModel> m, nlohmann::json d)
        : model_(std::move(m)), desc_(std::move(d)) {}
    std::shared_ptr<const detail::TailModel> model_;
    nlohmann::json desc_;
};

class MutationMeasure {
public:
    static MutationMeasure uniform(double theta) {
        if (!(theta >= 0.0)) throw std::invalid_argument("uniform mu: theta must be >= 0");
        return {std::make_shared<detail::UniformCum>(theta), {{"family", "uniform"}, {"theta", theta}}, theta == 0.0};
    }
    static MutationMeasure zero() { return uniform(0.0); }
    static MutationMeasure power(double b, double c = 1.0) {
        if (!(b > 0.0) || !(c > 0.0)) throw std::invalid_argument("power mu: b and c must be positive");
        return {std::make_shared<detail::PowerCum>(b, c), {{"family", "power"}, {"b", b}, {"c", c}}, false};
    }
    static MutationMeasure tabulated(const std::vector<double>& xs, const std::vector<double>& cums) {
        return {std::make_shared<detail::TabulatedCum>(xs, cums), {{"family", "tabulated"}, {"x", xs}, {"cum", cums}},
                false};
    }

    double cum(double x) const {
        if (x < 0.0) throw std::domain_error("mutation cum needs x >= 0");
        if (std::isinf(x)) return zero_ ? 0.0 : kInf;
        return model_->cum(x);
    }
    double inverse_cum(double u) const {
        if (u < 0.0) throw std::domain_error("inverse cum needs u >= 0");
        return model_->inverse_cum(u);
    }
    bool is_zero() const { return zero_; }
    // theta for the uniform family, NaN otherwise
    double uniform_rate() const {
        return desc_.at("family") == "uniform" ? desc_.at("theta").get<double>() : std::nan("");
    }
    const nlohmann::json& description() const { return desc_; }

private:
    MutationMeasure(std::shared_ptr<const detail::CumModel> m, nlohmann::json d, bool z)
        : model_(std::move(m)), desc_(std::move(d)), zero_(z) {}
    std::shared_ptr<const detail::CumModel> model_;
    nlohmann::json desc_;
    bool zero_;
};

struct MeasurePair {
    IntensityMeasure nu;
    MutationMeasure mu;
};

inline constexpr double kW0Probe = 1e-12;

inline double W(const IntensityMeasure& nu, double x) {
    if (!(x > 0.0)) throw std::domain_error("W needs x > 0");
    return 1.0 / nu.tail(x);
}
inline double W(const MeasurePair& p, double x) { return W(p.nu, x); }

inline double W0(const IntensityMeasure& nu) { return nu.infinite_mass() ? 0.0 : 1.0 / nu.tail(kW0Probe); }

// W^mu(x) = e^{-mu(x)} W(x) + int_0^{mu(x)} W(mu^{-1}(u)) e^{-u} du
inline double W_mu(const MeasurePair& p, double x, const QuadratureConfig& q = {}) {
    if (!(x >= 0.0)) throw std::domain_error("W_mu needs x >= 0");
    const double zt = p.nu.truncation_height();
    if (x > zt) x = zt;
    if (p.mu.is_zero()) return x == 0.0 ? W0(p.nu) : (std::isinf(x) ? 1.0 / p.nu.atom_at_infinity() : W(p.nu, x));
    if (x == 0.0) return W0(p.nu);
    auto g = [&](double u) {
        double y = p.mu.inverse_cum(u);
        if (!(y > 0.0)) return W0(p.nu) * std::exp(-u);
        return W(p.nu, y) * std::exp(-u);
    };
    if (std::isinf(x)) {
        // boundary term e^{-u} W(x(u)) must vanish for a finite limit
        double far = 700.0;
        double y = p.mu.inverse_cum(far);
        double boundary = std::exp(-far) * W(p.nu, y);
        if (!(boundary < q.abs_tol)) return kInf;
        try {
            return integrate(g, 0.0, kInf, q);
        } catch (const QuadratureError&) {
            return kInf;
        }
    }
    double m = p.mu.cum(x);
    return std::exp(-m) * W(p.nu, x) + integrate(g, 0.0, m, q);
}

inline double nu_mu_tail(const MeasurePair& p, double x, const QuadratureConfig& q = {}) {
    if (!(x > 0.0)) throw std::domain_error("nu_mu_tail needs x > 0");
    return 1.0 / W_mu(p, x, q);
}

inline IntensityMeasure truncate_at_height(const IntensityMeasure& nu, double z) { return nu.truncated(z); }

// H with P(H > x) = tail(x)/tail(floor) for x >= floor; +inf with probability atom/tail(floor)
inline double sample_tail(const IntensityMeasure& nu, RandomStream& rng, double floor) {
    if (!(floor > 0.0)) throw std::domain_error("sample_tail: floor must be positive");
    double top = nu.tail(floor);
    if (!std::isfinite(top) || !(top > 0.0)) throw std::domain_error("sample_tail: floor outside support");
    double v = rng.uniform() * top;
    if (v < nu.atom_at_infinity()) return kInf;
    return std::max(nu.inverse_tail(v), floor);
}

// height with law nu restricted to [lo, hi)
inline double sample_tail_between(const IntensityMeasure& nu, RandomStream& rng, double lo, double hi) {
    double a = nu.tail(hi), b = nu.tail(lo);
    for (;;) {
        double x = nu.inverse_tail(a + (b - a) * rng.uniform());
        x = std::max(x, lo);
        if (x < hi) return x;
    }
}

inline IntensityMeasure intensity_from_json(const nlohmann::json& j) {
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "brownian") return IntensityMeasure::brownian(j.value("c", 1.0));
    if (fam == "power") return IntensityMeasure::power(j.at("a").get<double>(), j.value("c", 1.0));
    if (fam == "exponential") return IntensityMeasure::exponential(j.at("c").get<double>(), j.at("r").get<double>());
    if (fam == "tabulated")
        return IntensityMeasure::tabulated(j.at("x").get<std::vector<double>>(), j.at("tail").get<std::vector<double>>());
    if (fam == "truncated") return intensity_from_json(j.at("base")).truncated(j.at("z").get<double>());
    throw std::invalid_argument("unknown intensity family '" + fam + "'");
}

inline MutationMeasure mutation_from_json(const nlohmann::json& j) {
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "uniform") return MutationMeasure::uniform(j.at("theta").get<double>());
    if (fam == "power") return MutationMeasure::power(j.at("b").get<double>(), j.value("c", 1.0));
    if (fam == "tabulated")
        return MutationMeasure::tabulated(j.at("x").get<std::vector<double>>(), j.at("cum").get<std::vector<double>>());
    throw std::invalid_argument("unknown mutation family '" + fam + "'");
}

}  // namespace cpplab
