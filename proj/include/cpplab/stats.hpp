#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace cpplab {

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    double effective_n = 0.0;
};

struct ChiSquareResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int dof = 0;
};

// P(K > t) for the Kolmogorov limit law
inline double kolmogorov_survival(double t) {
    if (t <= 0.0) return 1.0;
    if (t < 0.27) return 1.0;
    if (t < 1.0) {
        // small-t form converges faster
        const double pi2 = M_PI * M_PI;
        double s = 0.0;
        for (int k = 1; k <= 50; ++k) {
            double a = (2.0 * k - 1.0);
            s += std::exp(-a * a * pi2 / (8.0 * t * t));
        }
        return std::clamp(1.0 - std::sqrt(2.0 * M_PI) / t * s, 0.0, 1.0);
    }
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        double term = std::exp(-2.0 * k * k * t * t);
        s += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-300) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

// Stephens' finite-n correction of the asymptotic p-value
inline double ks_p_value(double d, double n) {
    double rn = std::sqrt(n);
    return kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d);
}

inline constexpr std::size_t kMinKsSamples = 100;

inline KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.size() < kMinKsSamples) throw std::invalid_argument("ks_test needs at least 100 samples");
    for (double s : samples)
        if (std::isnan(s)) throw std::invalid_argument("ks_test: NaN sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double f = cdf(samples[i]);
        if (!(f >= -1e-12 && f <= 1.0 + 1e-12)) throw std::invalid_argument("ks_test: cdf outside [0,1]");
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return {d, ks_p_value(d, n), n};
}

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.size() < kMinKsSamples || b.size() < kMinKsSamples)
        throw std::invalid_argument("ks_two_sample needs at least 100 samples per side");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    double ne = na * nb / (na + nb);
    return {d, ks_p_value(d, ne), ne};
}

inline ChiSquareResult chi_square_test(const std::vector<double>& observed, const std::vector<double>& expected,
                                       int fitted_params = 0) {
    if (observed.size() != expected.size() || observed.size() < 2)
        throw std::invalid_argument("chi_square_test: need >= 2 matching bins");
    double s = 0.0;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        if (!(expected[k] > 0.0)) throw std::invalid_argument("chi_square_test: expected counts must be positive");
        double r = observed[k] - expected[k];
        s += r * r / expected[k];
    }
    int dof = static_cast<int>(observed.size()) - 1 - fitted_params;
    if (dof < 1) throw std::invalid_argument("chi_square_test: no degrees of freedom left");
    boost::math::chi_squared dist(dof);
    return {s, boost::math::cdf(boost::math::complement(dist, s)), dof};
}

// Two-sample homogeneity chi-square on a common set of bins.
inline ChiSquareResult chi_square_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("chi_square_two_sample: bad bins");
    double na = 0, nb = 0;
    for (std::size_t k = 0; k < a.size(); ++k) na += a[k], nb += b[k];
    double s = 0.0;
    int used = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        double tot = a[k] + b[k];
        if (tot == 0.0) continue;
        ++used;
        double ea = tot * na / (na + nb), eb = tot * nb / (na + nb);
        s += (a[k] - ea) * (a[k] - ea) / ea + (b[k] - eb) * (b[k] - eb) / eb;
    }
    int dof = used - 1;
    if (dof < 1) return {0.0, 1.0, 0};
    boost::math::chi_squared dist(dof);
    return {s, boost::math::cdf(boost::math::complement(dist, s)), dof};
}

// Welford accumulator with the pairwise (Chan) merge.
struct MeanAccumulator {
    double n = 0.0, mean = 0.0, m2 = 0.0;

    void add(double x) {
        n += 1.0;
        double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    MeanAccumulator& merge(const MeanAccumulator& o) {
        if (o.n == 0.0) return *this;
        if (n == 0.0) return *this = o;
        double tot = n + o.n, d = o.mean - mean;
        mean += d * o.n / tot;
        m2 += o.m2 + d * d * n * o.n / tot;
        n = tot;
        return *this;
    }
    double variance() const { return n > 1.0 ? m2 / (n - 1.0) : 0.0; }
    double se() const { return n > 0.0 ? std::sqrt(variance() / n) : 0.0; }
};

inline MeanAccumulator summarize(const std::vector<double>& xs) {
    MeanAccumulator a;
    for (double x : xs) a.add(x);
    return a;
}

// sum(y)/sum(x) with delta-method standard error
struct RatioEstimate {
    double ratio = 0.0, se = 0.0;
};

inline RatioEstimate ratio_of_means(const std::vector<double>& num, const std::vector<double>& den) {
    if (num.size() != den.size() || num.size() < 2) throw std::invalid_argument("ratio_of_means: bad sizes");
    const double n = static_cast<double>(num.size());
    double sy = 0, sx = 0;
    for (std::size_t i = 0; i < num.size(); ++i) sy += num[i], sx += den[i];
    if (!(sx > 0.0)) throw std::invalid_argument("ratio_of_means: denominator sum must be positive");
    double r = sy / sx, xbar = sx / n, v = 0.0;
    for (std::size_t i = 0; i < num.size(); ++i) {
        double e = num[i] - r * den[i];
        v += e * e;
    }
    v /= (n - 1.0);
    return {r, std::sqrt(v / n) / xbar};
}

struct MeanCheck {
    double estimate = 0.0, se = 0.0, oracle = 0.0, z = 0.0;
    bool pass = false;
};

inline constexpr double kMeanSigmas = 3.0;
inline constexpr double kTestLevel = 0.01;

inline MeanCheck mean_check(double estimate, double se, double oracle) {
    MeanCheck c{estimate, se, oracle, 0.0, false};
    double diff = estimate - oracle;
    c.z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff));
    c.pass = std::abs(diff) <= kMeanSigmas * se;
    return c;
}

}  // namespace cpplab
