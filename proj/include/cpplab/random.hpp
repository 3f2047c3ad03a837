#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace cpplab {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// stream_i = hash(master, name, i)
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view name, std::uint64_t index) {
    std::uint64_t s = master ^ fnv1a(name);
    std::uint64_t a = splitmix64(s);
    s = a ^ (index * 0xd1b54a32d192ed03ULL);
    return splitmix64(s);
}

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    // open interval (0,1); never returns an endpoint
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

    std::uint64_t poisson(double mean) {
        if (!(mean > 0.0)) return 0;
        std::poisson_distribution<std::uint64_t> d(mean);
        return d(engine_);
    }

    double gamma(double shape) {
        std::gamma_distribution<double> d(shape, 1.0);
        return d(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace cpplab
