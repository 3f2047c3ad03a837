#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "random.hpp"
#include "simple_tree.hpp"
#include "stats.hpp"

namespace cpplab {

// Worker count: CPPLAB_THREADS when set, hardware concurrency otherwise.
inline unsigned default_threads() {
    if (const char* s = std::getenv("CPPLAB_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(s, &end, 10);
        if (end != s && v > 0) return static_cast<unsigned>(v);
    }
    unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : h;
}

// out[i] = fn(i); results land by index so the output is independent of scheduling.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, Fn&& fn, unsigned threads = 0) {
    std::vector<T> out(n);
    if (threads == 0) threads = default_threads();
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    auto work = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                out[i] = fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!err) err = std::current_exception();
                next = n;
                return;
            }
        }
    };
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (err) std::rethrow_exception(err);
    return out;
}

// One replicate's output; NaN entries mean "not observed" and are skipped.
using Record = std::vector<double>;
using Sampler = std::function<Record(const nlohmann::json& model, RandomStream&)>;
// Records at every rung of a decreasing floor ladder from one coupled draw.
using LadderSampler =
    std::function<std::vector<Record>(const nlohmann::json& model, const std::vector<double>& ladder, RandomStream&)>;

struct StatisticEntry {
    Sampler sample;
    LadderSampler ladder;
    std::string description;
};

class StatisticRegistry {
public:
    void add(const std::string& name, StatisticEntry e) {
        if (!e.sample) throw std::invalid_argument("statistic '" + name + "' has no sampler");
        entries_[name] = std::move(e);
    }
    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    const StatisticEntry& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw std::invalid_argument("unknown statistic '" + name + "'");
        return it->second;
    }
    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : entries_) out.push_back(k);
        return out;
    }

private:
    std::map<std::string, StatisticEntry> entries_;
};

enum class TestKind { ks, ks_two_sample, chi_square, mean, ratio, approx, flag };

inline std::string to_string(TestKind k) {
    switch (k) {
        case TestKind::ks: return "ks";
        case TestKind::ks_two_sample: return "ks2";
        case TestKind::chi_square: return "chi2";
        case TestKind::mean: return "mean";
        case TestKind::ratio: return "ratio";
        case TestKind::approx: return "approx";
        case TestKind::flag: return "flag";
    }
    return "?";
}

inline bool is_monte_carlo(TestKind k) { return k != TestKind::approx && k != TestKind::flag; }
inline bool is_distributional(TestKind k) {
    return k == TestKind::ks || k == TestKind::ks_two_sample || k == TestKind::chi_square;
}

struct Check {
    std::string name;
    TestKind kind = TestKind::ks;
    std::string statistic;
    std::optional<std::size_t> column;  // unset: pool the whole record
    std::string other_statistic;        // ks2
    std::optional<std::size_t> other_column;
    std::size_t den_column = 0;  // ratio denominator, same statistic
    std::function<double(double)> cdf;
    std::function<double(std::size_t)> pmf;
    std::size_t bins = 0;  // chi2: 0..bins-2 and a tail bin
    double oracle = 0.0;
    double tolerance = 0.0;         // approx, relative
    std::function<double()> compute;  // approx and flag
    nlohmann::json oracle_desc;
    double level = kTestLevel;
};

struct CheckResult {
    std::string name;
    std::string kind;
    nlohmann::json estimate;
    nlohmann::json oracle;
    double statistic = 0.0;
    double p_value = std::numeric_limits<double>::quiet_NaN();  // z-score for mean and ratio
    bool pass = false;

    nlohmann::json to_json() const {
        nlohmann::json j = {{"name", name}, {"kind", kind}, {"estimate", estimate}, {"oracle", oracle},
                            {"statistic", statistic}, {"pass", pass}};
        if (kind == "mean" || kind == "ratio") j["z_score"] = p_value;
        else if (!std::isnan(p_value)) j["p_value"] = p_value;
        return j;
    }
};

struct TestReport {
    std::string experiment;
    int criterion = 0;
    std::uint64_t seed = 0;
    double epsilon = 0.0;
    std::size_t replicates = 0;
    std::string config_hash;
    std::vector<CheckResult> checks;
    double runtime_seconds = 0.0;  // kept out of to_json so reports stay byte-identical

    bool pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
    }
    nlohmann::json to_json() const {
        nlohmann::json cs = nlohmann::json::array();
        for (const auto& c : checks) cs.push_back(c.to_json());
        return {{"experiment", experiment}, {"criterion", criterion},  {"seed", seed},
                {"epsilon", epsilon},       {"replicates", replicates}, {"config_hash", config_hash},
                {"pass", pass()},           {"checks", cs}};
    }
};

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct Experiment {
    std::string name;
    int criterion = 0;
    nlohmann::json model = nlohmann::json::object();
    std::size_t replicates = 0;
    std::uint64_t seed = 0;
    std::vector<Check> checks;

    std::set<std::string> statistics() const {
        std::set<std::string> s;
        for (const auto& c : checks) {
            if (!is_monte_carlo(c.kind)) continue;
            s.insert(c.statistic);
            if (c.kind == TestKind::ks_two_sample) s.insert(c.other_statistic);
        }
        return s;
    }

    void validate(const StatisticRegistry& reg) const {
        if (name.empty()) throw std::invalid_argument("experiment needs a name");
        if (checks.empty()) throw std::invalid_argument("experiment '" + name + "' has no checks");
        for (const auto& c : checks) {
            if (is_monte_carlo(c.kind) && replicates == 0)
                throw std::invalid_argument("experiment '" + name + "': replicates must be positive");
            if (is_distributional(c.kind) && replicates < kMinKsSamples)
                throw std::invalid_argument("experiment '" + name + "': distributional checks need >= 100 replicates");
            if (c.kind == TestKind::ks && !c.cdf) throw std::invalid_argument("check '" + c.name + "' needs a cdf");
            if (c.kind == TestKind::chi_square && (!c.pmf || c.bins < 2))
                throw std::invalid_argument("check '" + c.name + "' needs a pmf and >= 2 bins");
            if (!is_monte_carlo(c.kind) && !c.compute) throw std::invalid_argument("check '" + c.name + "' needs a compute");
        }
        for (const auto& s : statistics()) reg.at(s);
    }

    nlohmann::json config() const {
        nlohmann::json cs = nlohmann::json::array();
        for (const auto& c : checks) {
            nlohmann::json j = {{"name", c.name}, {"kind", to_string(c.kind)}, {"level", c.level}, {"oracle", c.oracle_desc}};
            if (is_monte_carlo(c.kind)) j["statistic"] = c.statistic;
            if (c.column) j["column"] = *c.column;
            if (c.kind == TestKind::ks_two_sample) j["other"] = c.other_statistic;
            cs.push_back(j);
        }
        return {{"name", name}, {"criterion", criterion}, {"model", model}, {"replicates", replicates},
                {"seed", seed}, {"checks", cs}};
    }

    std::string config_hash() const { return hex64(fnv1a(config().dump())); }
};

namespace detail {

inline std::vector<double> column_values(const std::vector<Record>& recs, std::optional<std::size_t> col) {
    std::vector<double> out;
    for (const auto& r : recs) {
        if (col) {
            if (*col < r.size() && !std::isnan(r[*col])) out.push_back(r[*col]);
        } else {
            for (double v : r)
                if (!std::isnan(v)) out.push_back(v);
        }
    }
    return out;
}

template <class Fn>
auto oracle_call(const std::string& check, Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw std::runtime_error("oracle evaluation failed in check '" + check + "': " + e.what());
    }
}

inline CheckResult evaluate_check(const Check& c, const std::map<std::string, std::vector<Record>>& data) {
    CheckResult r;
    r.name = c.name;
    r.kind = to_string(c.kind);
    r.oracle = c.oracle_desc;
    switch (c.kind) {
        case TestKind::ks: {
            auto xs = column_values(data.at(c.statistic), c.column);
            auto ks = oracle_call(c.name, [&] { return ks_test(xs, c.cdf); });
            r.estimate = {{"n", xs.size()}};
            r.statistic = ks.statistic;
            r.p_value = ks.p_value;
            r.pass = ks.p_value > c.level;
            break;
        }
        case TestKind::ks_two_sample: {
            auto a = column_values(data.at(c.statistic), c.column);
            auto b = column_values(data.at(c.other_statistic), c.other_column);
            auto ks = ks_two_sample(a, b);
            r.estimate = {{"n", a.size()}, {"n_other", b.size()}};
            r.statistic = ks.statistic;
            r.p_value = ks.p_value;
            r.pass = ks.p_value > c.level;
            break;
        }
        case TestKind::chi_square: {
            auto xs = column_values(data.at(c.statistic), c.column);
            std::vector<double> obs(c.bins, 0.0), exp(c.bins, 0.0);
            for (double v : xs) obs[std::min<std::size_t>(static_cast<std::size_t>(std::llround(v)), c.bins - 1)] += 1.0;
            double acc = 0.0;
            const double n = static_cast<double>(xs.size());
            oracle_call(c.name, [&] {
                for (std::size_t k = 0; k + 1 < c.bins; ++k) {
                    double p = c.pmf(k);
                    exp[k] = n * p;
                    acc += p;
                }
                exp[c.bins - 1] = n * std::max(0.0, 1.0 - acc);
                return 0;
            });
            auto chi = chi_square_test(obs, exp);
            r.estimate = {{"n", xs.size()}, {"observed", obs}, {"expected", exp}};
            r.statistic = chi.statistic;
            r.p_value = chi.p_value;
            r.pass = chi.p_value > c.level;
            break;
        }
        case TestKind::mean: {
            auto xs = column_values(data.at(c.statistic), c.column);
            auto acc = summarize(xs);
            auto m = mean_check(acc.mean, acc.se(), c.oracle);
            r.estimate = {{"n", xs.size()}, {"mean", acc.mean}, {"se", acc.se()}};
            r.oracle["value"] = c.oracle;
            r.statistic = acc.mean;
            r.p_value = m.z;
            r.pass = m.pass;
            break;
        }
        case TestKind::ratio: {
            const auto& recs = data.at(c.statistic);
            std::vector<double> num, den;
            for (const auto& rec : recs) {
                num.push_back(rec.at(*c.column));
                den.push_back(rec.at(c.den_column));
            }
            auto q = ratio_of_means(num, den);
            auto m = mean_check(q.ratio, q.se, c.oracle);
            r.estimate = {{"n", recs.size()}, {"ratio", q.ratio}, {"se", q.se}};
            r.oracle["value"] = c.oracle;
            r.statistic = q.ratio;
            r.p_value = m.z;
            r.pass = m.pass;
            break;
        }
        case TestKind::approx: {
            double v = oracle_call(c.name, c.compute);
            double err = std::abs(v - c.oracle) / std::max(std::abs(c.oracle), 1e-300);
            r.estimate = {{"value", v}, {"relative_error", err}};
            r.oracle["value"] = c.oracle;
            r.oracle["tolerance"] = c.tolerance;
            r.statistic = v;
            r.pass = err <= c.tolerance;
            break;
        }
        case TestKind::flag: {
            double v = oracle_call(c.name, c.compute);
            r.estimate = {{"value", v}};
            r.statistic = v;
            r.pass = v != 0.0;
            break;
        }
    }
    return r;
}

}  // namespace detail

inline std::vector<Record> sample_records(const Experiment& e, const StatisticRegistry& reg, const std::string& stat,
                                          unsigned threads = 0) {
    const auto& entry = reg.at(stat);
    const std::string stream = e.name + "/" + stat;
    return parallel_map<Record>(
        e.replicates,
        [&](std::size_t i) {
            RandomStream rng(derive_seed(e.seed, stream, i));
            return entry.sample(e.model, rng);
        },
        threads);
}

inline TestReport run_experiment(const Experiment& e, const StatisticRegistry& reg, unsigned threads = 0) {
    e.validate(reg);
    const auto t0 = std::chrono::steady_clock::now();
    std::map<std::string, std::vector<Record>> data;
    for (const auto& s : e.statistics()) data[s] = sample_records(e, reg, s, threads);
    TestReport rep;
    rep.experiment = e.name;
    rep.criterion = e.criterion;
    rep.seed = e.seed;
    rep.epsilon = e.model.is_object() ? e.model.value("epsilon", 0.0) : 0.0;
    rep.replicates = e.replicates;
    rep.config_hash = e.config_hash();
    for (const auto& c : e.checks) rep.checks.push_back(detail::evaluate_check(c, data));
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

struct EpsilonRung {
    double epsilon = 0.0;
    double mean = 0.0;
    double se = 0.0;
    double drift = 0.0;     // change from the previous rung
    double drift_se = 0.0;  // combined SE of the two rungs
    bool flagged = false;
};

// Mean of one statistic column along a decreasing floor ladder. A rung is
// flagged when its drift from the previous rung exceeds the combined SE.
// Coupled ladders reuse one draw per replicate; otherwise every rung is an
// independent run at its own floor.
inline std::vector<EpsilonRung> epsilon_ladder(const Experiment& e, const StatisticRegistry& reg, const std::string& stat,
                                               std::size_t column, const std::vector<double>& ladder,
                                               unsigned threads = 0) {
    if (ladder.size() < 2) throw std::invalid_argument("epsilon study needs at least two rungs");
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (!(ladder[i] < ladder[i - 1])) throw std::invalid_argument("epsilon ladder must be strictly decreasing");
    if (e.replicates < 2) throw std::invalid_argument("epsilon study needs at least two replicates");
    const auto& entry = reg.at(stat);
    std::vector<MeanAccumulator> acc(ladder.size());
    const std::string stream = e.name + "/" + stat + "/ladder";
    if (entry.ladder) {
        auto recs = parallel_map<std::vector<Record>>(
            e.replicates,
            [&](std::size_t i) {
                RandomStream rng(derive_seed(e.seed, stream, i));
                return entry.ladder(e.model, ladder, rng);
            },
            threads);
        for (const auto& per : recs)
            for (std::size_t k = 0; k < ladder.size(); ++k)
                if (column < per.at(k).size() && !std::isnan(per[k][column])) acc[k].add(per[k][column]);
    } else {
        for (std::size_t k = 0; k < ladder.size(); ++k) {
            Experiment ek = e;
            ek.model["epsilon"] = ladder[k];
            ek.name = e.name + "/eps" + std::to_string(k);
            for (const auto& r : sample_records(ek, reg, stat, threads))
                if (column < r.size() && !std::isnan(r[column])) acc[k].add(r[column]);
        }
    }
    std::vector<EpsilonRung> out;
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        EpsilonRung r{ladder[k], acc[k].mean, acc[k].se(), 0.0, 0.0, false};
        if (k > 0) {
            r.drift = r.mean - out.back().mean;
            r.drift_se = std::hypot(r.se, out.back().se);
            r.flagged = std::abs(r.drift) > r.drift_se;
        }
        out.push_back(r);
    }
    return out;
}

// Report form of the study: one check per rung after the first.
inline TestReport epsilon_study(const Experiment& e, const StatisticRegistry& reg, const std::string& stat,
                                std::size_t column, const std::vector<double>& ladder, unsigned threads = 0) {
    const auto t0 = std::chrono::steady_clock::now();
    auto rungs = epsilon_ladder(e, reg, stat, column, ladder, threads);
    TestReport rep;
    rep.experiment = e.name;
    rep.criterion = e.criterion;
    rep.seed = e.seed;
    rep.epsilon = ladder.back();
    rep.replicates = e.replicates;
    nlohmann::json cfg = e.config();
    cfg["ladder"] = ladder;
    cfg["study_statistic"] = stat;
    cfg["study_column"] = column;
    rep.config_hash = hex64(fnv1a(cfg.dump()));
    for (std::size_t k = 1; k < rungs.size(); ++k) {
        const auto& r = rungs[k];
        CheckResult c;
        c.name = "drift at eps=" + format_real(r.epsilon);
        c.kind = "epsilon-drift";
        c.estimate = {{"mean", r.mean}, {"se", r.se}, {"previous_mean", rungs[k - 1].mean}};
        c.oracle = {{"rule", "|drift| <= combined se"}, {"combined_se", r.drift_se}};
        c.statistic = r.drift;
        c.pass = !r.flagged;
        rep.checks.push_back(c);
    }
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace cpplab
