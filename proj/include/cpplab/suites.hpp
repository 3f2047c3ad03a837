#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "analytics.hpp"
#include "birth_death.hpp"
#include "clonal_analysis.hpp"
#include "clonal_growth.hpp"
#include "cpp_sim.hpp"
#include "harness.hpp"
#include "measures.hpp"
#include "mutation_sim.hpp"

namespace cpplab {

namespace detail {

inline IntensityMeasure model_nu(const nlohmann::json& m) { return intensity_from_json(m.at("nu")); }
inline MutationMeasure model_mu(const nlohmann::json& m) { return mutation_from_json(m.at("mu")); }
inline MeasurePair model_pair(const nlohmann::json& m) { return {model_nu(m), model_mu(m)}; }

inline std::pair<CombTree, MutationSet> draw_marked_comb(const nlohmann::json& m, double eps, RandomStream& rng) {
    CombTree c = sample_cpp(model_nu(m), m.at("z").get<double>(), eps, rng);
    MutationSet ms = sample_mutations(c, model_mu(m), rng);
    return {std::move(c), std::move(ms)};
}

inline double exp_cdf(double mean, double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x / mean); }

}  // namespace detail

// Per-replicate statistics behind the verification suites.
inline const StatisticRegistry& builtin_registry() {
    static const StatisticRegistry reg = [] {
        using nlohmann::json;
        StatisticRegistry r;
        r.add("cpp.T_z", {[](const json& m, RandomStream& rng) {
                              auto c = sample_cpp(detail::model_nu(m), m.at("z"), m.at("epsilon"), rng);
                              return Record{c.T_z};
                          },
                          [](const json& m, const std::vector<double>& ladder, RandomStream& rng) {
                              auto c = sample_cpp(detail::model_nu(m), m.at("z"), ladder.back(), rng);
                              return std::vector<Record>(ladder.size(), Record{c.T_z});
                          },
                          "total boundary length T_z"});
        r.add("cpp.depths", {[](const json& m, RandomStream& rng) {
                                 auto c = sample_cpp(detail::model_nu(m), m.at("z"), m.at("epsilon"), rng);
                                 const std::size_t k = m.value("depths_per_tree", std::size_t{10});
                                 Record out;
                                 for (std::size_t i = 0; i < c.atoms.size() && i < k; ++i) out.push_back(c.atoms[i].x);
                                 return out;
                             },
                             nullptr, "first consecutive coalescence depths"});
        r.add("cpp.first_branch", {[](const json& m, RandomStream& rng) {
                                       auto c = sample_cpp(detail::model_nu(m), m.at("z"), m.at("epsilon"), rng);
                                       return Record{first_branch_height(to_simple_tree(c))};
                                   },
                                   nullptr, "height of the first branch point"});
        r.add("clonal.mass",
              {[](const json& m, RandomStream& rng) {
                   auto [c, ms] = detail::draw_marked_comb(m, m.at("epsilon"), rng);
                   return Record{clonal_mass(clonal_set(c, ms, 1.0)), clonal_existence(c, ms, 1.0) ? 1.0 : 0.0};
               },
               [](const json& m, const std::vector<double>& ladder, RandomStream& rng) {
                   auto [c, ms] = detail::draw_marked_comb(m, ladder.back(), rng);
                   std::vector<Record> out;
                   for (double e : ladder) {
                       auto [cc, mm] = coarsen(c, ms, e);
                       out.push_back({clonal_mass(clonal_set(cc, mm, 1.0)), clonal_existence(cc, mm, 1.0) ? 1.0 : 0.0});
                   }
                   return out;
               },
               "clonal mass given a clean origin, and clonal existence"});
        r.add("clonal.renewal", {[](const json& m, RandomStream& rng) {
                                     auto c = sample_comb_window(detail::model_nu(m), m.at("t_max"), m.at("epsilon"), rng);
                                     auto ms = sample_mutations(c, detail::model_mu(m), rng);
                                     auto set = clonal_set(c, ms, 1.0);
                                     Record out;
                                     for (double t : m.at("times")) out.push_back(set.contains(t) ? 1.0 : 0.0);
                                     return out;
                                 },
                                 nullptr, "indicators of t in the clonal regenerative set"});
        r.add("clonal.reduced_depths", {[](const json& m, RandomStream& rng) {
                                            auto [c, ms] = detail::draw_marked_comb(m, m.at("epsilon"), rng);
                                            const double floor = m.at("floor");
                                            Record out;
                                            for (const auto& a : reduced_clonal_subtree(c, ms, 1.0).atoms)
                                                if (a.x > floor) out.push_back(a.x);
                                            return out;
                                        },
                                        nullptr, "depths of the reduced clonal subtree above a floor"});
        r.add("spectrum.counts", {[](const json& m, RandomStream& rng) {
                                      auto [c, ms] = detail::draw_marked_comb(m, m.at("epsilon"), rng);
                                      auto p = allelic_partition(c, ms, 1.0, true);
                                      Record out;
                                      for (double q : m.at("q")) out.push_back(static_cast<double>(spectrum_tail(p, q, true)));
                                      out.push_back(c.T_z);
                                      return out;
                                  },
                                  nullptr, "mutation clusters above each q, then T_z"});
        r.add("mutations.total",
              {[](const json& m, RandomStream& rng) {
                   auto [c, ms] = detail::draw_marked_comb(m, m.at("epsilon"), rng);
                   return Record{static_cast<double>(ms.size())};
               },
               [](const json& m, const std::vector<double>& ladder, RandomStream& rng) {
                   auto [c, ms] = detail::draw_marked_comb(m, ladder.back(), rng);
                   std::vector<Record> out;
                   for (double e : ladder) out.push_back({static_cast<double>(coarsen(c, ms, e).second.size())});
                   return out;
               },
               "number of mutations above the floor"});
        // (k^p N(eps) - N(k eps)) / (k^p - 1) removes a missing mass of order eps^p
        r.add("mutations.extrapolated", {[](const json& m, RandomStream& rng) {
                                             const double eps = m.at("epsilon"), k = m.at("richardson_ratio"),
                                                          p = m.at("richardson_order");
                                             auto [c, ms] = detail::draw_marked_comb(m, eps, rng);
                                             const double fine = static_cast<double>(ms.size());
                                             const double coarse = static_cast<double>(coarsen(c, ms, k * eps).second.size());
                                             const double w = std::pow(k, p);
                                             return Record{(w * fine - coarse) / (w - 1.0), fine};
                                         },
                                         nullptr, "Richardson-extrapolated mutation count, then the raw count"});
        r.add("growth.single_bud", {[](const json& m, RandomStream& rng) {
                                        SimpleTree t;
                                        t.reversed = true;
                                        t.nodes[""] = {m.at("z").get<double>(), m.at("bud_height").get<double>(), std::nullopt, false};
                                        auto s = make_growth_state(detail::model_nu(m), t, 0.0, m.at("epsilon"), rng);
                                        grow_step(s, rng);
                                        return Record{s.eta};
                                    },
                                    nullptr, "waiting time of a single bud"});
        auto summary = [](const SimpleTree& t) {
            auto s = summarize_tree(t);
            return Record{static_cast<double>(s.buds), s.total_length, s.highest_leaf};
        };
        r.add("growth.grown", {[summary](const json& m, RandomStream& rng) {
                                   const double eta0 = m.at("eta0"), eta1 = m.at("eta1");
                                   auto nu = detail::model_nu(m);
                                   auto c = sample_cpp(nu, m.at("z"), m.at("epsilon"), rng);
                                   auto ms = sample_coupled_mutations(c, std::exp(-eta0), rng);
                                   auto s = growth_from_coupling(nu, c, ms, eta0, rng);
                                   grow_until(s, eta1, rng);
                                   return summary(s.tree);
                               },
                               nullptr, "buds, length and highest leaf after grafting from eta0 to eta1"});
        r.add("growth.direct", {[summary](const json& m, RandomStream& rng) {
                                    const double theta = std::exp(-m.at("eta1").get<double>());
                                    auto c = sample_cpp(detail::model_nu(m), m.at("z"), m.at("epsilon"), rng);
                                    auto ms = sample_coupled_mutations(c, theta, rng);
                                    return summary(clonal_subtree_at_level(c, ms, theta));
                                },
                                nullptr, "buds, length and highest leaf of the thinned tree at eta1"});
        r.add("growth.tau", {[](const json& m, RandomStream& rng) {
                                 auto c = sample_cpp(detail::model_nu(m), m.at("z"), m.at("epsilon"), rng);
                                 auto ms = sample_coupled_mutations(c, m.at("theta_max"), rng);
                                 auto tau = tau_z_from_coupling(c, ms);
                                 Record out{tau.tau, tau.censored ? 1.0 : 0.0};
                                 for (double eta : m.at("etas")) out.push_back(tau.tau <= eta ? 1.0 : 0.0);
                                 return out;
                             },
                             nullptr, "tau_z, censor flag, then 1{tau_z <= eta} on the grid"});
        r.add("bd.size", {[](const json& m, RandomStream& rng) {
                              auto t = simulate_bd(RateMeasure::constant(m.at("b")), RateMeasure::constant(m.at("k")), 0.0,
                                                   m.at("T"), rng);
                              double n = static_cast<double>(t.alive_at_horizon());
                              return Record{n, n > 0.0 ? 1.0 : 0.0};
                          },
                          nullptr, "population at the horizon, and survival"});
        r.add("yule.first_branch", {[](const json& m, RandomStream& rng) {
                                        auto t = simulate_bd(RateMeasure::constant(1.0), RateMeasure::zero(), 0.0, m.at("H"), rng);
                                        auto h = time_change(t, {[](double x) { return std::exp(-x); }, false});
                                        return Record{first_branch_height(h.tree)};
                                    },
                                    nullptr, "first branch height of a Yule tree under t -> e^{-t}"});
        r.add("yule.boundary", {[](const json& m, RandomStream& rng) {
                                    auto t = simulate_bd(RateMeasure::constant(1.0), RateMeasure::zero(), 0.0, m.at("H"), rng);
                                    return Record{boundary_measure(t)};
                                },
                                nullptr, "finite-horizon boundary measure estimator of a Yule tree"});
        return r;
    }();
    return reg;
}

struct SuiteOptions {
    std::uint64_t seed = 20240611;
    double scale = 1.0;  // multiplies every replicate count
    unsigned threads = 0;

    std::size_t reps(std::size_t n) const {
        return std::max<std::size_t>(kMinKsSamples, static_cast<std::size_t>(std::llround(static_cast<double>(n) * scale)));
    }
};

// An experiment, or an epsilon study when a ladder is given.
struct SuiteItem {
    Experiment experiment;
    std::vector<double> ladder;
    std::string study_statistic;
    std::size_t study_column = 0;

    SuiteItem(Experiment e) : experiment(std::move(e)) {}
    SuiteItem(Experiment e, std::vector<double> l, std::string stat, std::size_t col)
        : experiment(std::move(e)), ladder(std::move(l)), study_statistic(std::move(stat)), study_column(col) {}
};

struct Suite {
    std::string name;
    std::vector<int> criteria;
    std::string description;
    std::function<std::vector<SuiteItem>(const SuiteOptions&)> build;
};

namespace detail {

inline nlohmann::json brownian_model(double z, double eps, double theta = 1.0) {
    return {{"nu", IntensityMeasure::brownian().description()},
            {"mu", MutationMeasure::uniform(theta).description()},
            {"z", z},
            {"epsilon", eps}};
}

inline Check ks_check(std::string name, std::string stat, std::optional<std::size_t> col, std::function<double(double)> cdf,
                      nlohmann::json desc) {
    Check c;
    c.name = std::move(name);
    c.kind = TestKind::ks;
    c.statistic = std::move(stat);
    c.column = col;
    c.cdf = std::move(cdf);
    c.oracle_desc = std::move(desc);
    return c;
}

inline Check mean_check_of(std::string name, std::string stat, std::size_t col, double oracle, nlohmann::json desc) {
    Check c;
    c.name = std::move(name);
    c.kind = TestKind::mean;
    c.statistic = std::move(stat);
    c.column = col;
    c.oracle = oracle;
    c.oracle_desc = std::move(desc);
    return c;
}

inline Check ks2_check(std::string name, std::string a, std::string b, std::size_t col) {
    Check c;
    c.name = std::move(name);
    c.kind = TestKind::ks_two_sample;
    c.statistic = std::move(a);
    c.other_statistic = std::move(b);
    c.column = col;
    c.other_column = col;
    c.oracle_desc = {{"kind", "two-sample"}};
    return c;
}

inline Check flag_check(std::string name, std::function<double()> fn, nlohmann::json desc) {
    Check c;
    c.name = std::move(name);
    c.kind = TestKind::flag;
    c.compute = std::move(fn);
    c.oracle_desc = std::move(desc);
    return c;
}

inline std::vector<SuiteItem> cpp_construction(const SuiteOptions& o) {
    const double z = 1.0, eps = 1e-3;
    auto nu = IntensityMeasure::brownian();
    Experiment e{"cpp-construction", 1, brownian_model(z, eps), o.reps(10000), o.seed, {}};
    const double rate = nu.tail(z), top = nu.tail(eps);
    e.checks.push_back(ks_check("T_z ~ Exp", "cpp.T_z", 0, [=](double x) { return exp_cdf(1.0 / rate, x); },
                                {{"law", "exponential"}, {"mean", 1.0 / rate}}));
    e.checks.push_back(ks_check("depth law on [eps, z)", "cpp.depths", std::nullopt,
                                [=](double x) {
                                    if (x <= eps) return 0.0;
                                    if (x >= z) return 1.0;
                                    return (top - nu.tail(x)) / (top - rate);
                                },
                                {{"law", "nu restricted to [eps, z)"}, {"tail", "eps/x"}}));
    return {{e}};
}

inline std::vector<SuiteItem> clonal_laws(const SuiteOptions& o) {
    const double z = 1.0;
    MeasurePair p{IntensityMeasure::brownian(), MutationMeasure::uniform(1.0)};
    const double mean = W_mu(p, z);
    const std::vector<double> ladder{1e-2, 5e-3, 2.5e-3};
    Experiment study{"clonal-mass-epsilon-study", 2, brownian_model(z, ladder.front()), o.reps(10000), o.seed, {}};
    Experiment mass{"clonal-mass-exp-law", 2, brownian_model(z, ladder.back()), o.reps(10000), o.seed, {}};
    mass.checks.push_back(ks_check("clonal mass ~ Exp(W_mu(z))", "clonal.mass", 0,
                                   [=](double x) { return exp_cdf(mean, x); }, {{"law", "exponential"}, {"mean", mean}}));
    Experiment exist{"clonal-existence", 3, brownian_model(z, 1e-3), o.reps(10000), o.seed, {}};
    const double pr = clonal_probability(p, z);
    exist.checks.push_back(mean_check_of("P(mutation-free lineage)", "clonal.mass", 1, pr, {{"formula", "W(z) e^{-mu(z)} / W_mu(z)"}}));
    return {{study, ladder, "clonal.mass", 0}, {mass}, {exist}};
}

inline std::vector<SuiteItem> renewal(const SuiteOptions& o) {
    MeasurePair p{IntensityMeasure::brownian(), MutationMeasure::uniform(1.0)};
    const std::vector<double> times{0.25, 0.5, 1.0};
    nlohmann::json model = brownian_model(1.0, 1e-4);
    model.erase("z");
    model["t_max"] = 1.5;
    model["times"] = times;
    Experiment e{"renewal-density", 4, model, o.reps(10000), o.seed, {}};
    for (std::size_t i = 0; i < times.size(); ++i)
        e.checks.push_back(mean_check_of("P(t in R) at t=" + format_real(times[i]), "clonal.renewal", i,
                                         renewal_density(p, times[i]), {{"formula", "int e^{-t nu - mu} dmu"}}));
    Check lt;
    lt.name = "phi(1) * U(1) = 1";
    lt.kind = TestKind::approx;
    lt.oracle = 1.0;
    lt.tolerance = 1e-4;
    lt.compute = [p] { return laplace_exponent(p, 1.0) * renewal_laplace_transform(p, 1.0); };
    lt.oracle_desc = {{"identity", "Laplace transform of the renewal density times the exponent"}};
    e.checks.push_back(lt);
    return {{e}};
}

inline std::vector<SuiteItem> reduced_tree(const SuiteOptions& o) {
    const double z = 1.0, floor = 0.05;
    MeasurePair p{IntensityMeasure::brownian(), MutationMeasure::uniform(1.0)};
    nlohmann::json model = brownian_model(z, 1e-3);
    model["floor"] = floor;
    Experiment e{"reduced-clonal-subtree", 5, model, o.reps(2000), o.seed, {}};
    const double top = 1.0 / W_mu(p, z), bot = 1.0 / W_mu(p, floor);
    e.checks.push_back(ks_check("depths ~ nu_mu on (floor, z)", "clonal.reduced_depths", std::nullopt,
                                [=](double x) {
                                    if (x <= floor) return 0.0;
                                    if (x >= z) return 1.0;
                                    return 1.0 - (1.0 / W_mu(p, x) - top) / (bot - top);
                                },
                                {{"tail", "(1/W_mu(x) - 1/W_mu(z)) / (1/W_mu(floor) - 1/W_mu(z))"}}));
    return {{e}};
}

inline std::vector<SuiteItem> spectrum(const SuiteOptions& o) {
    MeasurePair p{IntensityMeasure::brownian(), MutationMeasure::uniform(1.0)};
    const std::vector<double> qs{0.5, 1.0, 2.0}, zs{2.0, 4.0, 8.0};
    const std::vector<std::size_t> reps{10000, 10000, 10000};
    std::vector<SuiteItem> out;
    for (std::size_t zi = 0; zi < zs.size(); ++zi) {
        const double z = zs[zi];
        nlohmann::json model = brownian_model(z, 2e-3);
        model["q"] = qs;
        Experiment e{"spectrum-z" + format_real(z), 6, model, o.reps(reps[zi]), o.seed, {}};
        for (std::size_t i = 0; i < qs.size(); ++i) {
            Check c;
            c.name = "Phi_z(q,inf)/T_z at q=" + format_real(qs[i]);
            c.kind = TestKind::ratio;
            c.statistic = "spectrum.counts";
            c.column = i;
            c.den_column = qs.size();
            c.oracle = spectrum_tail_mutations(p, z, qs[i]) / W(p.nu, z);
            c.oracle_desc = {{"formula", "mutation part of Lambda_z((q,inf)) / W(z)"}};
            e.checks.push_back(c);
        }
        if (zi + 1 == zs.size()) {
            e.checks.push_back(flag_check(
                "Lambda_z/W(z) approaches Lambda as z grows",
                [p, qs, zs] {
                    for (double q : qs) {
                        const double lim = limit_spectrum_tail(p, q);
                        double prev = kInf;
                        for (double z : zs) {
                            double d = std::abs(spectrum_tail_mutations(p, z, q) / W(p.nu, z) - lim);
                            if (!(d < prev)) return 0.0;
                            prev = d;
                        }
                    }
                    return 1.0;
                },
                {{"limit", "theta E1(theta q)"}}));
        }
        out.push_back({e});
    }
    return out;
}

inline std::vector<SuiteItem> total_mutations(const SuiteOptions& o) {
    nlohmann::json model = {{"nu", IntensityMeasure::power(0.5, 1.0).description()},
                            {"mu", MutationMeasure::uniform(1.0).description()},
                            {"z", 1.0},
                            {"epsilon", 1e-4},
                            {"richardson_ratio", 4.0},
                            {"richardson_order", 0.5}};
    MeasurePair p{IntensityMeasure::power(0.5, 1.0), MutationMeasure::uniform(1.0)};
    Experiment e{"total-mutations", 7, model, o.reps(10000), o.seed, {}};
    e.checks.push_back(mean_check_of("extrapolated mean count", "mutations.extrapolated", 0, 2.0,
                                     {{"value", "2"}, {"cross_check", expected_total_mutations(p, 1.0)}}));
    e.checks.push_back(flag_check(
        "brownian nu with theta dx is infinite",
        [] {
            return mutation_finiteness({IntensityMeasure::brownian(), MutationMeasure::uniform(1.0)}) == Finiteness::infinite;
        },
        {{"expected", "infinite"}}));
    e.checks.push_back(flag_check(
        "power a=1/2 nu with theta dx is finite", [p] { return mutation_finiteness(p) == Finiteness::finite; },
        {{"expected", "finite"}}));
    return {{e}};
}

inline std::vector<SuiteItem> growth(const SuiteOptions& o) {
    auto nu = IntensityMeasure::brownian();
    nlohmann::json bud = {{"nu", nu.description()}, {"z", 1.0}, {"bud_height", 0.5}, {"epsilon", 0.01}};
    Experiment single{"growth-single-bud", 8, bud, o.reps(10000), o.seed, {}};
    single.checks.push_back(ks_check("inter-jump time ~ Exp(1)", "growth.single_bud", 0,
                                     [](double x) { return exp_cdf(1.0, x); }, {{"law", "exponential"}, {"mean", 1.0}}));
    nlohmann::json eq = {{"nu", nu.description()}, {"z", 1.0}, {"epsilon", 0.05}, {"eta0", -std::log(3.0)}, {"eta1", 0.0}};
    Experiment equiv{"growth-equivalence", 8, eq, o.reps(10000), o.seed, {}};
    equiv.checks.push_back(ks2_check("bud count", "growth.grown", "growth.direct", 0));
    equiv.checks.push_back(ks2_check("total length", "growth.grown", "growth.direct", 1));
    equiv.checks.push_back(ks2_check("highest leaf", "growth.grown", "growth.direct", 2));
    const std::vector<double> etas{-0.5, 0.0, 0.5, 1.0};
    nlohmann::json tm = {{"nu", nu.description()}, {"z", 1.0}, {"epsilon", 1e-3}, {"theta_max", std::exp(3.0)}, {"etas", etas}};
    Experiment tau{"growth-tau", 8, tm, o.reps(10000), o.seed, {}};
    tau.checks.push_back(ks_check("tau_z cdf", "growth.tau", 0, [nu](double eta) { return tau_z_cdf(nu, 1.0, eta); },
                                  {{"formula", "W(z) e^{-e^{-eta} z} / W_eta(z)"}}));
    for (std::size_t i = 0; i < etas.size(); ++i)
        tau.checks.push_back(mean_check_of("P(tau_z <= " + format_real(etas[i]) + ")", "growth.tau", i + 2,
                                           tau_z_cdf(nu, 1.0, etas[i]), {{"formula", "W(z) e^{-e^{-eta} z} / W_eta(z)"}}));
    return {{single}, {equiv}, {tau}};
}

inline std::vector<SuiteItem> birth_death(const SuiteOptions& o) {
    Experiment size{"bd-population-law", 9, {{"b", 1.0}, {"k", 0.5}, {"T", 1.0}}, o.reps(20000), o.seed, {}};
    const auto law = bd_law(1.0, 0.5, 0.0, 1.0);
    Check chi;
    chi.name = "N_T ~ geometric law";
    chi.kind = TestKind::chi_square;
    chi.statistic = "bd.size";
    chi.column = 0;
    chi.bins = 8;
    chi.pmf = [law](std::size_t n) { return law.pmf(n); };
    chi.oracle_desc = {{"A", law.A}, {"B", law.B}, {"law", "from the Laplace transform"}};
    size.checks.push_back(chi);
    Experiment surv{"bd-critical-survival", 9, {{"b", 1.0}, {"k", 1.0}, {"T", 1.0}}, o.reps(10000), o.seed, {}};
    surv.checks.push_back(mean_check_of("P(N_T > 0)", "bd.size", 1, bd_survival(1.0, 1.0, 0.0, 1.0), {{"value", 0.5}}));
    return {{size}, {surv}};
}

inline std::vector<SuiteItem> pure_birth(const SuiteOptions& o) {
    const double H = 6.0, floor = std::exp(-H);
    nlohmann::json model = {{"H", H}, {"nu", IntensityMeasure::brownian().description()}, {"z", 1.0}, {"epsilon", floor}};
    Experiment e{"pure-birth-time-change", 10, model, o.reps(10000), o.seed, {}};
    e.checks.push_back(ks2_check("first branch: Yule vs CPP", "yule.first_branch", "cpp.first_branch", 0));
    e.checks.push_back(ks_check("first branch cdf nu(z)/nu(x)", "yule.first_branch", 0,
                                [=](double x) { return x < 0.0 ? 0.0 : x < floor ? floor : std::min(x, 1.0); },
                                {{"formula", "nu(z)/nu(x)"}}));
    e.checks.push_back(ks_check("boundary measure ~ Exp(1)", "yule.boundary", 0, [](double x) { return exp_cdf(1.0, x); },
                                {{"law", "exponential"}, {"mean", 1.0}}));
    return {{e}};
}

}  // namespace detail

inline std::vector<TestReport> run_suite(const std::string& name, const SuiteOptions& o,
                                  const std::function<void(const TestReport&)>& on_report = {},
                                  const std::atomic<bool>* stop = nullptr);

namespace detail {

// Reruns scaled-down versions of the other suites with different worker
// counts and compares their serialized reports.
inline std::vector<SuiteItem> determinism(const SuiteOptions& o) {
    const std::vector<std::string> names{"cpp-construction", "clonal-laws", "renewal", "reduced-tree", "spectrum",
                                         "total-mutations",  "growth",      "birth-death", "pure-birth"};
    const double scale = 0.05 * o.scale;
    Experiment e{"determinism", 11, {{"suites", names}, {"scale", scale}}, 0, o.seed, {}};
    for (const auto& s : names) {
        e.checks.push_back(flag_check(
            "byte-identical rerun of " + s,
            [s, o, scale] {
                SuiteOptions a = o, b = o;
                a.scale = b.scale = scale;
                a.threads = 1;
                b.threads = 3;
                auto dump = [&](const SuiteOptions& opt) {
                    nlohmann::json j = nlohmann::json::array();
                    for (const auto& r : run_suite(s, opt)) j.push_back(r.to_json());
                    return j.dump();
                };
                return dump(a) == dump(b) ? 1.0 : 0.0;
            },
            {{"threads", {1, 3}}, {"scale", scale}}));
    }
    return {{e}};
}

}  // namespace detail

inline const std::vector<Suite>& suites() {
    static const std::vector<Suite> s = {
        {"cpp-construction", {1}, "comb sampler: T_z and depth laws", detail::cpp_construction},
        {"clonal-laws", {2, 3}, "clonal mass law after an epsilon study, clonal existence", detail::clonal_laws},
        {"renewal", {4}, "renewal density and the Laplace identity", detail::renewal},
        {"reduced-tree", {5}, "depth law of the reduced clonal subtree", detail::reduced_tree},
        {"spectrum", {6}, "allele frequency spectrum and its large-z limit", detail::spectrum},
        {"total-mutations", {7}, "expected mutation count and the finiteness dichotomy", detail::total_mutations},
        {"growth", {8}, "graft growth process and tau_z", detail::growth},
        {"birth-death", {9}, "population law and survival of constant-rate birth-death", detail::birth_death},
        {"pure-birth", {10}, "Yule trees under t -> e^{-t} and the boundary measure", detail::pure_birth},
        {"determinism", {11}, "byte-identical reruns across thread counts", detail::determinism},
    };
    return s;
}

inline const Suite& find_suite(const std::string& name) {
    for (const auto& s : suites())
        if (s.name == name) return s;
    throw std::invalid_argument("unknown suite '" + name + "'");
}

inline std::vector<TestReport> run_suite(const std::string& name, const SuiteOptions& o,
                                         const std::function<void(const TestReport&)>& on_report,
                                         const std::atomic<bool>* stop) {
    std::vector<TestReport> out;
    if (name == "all") {
        for (const auto& s : suites()) {
            if (stop && *stop) break;
            auto r = run_suite(s.name, o, on_report, stop);
            out.insert(out.end(), r.begin(), r.end());
        }
        return out;
    }
    const auto& reg = builtin_registry();
    for (const auto& item : find_suite(name).build(o)) {
        if (stop && *stop) break;
        TestReport r = item.ladder.empty()
                           ? run_experiment(item.experiment, reg, o.threads)
                           : epsilon_study(item.experiment, reg, item.study_statistic, item.study_column, item.ladder, o.threads);
        if (on_report) on_report(r);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace cpplab
