#include <atomic>
#include <csignal>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "cli_io.hpp"
#include "cpplab/analytics.hpp"
#include "cpplab/birth_death.hpp"
#include "cpplab/clonal_growth.hpp"
#include "cpplab/config.hpp"
#include "cpplab/io.hpp"
#include "cpplab/plot.hpp"
#include "cpplab/suites.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cpplab;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInterrupted = 130;

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) {
    g_stop = true;
    std::signal(SIGINT, SIG_DFL);
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

json read_config(const Common& c, bool required) {
    if (c.config.empty()) {
        if (required) throw ConfigError("--config", "a config file is required (--config)");
        return json::object();
    }
    try {
        return cli::load_config(c.config);
    } catch (const std::exception& e) {
        throw ConfigError("--config", e.what());
    }
}

std::uint64_t seed_of(const Common& c, const json& cfg) {
    return c.seed ? *c.seed : config_get<std::uint64_t>(cfg, "seed");
}

fs::path out_of(const Common& c, const json& cfg) {
    return c.out.empty() ? fs::path(config_get<std::string>(cfg, "out", "runs")) : fs::path(c.out);
}

void note(const fs::path& p) { std::cout << "wrote " << p.string() << "\n"; }

void emit(const fs::path& p, const std::string& content) {
    cli::write_file(p, content);
    note(p);
}

std::string jsonl(const std::vector<json>& rows) {
    std::string s;
    for (const auto& r : rows) s += r.dump() + "\n";
    return s;
}

// simulate cpp: comb trees with mutation sets, partitions and spectrum counts.
int simulate_cpp(const json& cfg, std::uint64_t seed, const fs::path& out) {
    const auto nu = config_nu(cfg);
    const auto mu = config_mu(cfg);
    const double z = config_get<double>(cfg, "z");
    const double eps = config_get<double>(cfg, "epsilon");
    const auto reps = config_get<std::size_t>(cfg, "replicates", 1);
    const auto qs = config_get<std::vector<double>>(cfg, "spectrum.q", {0.05, 0.1, 0.2, 0.5});
    if (reps == 0) throw ConfigError("replicates", "config key 'replicates' must be positive");
    struct Rep {
        CombTree tree;
        MutationSet marks;
        AllelicPartition partition;
    };
    auto runs = parallel_map<Rep>(reps, [&](std::size_t i) {
        RandomStream rng(derive_seed(seed, "simulate/cpp", i));
        CombTree c = sample_cpp(nu, z, eps, rng);
        MutationSet m = sample_mutations(c, mu, rng);
        AllelicPartition p = allelic_partition(c, m, 1.0, true);
        return Rep{std::move(c), std::move(m), std::move(p)};
    });
    emit(out / "tree.json", to_json(runs[0].tree).dump(2) + "\n");
    emit(out / "tree.nwk", to_newick(to_simple_tree(runs[0].tree)) + "\n");
    emit(out / "mutations.json", to_json(runs[0].marks).dump(2) + "\n");
    std::vector<json> trees, marks;
    std::vector<AllelicPartition> parts;
    std::vector<SpectrumRow> rows;
    for (const auto& r : runs) {
        trees.push_back(to_json(r.tree));
        marks.push_back(to_json(r.marks));
        parts.push_back(r.partition);
        for (double q : qs) rows.push_back({q, static_cast<double>(spectrum_tail(r.partition, q, true)), r.tree.T_z});
    }
    if (reps > 1) {
        emit(out / "trees.jsonl", jsonl(trees));
        emit(out / "mutations.jsonl", jsonl(marks));
    }
    emit(out / "partition.csv", partition_csv(parts));
    emit(out / "spectrum.csv", spectrum_csv(rows));
    return 0;
}

int simulate_bd(const json& cfg, std::uint64_t seed, const fs::path& out) {
    const auto beta = config_rate(cfg, "bd.beta");
    const auto kappa = config_rate(cfg, "bd.kappa");
    const double start = config_get<double>(cfg, "bd.start", 0.0);
    const double horizon = config_get<double>(cfg, "bd.horizon");
    const auto cap = config_get<std::size_t>(cfg, "bd.cap", kDefaultPopulationCap);
    const auto reps = config_get<std::size_t>(cfg, "replicates", 1);
    if (reps == 0) throw ConfigError("replicates", "config key 'replicates' must be positive");
    auto runs = parallel_map<BDTree>(reps, [&](std::size_t i) {
        RandomStream rng(derive_seed(seed, "simulate/bd", i));
        return simulate_bd(beta, kappa, start, horizon, rng, cap);
    });
    emit(out / "bd_tree.json", to_json(runs[0]).dump(2) + "\n");
    emit(out / "bd_tree.nwk", to_newick(runs[0].tree) + "\n");
    CsvWriter w({"replicate", "alive", "individuals"});
    for (std::size_t i = 0; i < runs.size(); ++i) w.row(i, runs[i].alive_at_horizon(), runs[i].tree.size());
    emit(out / "population.csv", w.str());
    return 0;
}

// simulate growth: starts from a coupled comb at eta0 and grafts up to eta1.
int simulate_growth(const json& cfg, std::uint64_t seed, const fs::path& out) {
    const auto nu = config_nu(cfg);
    const double z = config_get<double>(cfg, "z");
    const double eps = config_get<double>(cfg, "epsilon");
    const double eta0 = config_get<double>(cfg, "growth.eta0");
    const double eta1 = config_get<double>(cfg, "growth.eta1");
    const auto max_steps = config_get<std::size_t>(cfg, "growth.max_steps", 1'000'000);
    const auto reps = config_get<std::size_t>(cfg, "replicates", 1);
    if (reps == 0) throw ConfigError("replicates", "config key 'replicates' must be positive");
    if (eta1 < eta0) throw ConfigError("growth.eta1", "config key 'growth.eta1' must be >= growth.eta0");
    struct Rep {
        GrowthState state;
        std::vector<GrowthEvent> log;
    };
    auto runs = parallel_map<std::optional<Rep>>(reps, [&](std::size_t i) {
        RandomStream rng(derive_seed(seed, "simulate/growth", i));
        CombTree c = sample_cpp(nu, z, eps, rng);
        MutationSet m = sample_coupled_mutations(c, std::exp(-eta0), rng);
        std::vector<GrowthEvent> log;
        GrowthState s = growth_from_coupling(nu, c, m, eta0, rng, &log);
        grow_until(s, eta1, rng, &log, max_steps);
        return std::optional<Rep>(Rep{std::move(s), std::move(log)});
    });
    std::vector<TrajectoryEvent> events;
    CsvWriter w({"replicate", "buds", "live_buds", "frozen_buds", "total_length", "highest_leaf"});
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const Rep& r = *runs[i];
        for (const auto& e : r.log) events.push_back({i, e});
        const auto sum = summarize_tree(r.state.tree);
        w.row(i, sum.buds, r.state.live_buds(), r.state.frozen.size(), sum.total_length, sum.highest_leaf);
    }
    emit(out / "growth_tree.json", to_json(runs[0]->state.tree).dump(2) + "\n");
    emit(out / "growth_tree.nwk", to_newick(runs[0]->state.tree) + "\n");
    emit(out / "trajectory.csv", trajectory_csv(events));
    emit(out / "growth_summary.csv", w.str());
    return 0;
}

double param(const std::map<std::string, double>& p, const json& cfg, const std::string& key) {
    auto it = p.find(key);
    if (it != p.end()) return it->second;
    return config_get<double>(cfg, key);
}

int analytics(const json& cfg, const std::string& formula, const std::vector<std::string>& raw) {
    std::map<std::string, double> p;
    for (const auto& kv : raw) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError(kv, "--param expects key=value, got '" + kv + "'");
        try {
            p[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        } catch (const std::exception&) {
            throw ConfigError(kv.substr(0, eq), "--param '" + kv + "' is not a number");
        }
    }
    auto get = [&](const std::string& k) { return param(p, cfg, k); };
    auto pair = [&] { return MeasurePair{config_nu(cfg), config_mu(cfg)}; };
    auto nu = [&] { return config_nu(cfg); };
    const std::map<std::string, std::function<json()>> table = {
        {"W", [&] { return json(W(nu(), get("x"))); }},
        {"W_mu", [&] { return json(W_mu(pair(), get("x"))); }},
        {"laplace_exponent", [&] { return json(laplace_exponent(pair(), get("lambda"))); }},
        {"renewal_density", [&] { return json(renewal_density(pair(), get("t"))); }},
        {"renewal_laplace_transform", [&] { return json(renewal_laplace_transform(pair(), get("lambda"))); }},
        {"expected_clonal_mass", [&] { return json(expected_clonal_mass(pair(), get("z"))); }},
        {"clonal_probability", [&] { return json(clonal_probability(pair(), get("z"))); }},
        {"tau_z_cdf", [&] { return json(tau_z_cdf(nu(), get("z"), get("eta"))); }},
        {"spectrum_density", [&] { return json(spectrum_density(pair(), get("z"), get("q"))); }},
        {"spectrum_tail", [&] { return json(spectrum_tail_mutations(pair(), get("z"), get("q"))); }},
        {"spectrum_tail_intensity", [&] { return json(spectrum_tail_intensity(pair(), get("z"), get("q"))); }},
        {"limit_spectrum_density", [&] { return json(limit_spectrum_density(pair(), get("q"))); }},
        {"limit_spectrum_tail", [&] { return json(limit_spectrum_tail(pair(), get("q"))); }},
        {"expected_total_mutations", [&] { return json(expected_total_mutations(pair(), get("z"))); }},
        {"mutation_finiteness",
         [&] { return json(mutation_finiteness(pair()) == Finiteness::finite ? "finite" : "infinite"); }},
        {"bd_survival", [&] { return json(bd_survival(get("b"), get("k"), get("t"), get("T"))); }},
        {"bd_laplace", [&] { return json(bd_laplace(get("b"), get("k"), get("t"), get("T"), get("alpha"))); }},
        {"bd_pmf",
         [&] { return json(bd_law(get("b"), get("k"), get("t"), get("T")).pmf(static_cast<std::uint64_t>(get("n")))); }},
        {"expint_e1", [&] { return json(expint_e1(get("x"))); }},
    };
    json outj;
    if (formula.empty()) {
        const double z = get("z");
        const auto pr = pair();
        const bool finite = mutation_finiteness(pr) == Finiteness::finite;
        outj = {{"z", z},
                {"W", W(pr.nu, z)},
                {"W_mu", W_mu(pr, z)},
                {"expected_clonal_mass", expected_clonal_mass(pr, z)},
                {"clonal_probability", clonal_probability(pr, z)},
                {"laplace_exponent_at_1", laplace_exponent(pr, 1.0)},
                {"mutation_finiteness", finite ? "finite" : "infinite"}};
        if (finite) outj["expected_total_mutations"] = expected_total_mutations(pr, z);
    } else {
        auto it = table.find(formula);
        if (it == table.end()) {
            std::string known;
            for (const auto& [k, _] : table) known += (known.empty() ? "" : ", ") + k;
            throw ConfigError("--formula", "unknown formula '" + formula + "' (known: " + known + ")");
        }
        outj = {{"formula", formula}, {"params", p}, {"value", it->second()}};
    }
    std::cout << outj.dump(2) << "\n";
    return 0;
}

int verify(const json& cfg, const Common& c, const std::string& suite, std::optional<double> scale) {
    find_suite(suite == "all" ? "determinism" : suite);
    SuiteOptions o;
    if (c.seed) o.seed = *c.seed;
    else o.seed = config_get<std::uint64_t>(cfg, "seed", o.seed);
    o.scale = scale ? *scale : config_get<double>(cfg, "verify.scale", 1.0);
    if (!(o.scale > 0.0)) throw ConfigError("verify.scale", "the replicate scale must be positive");
    const fs::path out = out_of(c, cfg);
    std::vector<TestReport> reps;
    auto flush = [&](bool complete) {
        cli::write_file(out / "report.json", reports_json(reps, complete, suite).dump(2) + "\n");
        cli::write_file(out / "report.csv", reports_csv(reps));
        cli::write_file(out / "runtime.json", runtime_sidecar(reps).dump(2) + "\n");
    };
    flush(false);
    std::signal(SIGINT, on_sigint);
    run_suite(
        suite, o,
        [&](const TestReport& r) {
            reps.push_back(r);
            std::cout << (r.pass() ? "PASS " : "FAIL ") << r.experiment << " (" << r.runtime_seconds << " s)\n";
            flush(false);
        },
        &g_stop);
    std::signal(SIGINT, SIG_DFL);
    const bool complete = !g_stop;
    flush(complete);
    note(out / "report.json");
    if (!complete) {
        std::cerr << "interrupted: partial report marked incomplete\n";
        return kExitInterrupted;
    }
    const bool pass = std::all_of(reps.begin(), reps.end(), [](const TestReport& r) { return r.pass(); });
    std::cout << (pass ? "all checks passed" : "some checks failed") << "\n";
    return pass ? 0 : kExitFail;
}

std::vector<double> parse_ladder(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ConfigError("--eps-ladder", "--eps-ladder entry '" + tok + "' is not a number");
        }
    }
    return out;
}

int epsilon_study_cmd(const json& cfg, const Common& c, const std::string& ladder_text, const std::string& stat,
                      std::size_t column) {
    const auto ladder = parse_ladder(ladder_text);
    json model = cfg;
    config_nu(cfg);
    config_get<double>(cfg, "z");
    model["epsilon"] = ladder.empty() ? 0.0 : ladder.back();
    Experiment e{"epsilon-study", 0, model, config_get<std::size_t>(cfg, "replicates"), seed_of(c, cfg), {}};
    auto rep = epsilon_study(e, builtin_registry(), stat, column, ladder);
    const fs::path out = out_of(c, cfg);
    emit(out / "epsilon_study.json", reports_json({rep}, true, "epsilon-study").dump(2) + "\n");
    emit(out / "epsilon_study.csv", reports_csv({rep}));
    for (const auto& ch : rep.checks) std::cout << (ch.pass ? "ok      " : "FLAGGED ") << ch.name << "\n";
    return rep.pass() ? 0 : kExitFail;
}

int plot_comb(const std::string& input, const fs::path& out) {
    auto t = comb_from_json(json::parse(cli::read_file(input)));
    auto p = comb_plot(t);
    emit(out / "comb.svg", p.svg);
    emit(out / "comb.csv", p.csv);
    return 0;
}

// Averages spectrum.csv rows per q and overlays the expected tail.
int plot_spectrum(const json& cfg, const std::string& input, const fs::path& out) {
    const MeasurePair pr{config_nu(cfg), config_mu(cfg)};
    const double z = config_get<double>(cfg, "z");
    std::istringstream in(cli::read_file(input));
    std::string line;
    std::getline(in, line);
    if (line != "q,count,T_z") throw std::invalid_argument(input + ": expected a q,count,T_z header");
    std::map<double, MeanAccumulator> acc;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string q, n;
        if (!std::getline(row, q, ',') || !std::getline(row, n, ','))
            throw std::invalid_argument(input + ": malformed row '" + line + "'");
        acc[std::stod(q)].add(std::stod(n));
    }
    if (acc.empty()) throw std::invalid_argument(input + ": no rows");
    std::vector<double> qs, emp, th;
    for (const auto& [q, a] : acc) {
        qs.push_back(q);
        emp.push_back(a.mean);
        th.push_back(spectrum_tail_mutations(pr, z, q));
    }
    auto p = spectrum_plot(qs, emp, th);
    emit(out / "spectrum.svg", p.svg);
    emit(out / "spectrum_plot.csv", p.csv);
    return 0;
}

// Samples a registry statistic under the config and overlays its exact law.
int plot_cdf(const json& cfg, std::uint64_t seed, const std::string& stat, const fs::path& out) {
    const auto nu = config_nu(cfg);
    const double z = config_get<double>(cfg, "z");
    config_get<double>(cfg, "epsilon");
    std::function<double(double)> cdf;
    if (stat == "clonal.mass") {
        const double mean = W_mu({nu, config_mu(cfg)}, z);
        cdf = [mean](double x) { return detail::exp_cdf(mean, x); };
    } else if (stat == "cpp.T_z") {
        const double mean = W(nu, z);
        cdf = [mean](double x) { return detail::exp_cdf(mean, x); };
    } else {
        throw ConfigError("--statistic", "plot cdf supports clonal.mass and cpp.T_z, not '" + stat + "'");
    }
    Experiment e{"plot-cdf", 0, cfg, config_get<std::size_t>(cfg, "replicates"), seed, {}};
    std::vector<double> xs;
    for (const auto& r : sample_records(e, builtin_registry(), stat))
        if (!r.empty()) xs.push_back(r[0]);
    auto p = cdf_plot(xs, cdf, 200, stat);
    emit(out / "cdf.svg", p.svg);
    emit(out / "cdf.csv", p.csv);
    return 0;
}

void add_common(CLI::App* app, Common& c, bool seed = true) {
    app->add_option("--config", c.config, "TOML run configuration");
    if (seed) app->add_option("--seed", c.seed, "master seed (overrides the config)");
    app->add_option("--out", c.out, "output directory (overrides the config)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cpplab: coalescent point processes with neutral mutations"};
    app.require_subcommand(1);
    Common c;
    int rc = 0;

    auto* sim = app.add_subcommand("simulate", "sample trees and write JSON, Newick and CSV");
    std::string kind;
    sim->add_option("kind", kind, "cpp | bd | growth")->required()->check(CLI::IsMember({"cpp", "bd", "growth"}));
    add_common(sim, c);

    auto* an = app.add_subcommand("analytics", "evaluate a closed-form quantity and print JSON");
    std::string formula;
    std::vector<std::string> params;
    an->add_option("--formula", formula, "quantity to evaluate (default: a summary at z)");
    an->add_option("--param", params, "key=value, overrides config entries")->take_all();
    an->add_option("--config", c.config, "TOML run configuration");

    auto* ver = app.add_subcommand("verify", "run a verification suite; exit 0 iff every check passes");
    std::string suite;
    std::optional<double> scale;
    ver->add_option("--suite", suite, "suite name or 'all'")->required();
    ver->add_option("--scale", scale, "replicate multiplier (overrides verify.scale)");
    add_common(ver, c);

    auto* pl = app.add_subcommand("plot", "write an SVG and its companion CSV");
    std::string style, input, stat = "clonal.mass";
    pl->add_option("style", style, "comb | spectrum | cdf")->required()->check(CLI::IsMember({"comb", "spectrum", "cdf"}));
    pl->add_option("--input", input, "tree.json for comb, spectrum.csv for spectrum");
    pl->add_option("--statistic", stat, "statistic for cdf: clonal.mass or cpp.T_z");
    add_common(pl, c);

    auto* es = app.add_subcommand("epsilon-study", "drift of a statistic along a decreasing epsilon ladder");
    std::string ladder;
    std::string es_stat = "clonal.mass";
    std::size_t column = 0;
    es->add_option("--eps-ladder", ladder, "comma separated, strictly decreasing")->required();
    es->add_option("--statistic", es_stat, "registered statistic");
    es->add_option("--column", column, "record column");
    add_common(es, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (sim->parsed()) {
            json cfg = read_config(c, true);
            const auto seed = seed_of(c, cfg);
            const auto out = out_of(c, cfg);
            rc = kind == "cpp" ? simulate_cpp(cfg, seed, out) : kind == "bd" ? simulate_bd(cfg, seed, out) : simulate_growth(cfg, seed, out);
        } else if (an->parsed()) {
            rc = analytics(read_config(c, false), formula, params);
        } else if (ver->parsed()) {
            rc = verify(read_config(c, false), c, suite, scale);
        } else if (pl->parsed()) {
            if (style == "comb") {
                if (input.empty()) throw ConfigError("--input", "plot comb needs --input tree.json");
                json cfg = read_config(c, false);
                rc = plot_comb(input, out_of(c, cfg));
            } else if (style == "spectrum") {
                if (input.empty()) throw ConfigError("--input", "plot spectrum needs --input spectrum.csv");
                json cfg = read_config(c, true);
                rc = plot_spectrum(cfg, input, out_of(c, cfg));
            } else {
                json cfg = read_config(c, true);
                rc = plot_cdf(cfg, seed_of(c, cfg), stat, out_of(c, cfg));
            }
        } else if (es->parsed()) {
            rc = epsilon_study_cmd(read_config(c, true), c, ladder, es_stat, column);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFail;
    }
    return rc;
}
