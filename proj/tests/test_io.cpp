#include <gtest/gtest.h>

#include <regex>

#include "cpplab/config.hpp"
#include "cpplab/io.hpp"
#include "cpplab/plot.hpp"

using namespace cpplab;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST(Io, CombRoundTripIsExact) {
    RandomStream rng(1);
    for (int r = 0; r < 20; ++r) {
        CombTree t = sample_cpp(IntensityMeasure::brownian(), 1.0, 1e-3, rng);
        auto text = to_json(t).dump();
        EXPECT_EQ(comb_from_json(nlohmann::json::parse(text)), t);
    }
    auto j = to_json(CombTree{2.0, 1.5, 0.1, {{0.5, 0.3}}});
    EXPECT_EQ(j.dump(), R"({"T_z":1.5,"atoms":[[0.5,0.3]],"epsilon":0.1,"z":2.0})");
    j["atoms"][0] = {0.5};
    EXPECT_THROW(comb_from_json(j), std::invalid_argument);
    EXPECT_THROW(comb_from_json(nlohmann::json::parse(R"({"z":1,"T_z":1,"atoms":[]})")), nlohmann::json::exception);
}

TEST(Io, MutationAndTreeRoundTrips) {
    RandomStream rng(2);
    CombTree t = sample_cpp(IntensityMeasure::brownian(), 1.0, 1e-2, rng);
    MutationSet m = sample_coupled_mutations(t, 3.0, rng);
    EXPECT_EQ(mutations_from_json(nlohmann::json::parse(to_json(m).dump())), m);
    SimpleTree s = to_simple_tree(t);
    SimpleTree back = simple_tree_from_json(nlohmann::json::parse(to_json(s).dump()));
    EXPECT_EQ(to_json(back), to_json(s));
    EXPECT_EQ(to_newick(back), to_newick(s));

    BDTree bd = simulate_bd(RateMeasure::constant(1.0), RateMeasure::constant(0.3), 0.0, 2.0, rng);
    BDTree bd2 = bd_tree_from_json(nlohmann::json::parse(to_json(bd).dump()));
    EXPECT_EQ(to_json(bd2), to_json(bd));
    EXPECT_EQ(bd2.alive_at_horizon(), bd.alive_at_horizon());
}

TEST(Io, NewickCarriesLengthsAndMasses) {
    SimpleTree t;
    t.reversed = true;
    t.nodes[""] = {1.0, 0.5, std::nullopt, false};
    t.nodes["0"] = {0.5, 0.0, 0.25, false};
    t.nodes["1"] = {0.5, 0.0, std::nullopt, true};
    const auto nw = to_newick(t);
    EXPECT_EQ(count(nw, "("), 1u);
    EXPECT_NE(nw.find("mass=0.25"), std::string::npos);
    EXPECT_NE(nw.find("censored=1"), std::string::npos);
    EXPECT_NE(nw.find(":0.5"), std::string::npos);
    EXPECT_EQ(nw.back(), ';');
}

TEST(Io, CsvExports) {
    AllelicPartition p;
    p.clusters = {{kRootClone, 0.5}, {3, 0.25}};
    EXPECT_EQ(partition_csv({p, p}), "replicate,cluster_id,mass\n0,root-clone,0.5\n0,m3,0.25\n1,root-clone,0.5\n1,m3,0.25\n");
    EXPECT_EQ(spectrum_csv({{0.1, 2, 1.5}}), "q,count,T_z\n0.10000000000000001,2,1.5\n");
    EXPECT_EQ(trajectory_csv({{0, {0.5, "graft", "01", 2}}, {1, {0.75, "freeze", "", 0}}}),
              "replicate,eta,event,bud_label,new_buds\n0,0.5,graft,01,2\n1,0.75,freeze,root,0\n");
    CsvWriter w({"a", "b"});
    EXPECT_THROW(w.row(1), std::invalid_argument);
    EXPECT_THROW(w.row("x,y", 2), std::invalid_argument);
}

TEST(Io, ReportsAndSidecar) {
    TestReport r;
    r.experiment = "e";
    r.criterion = 3;
    r.seed = 9;
    r.replicates = 100;
    r.config_hash = "00ff";
    r.runtime_seconds = 1.5;
    r.checks.push_back({"c, one", "ks", 0.1, 0.2, 0.05, 0.4, true});
    r.checks.push_back({"m", "mean", 1.0, 1.0, 0.0, 0.3, true});
    auto j = reports_json({r}, true, "s");
    EXPECT_TRUE(j["complete"].get<bool>());
    EXPECT_TRUE(j["pass"].get<bool>());
    EXPECT_EQ(j["suite"], "s");
    EXPECT_EQ(j.dump().find("runtime"), std::string::npos);
    EXPECT_FALSE(reports_json({r}, false)["pass"].get<bool>());
    auto csv = reports_csv({r});
    EXPECT_EQ(count(csv, "\n"), 3u);
    EXPECT_NE(csv.find("c; one"), std::string::npos);
    EXPECT_EQ(runtime_sidecar({r})["e"], 1.5);
}

TEST(Config, ParsesMeasures) {
    auto cfg = parse_config(R"(
seed = 42
z = 1.0
nu = { family = "power", a = 0.5, c = 2.0 }
mu = { family = "uniform", theta = 1.0 }
[bd]
beta = { family = "constant", rate = 1.0 }
kappa = { family = "zero" }
)");
    EXPECT_EQ(config_get<std::uint64_t>(cfg, "seed"), 42u);
    EXPECT_DOUBLE_EQ(config_get<double>(cfg, "z"), 1.0);
    EXPECT_DOUBLE_EQ(config_get<double>(cfg, "epsilon", 1e-3), 1e-3);
    EXPECT_NEAR(config_nu(cfg).tail(4.0), 2.0 * std::pow(4.0, -0.5), 1e-12);
    EXPECT_DOUBLE_EQ(config_mu(cfg).cum(0.5), 0.5);
    EXPECT_EQ(*config_rate(cfg, "bd.beta").constant_rate(), 1.0);
    EXPECT_TRUE(config_rate(cfg, "bd.kappa").is_zero());
}

TEST(Config, ErrorsNameTheKey) {
    auto cfg = parse_config("z = 1.0\nnu = { a = 0.5 }\nmu = { family = \"uniform\" }\n");
    try {
        config_get<double>(cfg, "epsilon");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key, "epsilon");
        EXPECT_NE(std::string(e.what()).find("'epsilon'"), std::string::npos);
    }
    try {
        config_nu(cfg);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key, "nu.family");
    }
    EXPECT_THROW(config_mu(cfg), ConfigError);
    EXPECT_THROW(config_get<std::string>(cfg, "z"), ConfigError);
    EXPECT_THROW(config_get<double>(cfg, "bd.horizon"), ConfigError);
    EXPECT_THROW(parse_config("z = = 1"), std::invalid_argument);
}

TEST(Plot, CombHasOneToothPerAtom) {
    CombTree t{1.0, 2.0, 1e-3, {}};
    for (int i = 1; i <= 10; ++i) t.atoms.push_back({0.18 * i, 0.09 * i});
    auto p = comb_plot(t);
    EXPECT_EQ(count(p.svg, "class=\"tooth\""), 10u);
    EXPECT_EQ(count(p.svg, "class=\"origin\""), 1u);
    EXPECT_EQ(count(p.csv, "\n"), 12u);
    auto empty = comb_plot(CombTree{1.0, 0.5, 1e-3, {}});
    EXPECT_EQ(count(empty.svg, "class=\"tooth\""), 0u);
    EXPECT_EQ(count(empty.svg, "class=\"origin\""), 1u);
    EXPECT_EQ(empty.svg.rfind("</svg>"), empty.svg.size() - 7);
}

TEST(Plot, OverlaysAndCompanionCsv) {
    auto s = spectrum_plot({0.1, 0.2, 0.4}, {3, 2, 1}, {3.1, 1.9, 1.1});
    EXPECT_EQ(count(s.svg, "<polyline"), 2u);
    EXPECT_EQ(s.csv.substr(0, s.csv.find('\n')), "q,empirical,expected");
    EXPECT_THROW(spectrum_plot({0.1}, {1, 2}, {1}), std::invalid_argument);
    auto c = cdf_plot({0.1, 0.5, 0.9, std::nan("")}, [](double x) { return std::clamp(x, 0.0, 1.0); }, 50);
    EXPECT_EQ(count(c.csv, "\n"), 51u);
    EXPECT_NE(c.csv.find("\n0.90000000000000002,1,0.90000000000000002\n"), std::string::npos);
    EXPECT_THROW(cdf_plot({}, [](double) { return 0.0; }), std::invalid_argument);
}
