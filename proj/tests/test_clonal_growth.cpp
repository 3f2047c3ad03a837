#include <gtest/gtest.h>

#include <set>

#include "cpplab/analytics.hpp"
#include "cpplab/clonal_growth.hpp"
#include "cpplab/stats.hpp"

using namespace cpplab;

namespace {

std::set<Label> labels(const SimpleTree& t) {
    std::set<Label> s;
    for (const auto& [u, n] : t.nodes) s.insert(u);
    return s;
}

double exp_cdf(double rate, double x) { return x <= 0.0 ? 0.0 : -std::expm1(-rate * x); }

SimpleTree buds_tree(int m) {
    // comb-shaped reversed tree with m buds at height 0.5
    SimpleTree t;
    t.reversed = true;
    Label u;
    double h = 1.0;
    for (int i = 1; i < m; ++i) {
        t.nodes[u] = {h, h - 0.1, std::nullopt, false};
        t.nodes[u + "1"] = {h - 0.1, 0.5, std::nullopt, false};
        h -= 0.1;
        u += "0";
    }
    t.nodes[u] = {h, 0.5, std::nullopt, false};
    return t;
}

}  // namespace

TEST(ClonalGrowth, LevelZeroIsTheWholeTree) {
    RandomStream rng(1);
    auto c = sample_cpp(IntensityMeasure::brownian(), 1.0, 0.05, rng);
    auto m = sample_coupled_mutations(c, 2.0, rng);
    EXPECT_TRUE(clonal_subtree_at_level(c, m, 0.0) == to_simple_tree(c));
    EXPECT_THROW(clonal_subtree_at_level(c, m, 2.5), std::invalid_argument);
}

TEST(ClonalGrowth, OriginMarkGivesASingleBranch) {
    CombTree c{1.0, 2.0, 0.01, {{0.5, 0.3}, {1.5, 0.6}}};
    MutationSet m;
    m.coupled = true;
    m.theta_max = 1.0;
    m.marks = {{kOriginBranch, 0.0, 0.8, 1.0}};
    auto t = clonal_subtree_at_level(c, m, 1.0);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t.at("").alpha, 1.0);
    EXPECT_EQ(t.at("").omega, 0.8);
    EXPECT_TRUE(t.is_bud(""));
    EXPECT_EQ(clonal_subtree_at_level(c, m, 0.5).size(), 5u);
}

TEST(ClonalGrowth, CutsAtTheHighestMarkOfEachSegment) {
    CombTree c{1.0, 2.0, 0.01, {{0.5, 0.3}, {1.5, 0.6}}};
    MutationSet m;
    m.marks = {{1, 1.5, 0.2, 0.0}, {1, 1.5, 0.4, 0.0}, {kOriginBranch, 0.0, 0.5, 0.0}};
    auto t = clonal_subtree_at_level(c, m, 0.0);
    // origin splits at 0.6 into "0" (origin, cut at 0.5) and "1" (branch 1, cut at 0.4)
    ASSERT_EQ(t.size(), 3u);
    EXPECT_EQ(t.at("0").omega, 0.5);
    EXPECT_EQ(t.at("1").omega, 0.4);
    EXPECT_EQ(t.buds().size(), 2u);
}

TEST(ClonalGrowth, SubtreesShrinkWithLevel) {
    RandomStream rng(2);
    for (int r = 0; r < 50; ++r) {
        auto c = sample_cpp(IntensityMeasure::brownian(), 1.0, 0.02, rng);
        auto m = sample_coupled_mutations(c, 3.0, rng);
        std::set<Label> prev = labels(clonal_subtree_at_level(c, m, 0.0));
        for (double th : {0.5, 1.0, 2.0, 3.0}) {
            auto t = clonal_subtree_at_level(c, m, th);
            EXPECT_NO_THROW(t.validate());
            auto cur = labels(t);
            EXPECT_TRUE(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
            prev = cur;
        }
    }
}

TEST(ClonalGrowth, SingleBudWaitsExp1) {
    RandomStream rng(3);
    auto nu = IntensityMeasure::brownian();
    std::vector<double> jumps;
    for (int i = 0; i < 10000; ++i) {
        auto s = make_growth_state(nu, buds_tree(1), 0.0, 0.01, rng);
        ASSERT_EQ(s.live_buds(), 1u);
        grow_step(s, rng);
        jumps.push_back(s.eta);
    }
    EXPECT_GT(ks_test(jumps, [](double x) { return exp_cdf(1.0, x); }).p_value, 0.01);
}

TEST(ClonalGrowth, FirstJumpOfMBudsIsExpM) {
    RandomStream rng(4);
    auto nu = IntensityMeasure::brownian();
    std::vector<double> jumps;
    for (int i = 0; i < 5000; ++i) {
        auto s = make_growth_state(nu, buds_tree(4), 0.0, 0.01, rng);
        ASSERT_EQ(s.live_buds(), 4u);
        grow_step(s, rng);
        jumps.push_back(s.eta);
    }
    EXPECT_GT(ks_test(jumps, [](double x) { return exp_cdf(4.0, x); }).p_value, 0.01);
}

TEST(ClonalGrowth, GraftsStayBelowTheBud) {
    RandomStream rng(5);
    auto nu = IntensityMeasure::power(0.5, 1.0);
    for (int i = 0; i < 500; ++i) {
        auto y = sample_clonal_tree(nu, 0.7, 2.0, 0.01, rng);
        EXPECT_EQ(y.at("").alpha, 0.7);
        for (const auto& [u, n] : y.nodes) EXPECT_LE(n.omega, 0.7);
    }
}

TEST(ClonalGrowth, StatesStayValidAndLogged) {
    RandomStream rng(6);
    auto nu = IntensityMeasure::brownian();
    auto c = sample_cpp(nu, 1.0, 0.02, rng);
    auto m = sample_coupled_mutations(c, 4.0, rng);
    std::vector<GrowthEvent> log;
    auto s = growth_from_coupling(nu, c, m, -std::log(4.0), rng, &log);
    EXPECT_NO_THROW(s.validate());
    auto before = labels(s.tree);
    grow_until(s, 0.5, rng, &log);
    EXPECT_EQ(s.eta, 0.5);
    EXPECT_NO_THROW(s.validate());
    auto after = labels(s.tree);
    EXPECT_TRUE(std::includes(after.begin(), after.end(), before.begin(), before.end()));
    double last = -kInf;
    for (const auto& e : log) {
        EXPECT_GE(e.eta, last);
        last = e.eta;
        EXPECT_TRUE(e.event == "graft" || e.event == "freeze");
    }
    EXPECT_THROW(grow_until(s, 0.0, rng), std::invalid_argument);
    GrowthState dead = make_growth_state(nu, to_simple_tree(c), 0.0, 0.02, rng);
    EXPECT_THROW(grow_step(dead, rng), std::logic_error);
}

TEST(ClonalGrowth, LowBudsAreFrozen) {
    RandomStream rng(7);
    std::vector<GrowthEvent> log;
    auto s = make_growth_state(IntensityMeasure::brownian(), buds_tree(2), 0.0, 0.6, rng, &log);
    EXPECT_EQ(s.live_buds(), 0u);
    EXPECT_EQ(s.frozen.size(), 2u);
    EXPECT_EQ(log.size(), 2u);
    EXPECT_NO_THROW(s.validate());
}

TEST(ClonalGrowth, GrowthMatchesDirectThinning) {
    RandomStream rng(8);
    auto nu = IntensityMeasure::brownian();
    const double z = 1.0, eps = 0.05, eta0 = -std::log(3.0), eta1 = 0.0;
    std::vector<double> gb, gl, gh, db, dl, dh;
    for (int i = 0; i < 10000; ++i) {
        auto c = sample_cpp(nu, z, eps, rng);
        auto m = sample_coupled_mutations(c, 3.0, rng);
        auto s = growth_from_coupling(nu, c, m, eta0, rng);
        grow_until(s, eta1, rng);
        auto g = summarize_tree(s.tree);
        gb.push_back(static_cast<double>(g.buds));
        gl.push_back(g.total_length);
        gh.push_back(g.highest_leaf);
        auto c2 = sample_cpp(nu, z, eps, rng);
        auto m2 = sample_coupled_mutations(c2, 1.0, rng);
        auto d = summarize_tree(clonal_subtree_at_level(c2, m2, std::exp(-eta1)));
        db.push_back(static_cast<double>(d.buds));
        dl.push_back(d.total_length);
        dh.push_back(d.highest_leaf);
    }
    EXPECT_GT(ks_two_sample(gl, dl).p_value, 0.01);
    EXPECT_GT(ks_two_sample(gh, dh).p_value, 0.01);
    std::vector<double> hg(8, 0.0), hd(8, 0.0);
    for (double v : gb) hg[std::min<std::size_t>(static_cast<std::size_t>(v), 7)] += 1;
    for (double v : db) hd[std::min<std::size_t>(static_cast<std::size_t>(v), 7)] += 1;
    EXPECT_GT(chi_square_two_sample(hg, hd).p_value, 0.01);
}

TEST(ClonalGrowth, TauHandCases) {
    CombTree one{1.0, 1.0, 0.01, {}};
    MutationSet m;
    m.coupled = true;
    m.theta_max = 2.0;
    auto none = tau_z_from_coupling(one, m);
    EXPECT_TRUE(none.censored);
    EXPECT_DOUBLE_EQ(none.tau, -std::log(2.0));
    m.marks = {{kOriginBranch, 0.0, 0.4, 0.7}, {kOriginBranch, 0.0, 0.9, 0.3}};
    auto t = tau_z_from_coupling(one, m);
    EXPECT_FALSE(t.censored);
    EXPECT_DOUBLE_EQ(t.tau, -std::log(0.3));
    // two lineages: the one with the larger minimal level decides
    CombTree two{1.0, 2.0, 0.01, {{1.0, 0.5}}};
    m.marks = {{kOriginBranch, 0.0, 0.9, 1.5}, {kOriginBranch, 0.0, 0.2, 0.4}, {0, 1.0, 0.3, 1.2}};
    auto u = tau_z_from_coupling(two, m);
    EXPECT_FALSE(u.censored);
    EXPECT_DOUBLE_EQ(u.tau, -std::log(1.2));
}

TEST(ClonalGrowth, TauMatchesClonalExistence) {
    RandomStream rng(9);
    for (int r = 0; r < 200; ++r) {
        auto c = sample_cpp(IntensityMeasure::brownian(), 1.0, 0.02, rng);
        auto m = sample_coupled_mutations(c, 3.0, rng);
        auto t = tau_z_from_coupling(c, m);
        for (double eta : {-1.0, -0.3, 0.0, 0.4, 1.0}) {
            if (t.censored) continue;
            bool exists = clonal_existence(c, restrict_level(m, std::exp(-eta)), std::exp(-eta));
            EXPECT_EQ(exists, t.tau < eta) << eta << " " << t.tau;
        }
    }
}

TEST(ClonalGrowth, TauDistribution) {
    RandomStream rng(10);
    const double eps = 1e-3, z = 1.0;
    std::vector<double> taus;
    for (int r = 0; r < 3000; ++r) {
        auto c = sample_cpp(IntensityMeasure::brownian(), z, eps, rng);
        auto m = sample_coupled_mutations(c, std::exp(3.0), rng);
        taus.push_back(tau_z_from_coupling(c, m).tau);
    }
    // exact law at the floor: W_eps(x) = eps + (1 - e^{-theta (x - eps)}) / theta
    auto cdf = [&](double eta) {
        double th = std::exp(-eta), w = eps + -std::expm1(-th * (z - eps)) / th;
        return std::exp(-th * (z - eps)) / w;
    };
    EXPECT_GT(ks_test(taus, cdf).p_value, 0.01);
    EXPECT_NEAR(tau_z_cdf(IntensityMeasure::brownian(), 1.0, 0.0), 1.0 / (std::exp(1.0) - 1.0), 1e-9);
}
