#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "cpplab/cpp_sim.hpp"
#include "cpplab/stats.hpp"

using namespace cpplab;

namespace {

CombTree hand_tree() {
    CombTree t;
    t.z = 1.0;
    t.T_z = 3.0;
    t.epsilon = 0.01;
    t.atoms = {{1.0, 0.5}, {2.0, 0.8}};
    return t;
}

// height below which the two root paths coincide, read off the lineages
double divergence_height(const Lineage& a, const Lineage& b) {
    std::size_t i = 0;
    while (i < a.segments.size() && i < b.segments.size()) {
        const auto &sa = a.segments[i], &sb = b.segments[i];
        if (sa.branch != sb.branch) return a.segments[i - 1].x_lo;
        if (sa.x_lo != sb.x_lo) return std::max(sa.x_lo, sb.x_lo);
        ++i;
    }
    return 0.0;
}

}  // namespace

TEST(CppSim, TzIsExponentialWithMeanW) {
    auto nu = IntensityMeasure::brownian();
    RandomStream rng(101);
    std::vector<double> ts;
    for (int i = 0; i < 10000; ++i) ts.push_back(sample_cpp(nu, 1.0, 0.05, rng).T_z);
    auto acc = summarize(ts);
    EXPECT_TRUE(mean_check(acc.mean, acc.se(), 1.0).pass) << acc.mean << " +- " << acc.se();
    auto ks = ks_test(ts, [](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-x); });
    EXPECT_GT(ks.p_value, 0.01);
}

TEST(CppSim, AtomIntensityPerUnitLength) {
    auto nu = IntensityMeasure::brownian();
    RandomStream rng(5);
    std::vector<double> counts, lengths;
    for (int i = 0; i < 4000; ++i) {
        auto t = sample_cpp(nu, 1.0, 0.1, rng);
        counts.push_back(static_cast<double>(t.atoms.size()));
        lengths.push_back(t.T_z);
    }
    auto r = ratio_of_means(counts, lengths);
    EXPECT_TRUE(mean_check(r.ratio, r.se, 9.0).pass) << r.ratio << " +- " << r.se;
}

TEST(CppSim, ConsecutiveDepthTail) {
    auto nu = IntensityMeasure::brownian();
    const double eps = 1e-3, z = 1.0;
    RandomStream rng(17);
    std::vector<double> hs;
    while (hs.size() < 20000) {
        auto t = sample_cpp(nu, z, eps, rng);
        for (const auto& a : t.atoms) hs.push_back(a.x);
    }
    // law of nu on [eps, z): (eps/x - eps/z)/(1 - eps/z) above x
    auto ks = ks_test(hs, [&](double x) { return x < eps ? 0.0 : 1.0 - (eps / x - eps / z) / (1.0 - eps / z); });
    EXPECT_GT(ks.p_value, 0.01);
}

TEST(CppSim, EpsilonNearZGivesNoAtoms) {
    auto nu = IntensityMeasure::brownian();
    RandomStream rng(1);
    for (int i = 0; i < 200; ++i) EXPECT_TRUE(sample_cpp(nu, 1.0, 1.0 - 1e-12, rng).atoms.empty());
    EXPECT_THROW(sample_cpp(nu, 1.0, 1.0, rng), std::invalid_argument);
}

TEST(CppSim, SampledTreesAreValid) {
    auto nu = IntensityMeasure::power(0.5, 2.0);
    RandomStream rng(9);
    for (int i = 0; i < 200; ++i) EXPECT_NO_THROW(sample_cpp(nu, 1.0, 1e-3, rng).validate());
}

TEST(CppSim, LineageBeforeFirstAtom) {
    auto t = hand_tree();
    auto l = lineage(t, 0.5);
    ASSERT_EQ(l.segments.size(), 1u);
    EXPECT_EQ(l.segments[0].branch, kOriginBranch);
    EXPECT_DOUBLE_EQ(l.segments[0].x_hi, 1.0);
    EXPECT_DOUBLE_EQ(l.segments[0].x_lo, 0.0);
}

TEST(CppSim, LineageLadderHandExample) {
    auto t = hand_tree();
    auto l = lineage(t, 2.5);
    ASSERT_EQ(l.segments.size(), 2u);
    EXPECT_EQ(l.segments[0].branch, kOriginBranch);
    EXPECT_DOUBLE_EQ(l.segments[0].x_hi, 1.0);
    EXPECT_DOUBLE_EQ(l.segments[0].x_lo, 0.8);
    EXPECT_EQ(l.segments[1].branch, 1);
    EXPECT_DOUBLE_EQ(l.segments[1].t, 2.0);
    EXPECT_DOUBLE_EQ(l.segments[1].x_hi, 0.8);
    EXPECT_DOUBLE_EQ(l.segments[1].x_lo, 0.0);
    // a point at an atom time hangs below that atom
    auto l2 = lineage(t, 1.0);
    ASSERT_EQ(l2.segments.size(), 2u);
    EXPECT_EQ(l2.segments[1].branch, 0);
    EXPECT_THROW(lineage(t, 3.0), std::out_of_range);
}

TEST(CppSim, LineageSegmentsTileHeights) {
    auto nu = IntensityMeasure::brownian();
    RandomStream rng(23);
    for (int rep = 0; rep < 50; ++rep) {
        auto t = sample_cpp(nu, 1.0, 0.01, rng);
        for (int k = 0; k < 20; ++k) {
            auto l = lineage(t, rng.uniform() * t.T_z);
            EXPECT_EQ(l.segments.front().x_hi, t.z);
            EXPECT_EQ(l.segments.back().x_lo, 0.0);
            for (std::size_t i = 1; i < l.segments.size(); ++i) {
                EXPECT_EQ(l.segments[i].x_hi, l.segments[i - 1].x_lo);
                EXPECT_LT(l.segments[i].x_lo, l.segments[i].x_hi);
                EXPECT_GT(l.segments[i].t, l.segments[i - 1].t);
            }
        }
    }
}

TEST(CppSim, LineageDistanceIsTwiceMaxBetween) {
    auto nu = IntensityMeasure::brownian();
    RandomStream rng(29);
    for (int rep = 0; rep < 100; ++rep) {
        auto t = sample_cpp(nu, 1.0, 0.01, rng);
        double s = rng.uniform() * t.T_z, u = rng.uniform() * t.T_z;
        if (s > u) std::swap(s, u);
        double mx = 0.0;
        for (const auto& a : t.atoms)
            if (a.t > s && a.t <= u) mx = std::max(mx, a.x);
        EXPECT_DOUBLE_EQ(2.0 * divergence_height(lineage(t, s), lineage(t, u)), 2.0 * mx);
    }
}

TEST(CppSim, ToSimpleTreeEmptyAndSingleAtom) {
    CombTree t{1.0, 2.5, 0.01, {}};
    auto s = to_simple_tree(t);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_DOUBLE_EQ(s.at("").alpha, 1.0);
    EXPECT_DOUBLE_EQ(s.at("").omega, 0.0);
    EXPECT_DOUBLE_EQ(*s.at("").leaf_mass, 2.5);
    t.atoms = {{0.7, 0.4}};
    s = to_simple_tree(t);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_DOUBLE_EQ(s.at("").omega, 0.4);
    EXPECT_DOUBLE_EQ(*s.at("0").leaf_mass, 0.7);
    EXPECT_DOUBLE_EQ(*s.at("1").leaf_mass, 1.8);
}

TEST(CppSim, ToSimpleTreeBranchPointsAreAtomsAndMassesSum) {
    auto nu = IntensityMeasure::brownian();
    RandomStream rng(31);
    for (int rep = 0; rep < 30; ++rep) {
        auto t = sample_cpp(nu, 1.0, 1e-3, rng);
        auto s = to_simple_tree(t);
        s.validate();
        std::multiset<double> internal, atoms;
        double mass = 0.0;
        for (const auto& [u, n] : s.nodes) {
            if (s.is_leaf(u)) mass += *n.leaf_mass;
            else internal.insert(n.omega);
        }
        for (const auto& a : t.atoms) atoms.insert(a.x);
        EXPECT_EQ(internal, atoms);
        EXPECT_NEAR(mass, t.T_z, 1e-12 * t.T_z);
        EXPECT_TRUE(s.buds().empty());
    }
}

TEST(CppSim, UltrametricTriples) {
    auto nu = IntensityMeasure::brownian();
    RandomStream rng(37);
    auto t = sample_cpp(nu, 1.0, 1e-2, rng);
    auto s = to_simple_tree(t);
    auto leaves = s.leaves();
    ASSERT_GE(leaves.size(), 3u);
    auto dist = [&](const Label& a, const Label& b) {
        std::size_t k = 0;
        while (k < a.size() && k < b.size() && a[k] == b[k]) ++k;
        return 2.0 * s.at(a.substr(0, k)).omega;
    };
    for (int k = 0; k < 500; ++k) {
        auto pick = [&] { return leaves[static_cast<std::size_t>(rng.uniform() * leaves.size())]; };
        Label a = pick(), b = pick(), c = pick();
        if (a == b || b == c || a == c) continue;
        std::vector<double> d{dist(a, b), dist(b, c), dist(a, c)};
        std::sort(d.begin(), d.end());
        EXPECT_EQ(d[1], d[2]);
    }
}

TEST(CppSim, SimpleTreeRoundTrip) {
    auto nu = IntensityMeasure::brownian();
    RandomStream rng(41);
    for (int rep = 0; rep < 20; ++rep) {
        auto t = sample_cpp(nu, 1.0, 1e-2, rng);
        auto back = comb_from_simple_tree(to_simple_tree(t), t.epsilon);
        ASSERT_EQ(back.atoms.size(), t.atoms.size());
        EXPECT_NEAR(back.T_z, t.T_z, 1e-12 * t.T_z);
        for (std::size_t i = 0; i < t.atoms.size(); ++i) {
            EXPECT_NEAR(back.atoms[i].t, t.atoms[i].t, 1e-12 * t.T_z);
            EXPECT_EQ(back.atoms[i].x, t.atoms[i].x);
        }
    }
}

TEST(CppSim, CombIndexQueries) {
    auto nu = IntensityMeasure::brownian();
    RandomStream rng(43);
    auto t = sample_cpp(nu, 1.0, 1e-2, rng);
    CombIndex idx(t);
    const std::size_t n = t.atoms.size();
    ASSERT_GT(n, 10u);
    for (int k = 0; k < 300; ++k) {
        std::size_t l = static_cast<std::size_t>(rng.uniform() * n), r = l + 1 + static_cast<std::size_t>(rng.uniform() * (n - l));
        std::size_t want = l;
        for (std::size_t i = l; i < r; ++i)
            if (t.atoms[i].x > t.atoms[want].x) want = i;
        EXPECT_EQ(idx.argmax(l, r), want);
        double y = rng.uniform();
        std::size_t j = l;
        while (j < n && t.atoms[j].x < y) ++j;
        EXPECT_EQ(idx.first_at_least(l, y), j);
    }
}

TEST(CppSim, WindowSamplerAndCoarsen) {
    auto nu = IntensityMeasure::brownian();
    RandomStream rng(47);
    auto w = sample_comb_window(nu, 2.0, 1e-2, rng);
    EXPECT_DOUBLE_EQ(w.T_z, 2.0);
    w.validate();
    std::vector<long> remap;
    auto c = coarsen(w, 0.1, &remap);
    c.validate();
    for (std::size_t i = 0; i < w.atoms.size(); ++i) {
        if (w.atoms[i].x >= 0.1) EXPECT_EQ(c.atoms[static_cast<std::size_t>(remap[i])], w.atoms[i]);
        else EXPECT_EQ(remap[i], -2);
    }
    EXPECT_THROW(coarsen(w, 1e-3), std::invalid_argument);
}
