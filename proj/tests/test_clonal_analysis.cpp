#include <gtest/gtest.h>

#include <map>

#include "cpplab/clonal_analysis.hpp"
#include "cpplab/stats.hpp"

using namespace cpplab;

namespace {

// Closed forms for the floor-truncated Brownian model the sampler realizes at
// floor eps: nu tail 1/max(x, eps), marks with Lebesgue intensity theta above eps.
double wmu_floor(double x, double theta, double eps) {
    if (x <= eps) return eps;
    return eps + (theta == 0.0 ? x - eps : (1.0 - std::exp(-theta * (x - eps))) / theta);
}

// per-point oracle: walk the lineage and pick the lowest active mark on it
struct PointVerdict {
    bool clonal;
    int mark;
};

PointVerdict scan_point(const CombTree& t, const MutationSet& m, double theta, bool include_origin, double s) {
    auto l = lineage(t, s);
    int best = -1;
    for (std::size_t i = 0; i < m.marks.size(); ++i) {
        const Mark& k = m.marks[i];
        if (k.level > theta || (!include_origin && k.branch == kOriginBranch)) continue;
        for (const auto& seg : l.segments)
            if (seg.branch == k.branch && k.y > seg.x_lo && k.y <= seg.x_hi) {
                if (best < 0) {
                    best = static_cast<int>(i);
                } else {
                    const Mark& b = m.marks[static_cast<std::size_t>(best)];
                    if (k.y < b.y || (k.y == b.y && k.level > b.level)) best = static_cast<int>(i);
                }
            }
    }
    return {best < 0, best};
}

std::pair<CombTree, MutationSet> sample_pair(double z, double eps, double theta_max, RandomStream& rng) {
    auto t = sample_cpp(IntensityMeasure::brownian(), z, eps, rng);
    auto m = sample_coupled_mutations(t, theta_max, rng);
    return {std::move(t), std::move(m)};
}

}  // namespace

TEST(ClonalAnalysis, EmptyMarksGiveWholeBoundary) {
    RandomStream rng(1);
    auto t = sample_cpp(IntensityMeasure::brownian(), 1.0, 1e-2, rng);
    MutationSet none;
    auto r = clonal_set(t, none, 1.0);
    ASSERT_EQ(r.intervals.size(), 1u);
    EXPECT_EQ(r.intervals[0], (Interval{0.0, t.T_z}));
    auto p = allelic_partition(t, none, 1.0);
    ASSERT_EQ(p.clusters.size(), 1u);
    EXPECT_EQ(p.clusters[0].id(), "root-clone");
    EXPECT_EQ(p.clusters[0].mass, t.T_z);
    EXPECT_EQ(clonal_mass(IntervalSet{}), 0.0);
}

TEST(ClonalAnalysis, OriginMarkAboveAllAtoms) {
    CombTree t{1.0, 2.0, 1e-2, {{0.5, 0.3}, {1.2, 0.6}}};
    MutationSet m;
    m.marks.push_back({kOriginBranch, 0.0, 0.8, 0.2});
    EXPECT_TRUE(clonal_set(t, m, 1.0, true).empty());
    EXPECT_FALSE(clonal_existence(t, m, 1.0));
    EXPECT_EQ(clonal_set(t, m, 1.0, false).total_length(), 2.0);
    // a lower origin mark leaves the part hanging below the 0.6 atom clonal
    m.marks[0].y = 0.5;
    auto r = clonal_set(t, m, 1.0, true);
    ASSERT_EQ(r.intervals.size(), 1u);
    EXPECT_EQ(r.intervals[0], (Interval{1.2, 2.0}));
}

TEST(ClonalAnalysis, HandPartition) {
    CombTree t{1.0, 3.0, 1e-2, {{1.0, 0.5}, {2.0, 0.8}}};
    MutationSet m;
    m.marks.push_back({0, 1.0, 0.2, 0.1});  // shadow [1, 2)
    m.marks.push_back({1, 2.0, 0.7, 0.1});  // shadow [2, 3)
    m.marks.push_back({1, 2.0, 0.3, 0.1});  // nested in the previous one
    auto p = allelic_partition(t, m, 1.0);
    std::map<std::string, double> got;
    for (const auto& c : p.clusters) got[c.id()] = c.mass;
    EXPECT_DOUBLE_EQ(got["root-clone"], 1.0);
    EXPECT_DOUBLE_EQ(got["m0"], 1.0);
    EXPECT_DOUBLE_EQ(got["m2"], 1.0);
    EXPECT_EQ(got.count("m1"), 0u);
    EXPECT_DOUBLE_EQ(p.total_mass(), 3.0);
}

TEST(ClonalAnalysis, TieAtEqualHeightGoesToHigherLevel) {
    CombTree t{1.0, 3.0, 1e-2, {{1.0, 0.5}}};
    MutationSet m;
    m.marks.push_back({0, 1.0, 0.2, 0.6});
    m.marks.push_back({0, 1.0, 0.2, 0.3});
    auto p = allelic_partition(t, m, 1.0);
    double m0 = 0, m1 = 0;
    for (const auto& c : p.clusters) {
        if (c.mark == 0) m0 = c.mass;
        if (c.mark == 1) m1 = c.mass;
    }
    EXPECT_EQ(m0, 2.0);
    EXPECT_EQ(m1, 0.0);
}

TEST(ClonalAnalysis, GridBruteForceAgreement) {
    RandomStream rng(2);
    const double h = 1e-4;
    for (int rep = 0; rep < 6; ++rep) {
        auto [t, m] = sample_pair(1.0, 2e-2, 1.0, rng);
        const bool origin = rep % 2 == 0;
        auto r = clonal_set(t, m, 0.8, origin);
        r.validate();
        auto p = allelic_partition(t, m, 0.8, origin);
        std::map<int, double> grid_mass;
        std::size_t n = 0;
        for (double s = 0.5 * h; s < t.T_z; s += h, ++n) {
            auto v = scan_point(t, m, 0.8, origin, s);
            ASSERT_EQ(r.contains(s), v.clonal) << "t=" << s;
            grid_mass[v.clonal ? kRootClone : v.mark] += h;
        }
        ASSERT_GT(n, 100u);
        const double tol = h * (2.0 * static_cast<double>(m.size()) + 4.0);
        double total = 0.0;
        for (const auto& c : p.clusters) {
            EXPECT_NEAR(c.mass, grid_mass[c.mark], tol) << c.id();
            total += c.mass;
        }
        for (const auto& [k, v] : grid_mass) {
            bool found = false;
            for (const auto& c : p.clusters) found = found || c.mark == k;
            if (!found) {
                EXPECT_LE(v, tol) << k;
            }
        }
        EXPECT_NEAR(total, t.T_z, 1e-12 * t.T_z);
        EXPECT_NEAR(p.root_mass(), clonal_mass(r), 1e-12 * t.T_z);
    }
}

TEST(ClonalAnalysis, LevelMonotonicity) {
    RandomStream rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        auto [t, m] = sample_pair(1.0, 1e-2, 2.0, rng);
        auto lo = clonal_set(t, m, 0.5), hi = clonal_set(t, m, 1.5);
        for (const auto& iv : hi.intervals) {
            EXPECT_TRUE(lo.contains(iv.a));
            EXPECT_TRUE(lo.contains(0.5 * (iv.a + iv.b)));
        }
        EXPECT_LE(clonal_mass(hi), clonal_mass(lo));
        EXPECT_EQ(clonal_mass(clonal_set(t, m, 0.0)), t.T_z);
    }
}

TEST(ClonalAnalysis, ClonalMassIsExponential) {
    const double eps = 1e-3;
    RandomStream rng(4);
    std::vector<double> ms;
    for (int i = 0; i < 10000; ++i) {
        auto [t, m] = sample_pair(1.0, eps, 1.0, rng);
        ms.push_back(clonal_mass(clonal_set(t, m, 1.0)));
    }
    const double mean = wmu_floor(1.0, 1.0, eps);
    auto ks = ks_test(ms, [&](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-x / mean); });
    EXPECT_GT(ks.p_value, 0.01) << ks.statistic;
}

TEST(ClonalAnalysis, ExistenceFrequency) {
    const double eps = 1e-3;
    RandomStream rng(5);
    MeanAccumulator acc;
    for (int i = 0; i < 10000; ++i) {
        auto [t, m] = sample_pair(1.0, eps, 1.0, rng);
        acc.add(clonal_existence(t, m, 1.0) ? 1.0 : 0.0);
    }
    const double oracle = std::exp(-(1.0 - eps)) / wmu_floor(1.0, 1.0, eps);
    EXPECT_TRUE(mean_check(acc.mean, acc.se(), oracle).pass) << acc.mean << " vs " << oracle;
    RandomStream r2(6);
    auto [t, m] = sample_pair(1.0, eps, 1.0, r2);
    EXPECT_TRUE(clonal_existence(t, m, 0.0));
}

TEST(ClonalAnalysis, SpectrumTailBasics) {
    RandomStream rng(7);
    auto [t, m] = sample_pair(4.0, 1e-3, 1.0, rng);
    auto p = allelic_partition(t, m, 1.0, true);
    EXPECT_EQ(spectrum_tail(p, t.T_z * 1.01), 0u);
    EXPECT_THROW(spectrum_tail(p, p.q_floor), std::domain_error);
    EXPECT_NO_THROW(spectrum_tail(p, p.q_floor * 0.5, true));
    std::size_t prev = 0;
    for (double q = 2.0; q > 1e-3; q *= 0.5) {
        std::size_t n = spectrum_tail(p, q, true);
        EXPECT_GE(n, prev);
        prev = n;
    }
}

TEST(ClonalAnalysis, ReducedTreeUnchangedWithoutMarks) {
    RandomStream rng(8);
    auto t = sample_cpp(IntensityMeasure::brownian(), 1.0, 1e-2, rng);
    EXPECT_EQ(reduced_clonal_subtree(t, MutationSet{}, 1.0), t);
}

TEST(ClonalAnalysis, ReducedTreeShapeAndMass) {
    RandomStream rng(9);
    for (int rep = 0; rep < 50; ++rep) {
        auto [t, m] = sample_pair(1.0, 1e-2, 1.0, rng);
        auto r = reduced_clonal_subtree(t, m, 1.0);
        EXPECT_NO_THROW(r.validate());
        EXPECT_NEAR(r.T_z, clonal_mass(clonal_set(t, m, 1.0)), 1e-12);
    }
    CombTree t{1.0, 2.0, 1e-2, {{0.5, 0.3}}};
    MutationSet m;
    m.marks.push_back({kOriginBranch, 0.0, 0.8, 0.2});
    EXPECT_THROW(reduced_clonal_subtree(t, m, 1.0, true), std::domain_error);
}

TEST(ClonalAnalysis, ReducedTreeHandGap) {
    CombTree t{1.0, 4.0, 1e-2, {{1.0, 0.5}, {1.5, 0.2}, {2.0, 0.4}, {3.0, 0.1}}};
    MutationSet m;
    m.marks.push_back({0, 1.0, 0.45, 0.0});  // shadow [1, 4): nothing later reaches 0.45
    m.marks.push_back({1, 1.5, 0.1, 0.0});
    auto r = reduced_clonal_subtree(t, m, 1.0);
    EXPECT_EQ(r.T_z, 1.0);
    EXPECT_TRUE(r.atoms.empty());
    m.marks[0].y = 0.3;  // now the 0.4 atom at t=2 ends the shadow
    m.marks.pop_back();
    r = reduced_clonal_subtree(t, m, 1.0);
    ASSERT_EQ(r.atoms.size(), 2u);
    EXPECT_EQ(r.atoms[0], (Atom{1.0, 0.5}));
    EXPECT_EQ(r.atoms[1], (Atom{2.0, 0.1}));
    EXPECT_EQ(r.T_z, 3.0);
}

TEST(ClonalAnalysis, ReducedTreeDepthLaw) {
    const double eps = 1e-3, floor = 0.05, z = 1.0;
    RandomStream rng(10);
    std::vector<double> depths;
    while (depths.size() < 3000) {
        auto [t, m] = sample_pair(z, eps, 1.0, rng);
        for (const auto& a : reduced_clonal_subtree(t, m, 1.0).atoms)
            if (a.x > floor) depths.push_back(a.x);
    }
    const double top = 1.0 / wmu_floor(z, 1.0, eps), bot = 1.0 / wmu_floor(floor, 1.0, eps);
    auto cdf = [&](double x) {
        if (x <= floor) return 0.0;
        if (x >= z) return 1.0;
        return 1.0 - (1.0 / wmu_floor(x, 1.0, eps) - top) / (bot - top);
    };
    auto ks = ks_test(depths, cdf);
    EXPECT_GT(ks.p_value, 0.01) << ks.statistic;
}

TEST(ClonalAnalysis, RegenerationAtStoppingPoint) {
    // first clonal run from 0 versus the run from the first clonal point after
    // t = 1, taken from independent windows
    RandomStream rng(11);
    std::vector<double> fresh, after;
    for (int rep = 0; fresh.size() < 2000 || after.size() < 2000; ++rep) {
        auto t = sample_comb_window(IntensityMeasure::brownian(), 20.0, 1e-2, rng);
        auto m = sample_coupled_mutations(t, 1.0, rng);
        auto r = clonal_set(t, m, 1.0);
        if (rep % 2 == 0) {
            if (fresh.size() < 2000 && r.intervals.front().b < t.T_z) fresh.push_back(r.intervals.front().length());
            continue;
        }
        auto it = std::find_if(r.intervals.begin(), r.intervals.end(), [](const Interval& i) { return i.b > 1.0; });
        if (after.size() < 2000 && it != r.intervals.end() && it->b < t.T_z) after.push_back(it->b - std::max(it->a, 1.0));
    }
    auto ks = ks_two_sample(fresh, after);
    EXPECT_GT(ks.p_value, 0.01) << ks.statistic;
}
