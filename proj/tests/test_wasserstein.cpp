#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "humsearch/lp.hpp"
#include "humsearch/wasserstein.hpp"
#include "support.hpp"

using namespace humsearch;

namespace {

DiscreteDistribution delta_bin(std::size_t bin, std::size_t bins = 10) {
    std::vector<double> c(bins, 0.0);
    c[bin] = 1.0;
    return DiscreteDistribution::histogram(c);
}

}  // namespace

TEST(Emd, PointMasses) {
    const auto a = DiscreteDistribution::on_line({0.0}, {1.0});
    const auto b = DiscreteDistribution::on_line({100.0}, {1.0});
    EXPECT_DOUBLE_EQ(emd(a, b).distance, 100.0);
    EXPECT_DOUBLE_EQ(wst_1d(a, b), 100.0);
    EXPECT_DOUBLE_EQ(emd(DiscreteDistribution::on_line({0.0}, {1.0}), DiscreteDistribution::on_line({3.0}, {1.0})).distance,
                     3.0);
}

TEST(Emd, TwoPointExample) {
    const auto a = DiscreteDistribution::on_line({1.0, 5.0}, {0.5, 0.5});
    const auto b = DiscreteDistribution::on_line({2.0, 4.0}, {0.5, 0.5});
    EXPECT_NEAR(emd(a, b).distance, 1.0, 1e-12);
    EXPECT_NEAR(wst_1d(a, b), 1.0, 1e-12);
}

TEST(Emd, SelfDistanceIsZeroWithDiagonalPlan) {
    std::mt19937_64 rng(4);
    const auto p = DiscreteDistribution::histogram(support::random_histogram(rng, 10));
    const auto r = emd(p, p);
    EXPECT_NEAR(r.distance, 0.0, 1e-14);
    for (Eigen::Index i = 0; i < 10; ++i)
        for (Eigen::Index j = 0; j < 10; ++j)
            if (i != j) EXPECT_NEAR(r.plan.flow(i, j), 0.0, 1e-14);
}

TEST(Emd, HistogramsAgreeWithCdfFormula) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 200; ++t) {
        const auto a = support::random_histogram(rng, 10);
        const auto b = support::random_histogram(rng, 10);
        const double oracle = support::w1_cdf(a, b);
        const auto da = DiscreteDistribution::histogram(a);
        const auto db = DiscreteDistribution::histogram(b);
        EXPECT_NEAR(emd(da, db).distance, oracle, 1e-10);
        EXPECT_NEAR(wst_1d(da, db), oracle, 1e-10);
    }
}

TEST(Emd, PlanHasRequestedMarginals) {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 20; ++t) {
        const auto a = DiscreteDistribution::histogram(support::random_histogram(rng, 7));
        const auto b = DiscreteDistribution::histogram(support::random_histogram(rng, 7));
        const auto r = emd(a, b);
        double cost = 0.0;
        for (Eigen::Index i = 0; i < 7; ++i) {
            EXPECT_NEAR(r.plan.flow.row(i).sum(), a.weights()[i], 1e-12);
            EXPECT_NEAR(r.plan.flow.col(i).sum(), b.weights()[i], 1e-12);
            for (Eigen::Index j = 0; j < 7; ++j) {
                EXPECT_GE(r.plan.flow(i, j), -1e-15);
                cost += r.plan.flow(i, j) * std::abs(static_cast<double>(i - j));
            }
        }
        EXPECT_NEAR(cost, r.distance, 1e-12);
    }
}

TEST(Emd, UniformPlanarMatchesBestAssignment) {
    // With equal uniform masses some optimal plan is a permutation.
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> xa, xb;
        for (int i = 0; i < 10; ++i) {
            xa.push_back(u(rng));
            xb.push_back(u(rng));
        }
        const std::vector<double> w(5, 0.2);
        const DiscreteDistribution a(2, xa, w), b(2, xb, w);
        for (int p : {1, 2}) {
            std::vector<int> perm{0, 1, 2, 3, 4};
            double best = 1e300;
            do {
                double c = 0.0;
                for (int i = 0; i < 5; ++i) {
                    const double d = std::hypot(xa[2 * i] - xb[2 * perm[i]], xa[2 * i + 1] - xb[2 * perm[i] + 1]);
                    c += 0.2 * std::pow(d, p);
                }
                best = std::min(best, c);
            } while (std::next_permutation(perm.begin(), perm.end()));
            EXPECT_NEAR(emd(a, b, p).distance, best, 1e-10);
        }
    }
}

TEST(Emd, MetricProperties) {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 30; ++t) {
        const auto a = DiscreteDistribution::histogram(support::random_histogram(rng, 10));
        const auto b = DiscreteDistribution::histogram(support::random_histogram(rng, 10));
        const auto c = DiscreteDistribution::histogram(support::random_histogram(rng, 10));
        const double ab = emd(a, b).distance, ba = emd(b, a).distance;
        EXPECT_NEAR(ab, ba, 1e-12);
        EXPECT_LE(ab, emd(a, c).distance + emd(c, b).distance + 1e-12);
    }
}

TEST(Wst1d, HigherOrder) {
    // Two halves shifted by one and by three: W2 = sqrt((1 + 9) / 2).
    const auto a = DiscreteDistribution::on_line({0.0, 10.0}, {0.5, 0.5});
    const auto b = DiscreteDistribution::on_line({1.0, 13.0}, {0.5, 0.5});
    EXPECT_NEAR(wst_1d(a, b, 2), std::sqrt(5.0), 1e-12);
    EXPECT_NEAR(std::sqrt(emd(a, b, 2).distance), std::sqrt(5.0), 1e-12);
}

TEST(Distribution, Validation) {
    EXPECT_THROW(DiscreteDistribution::on_line({0.0, 1.0}, {0.5, 0.6}), InvalidDistribution);
    EXPECT_THROW(DiscreteDistribution::on_line({0.0, 1.0}, {1.5, -0.5}), InvalidDistribution);
    EXPECT_THROW(DiscreteDistribution::on_line({1.0, 1.0}, {0.5, 0.5}), InvalidDistribution);
    EXPECT_THROW(DiscreteDistribution::on_line({}, {}), InvalidDistribution);
    EXPECT_THROW(DiscreteDistribution::histogram(std::vector<double>(10, 0.0)), InvalidDistribution);
    EXPECT_THROW((void)emd(DiscreteDistribution::on_line({0.0}, {1.0}), DiscreteDistribution(2, {0.0, 0.0}, {1.0})),
                 InvalidDistribution);
}

TEST(Barycenter, TwoPointMasses) {
    const std::vector<DiscreteDistribution> in{delta_bin(2), delta_bin(8)};
    const auto r = barycenter_lp(in);
    EXPECT_NEAR(r.objective, 3.0, 1e-9);
    double mass = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
        if (i < 2 || i > 8) EXPECT_NEAR(r.barycenter.weights()[i], 0.0, 1e-12);
        mass += r.barycenter.weights()[i];
    }
    EXPECT_NEAR(mass, 1.0, 1e-12);
}

TEST(Barycenter, BeatsEverySimplexGridPoint) {
    std::mt19937_64 rng(41);
    const auto grid = support::simplex_grid_3();
    for (int t = 0; t < 10; ++t) {
        std::vector<std::vector<double>> raw;
        std::vector<DiscreteDistribution> in;
        for (int k = 0; k < 4; ++k) {
            raw.push_back(support::random_histogram(rng, 3, 0.0));
            in.push_back(DiscreteDistribution::histogram(raw.back()));
        }
        const auto r = barycenter_lp(in);
        double best_grid = 1e300;
        for (const auto& q : grid) {
            double obj = 0.0;
            for (const auto& p : raw) obj += 0.25 * support::w1_cdf(q, p);
            best_grid = std::min(best_grid, obj);
        }
        EXPECT_LE(r.objective, best_grid + 1e-9);
        double check = 0.0;
        for (const auto& p : raw) check += 0.25 * support::w1_cdf(r.barycenter.weights(), p);
        EXPECT_NEAR(check, r.objective, 1e-9);
    }
}

TEST(Barycenter, WeightedTowardsHeavierInput) {
    const std::vector<DiscreteDistribution> in{delta_bin(1), delta_bin(7)};
    const std::vector<double> lambda{0.8, 0.2};
    const auto r = barycenter_lp(in, lambda);
    EXPECT_NEAR(r.barycenter.weights()[1], 1.0, 1e-9);
    EXPECT_NEAR(r.objective, 0.2 * 6.0, 1e-9);
}

TEST(Barycenter, Errors) {
    const std::vector<DiscreteDistribution> none;
    EXPECT_THROW((void)barycenter_lp(none), InvalidDistribution);
    const std::vector<DiscreteDistribution> mixed{delta_bin(1), delta_bin(1, 5)};
    EXPECT_THROW((void)barycenter_lp(mixed), MismatchedSupport);
    const std::vector<DiscreteDistribution> two{delta_bin(1), delta_bin(3)};
    EXPECT_THROW((void)barycenter_lp(two, std::vector<double>{0.7, 0.7}), InvalidDistribution);
    EXPECT_THROW((void)barycenter_lp(two, std::vector<double>{1.0}), InvalidDistribution);
}

TEST(KMeans, RecoversSeparatedGroups) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto data = support::two_group_deciles(seed);
        KMeansOptions o;
        o.k = 2;
        o.seed = seed;
        const auto r = wst_kmeans(data, o);
        EXPECT_TRUE(support::same_partition(r.assignments, support::expected_two_groups()));
    }
}

TEST(KMeans, ExtremeK) {
    const auto data = support::two_group_deciles(3, 4);
    KMeansOptions o;
    o.k = data.size();
    EXPECT_NEAR(wst_kmeans(data, o).objective, 0.0, 1e-9);
    o.k = 1;
    const auto one = wst_kmeans(data, o);
    EXPECT_NEAR(one.objective, barycenter_lp(data).objective * static_cast<double>(data.size()), 1e-8);
}

TEST(KMeans, ObjectiveNeverIncreases) {
    std::mt19937_64 rng(77);
    std::vector<DiscreteDistribution> data;
    for (int i = 0; i < 12; ++i) data.push_back(DiscreteDistribution::histogram(support::random_histogram(rng, 10)));
    KMeansOptions o;
    o.k = 3;
    const auto r = wst_kmeans(data, o);
    for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
        EXPECT_LE(r.objective_history[i], r.objective_history[i - 1] + 1e-9);
    }
    const auto again = wst_kmeans(data, o);
    EXPECT_EQ(r.assignments, again.assignments);
}

TEST(KMeans, InvalidK) {
    const auto data = support::two_group_deciles(1, 3);
    KMeansOptions o;
    o.k = 0;
    EXPECT_THROW((void)wst_kmeans(data, o), InvalidK);
    o.k = data.size() + 1;
    EXPECT_THROW((void)wst_kmeans(data, o), InvalidK);
}

TEST(Simplex, SmallProgram) {
    // min -x - 2y  s.t.  x + y + s1 = 4,  x + 3y + s2 = 6.  Optimum x = 3, y = 1.
    lp::Problem p(2, 4);
    p.at(0, 0) = 1;
    p.at(0, 1) = 1;
    p.at(0, 2) = 1;
    p.at(1, 0) = 1;
    p.at(1, 1) = 3;
    p.at(1, 3) = 1;
    p.b = {4, 6};
    p.c = {-1, -2, 0, 0};
    const auto s = lp::solve(p);
    EXPECT_NEAR(s.objective, -5.0, 1e-12);
    EXPECT_NEAR(s.x[0], 3.0, 1e-12);
    EXPECT_NEAR(s.x[1], 1.0, 1e-12);
}

TEST(Simplex, RedundantAndNegativeRhs) {
    // x + y = 2 twice, -x = -0.5.
    lp::Problem p(3, 2);
    p.at(0, 0) = p.at(0, 1) = 1;
    p.at(1, 0) = p.at(1, 1) = 1;
    p.at(2, 0) = -1;
    p.b = {2, 2, -0.5};
    p.c = {0, 1};
    const auto s = lp::solve(p);
    EXPECT_NEAR(s.x[0], 0.5, 1e-12);
    EXPECT_NEAR(s.objective, 1.5, 1e-12);
}

TEST(Simplex, Infeasible) {
    lp::Problem p(2, 1);
    p.at(0, 0) = 1;
    p.at(1, 0) = 1;
    p.b = {1, 2};
    p.c = {1};
    EXPECT_THROW((void)lp::solve(p), LpFailure);
}
