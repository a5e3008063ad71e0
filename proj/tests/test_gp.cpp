#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "humsearch/gp.hpp"
#include "humsearch/testbed.hpp"

using namespace humsearch;

namespace {

const Bounds kUnit{Interval{0.0, 1.0}, Interval{0.0, 1.0}};

// Gaussian elimination with partial pivoting; independent of Eigen.
std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    return x;
}

double se(double r, double l) { return std::exp(-r * r / (2.0 * l * l)); }

}  // namespace

TEST(Kernel, UnitAtZeroDistance) {
    for (KernelFamily f : all_kernel_families) {
        for (double l : {0.05, 0.3, 1.7}) {
            EXPECT_DOUBLE_EQ(kernel_value({f, l, 1.5}, {0.2, 0.4}, {0.2, 0.4}), 1.0) << to_string(f);
        }
    }
}

TEST(Kernel, ClosedFormValues) {
    EXPECT_NEAR(kernel_value({KernelFamily::SE, 1.0}, {0, 0}, {1, 0}), std::exp(-0.5), 1e-15);
    EXPECT_NEAR(kernel_value({KernelFamily::EXP, 2.0}, {0, 0}, {0, 2}), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(kernel_value({KernelFamily::PE, 1.0, 1.0}, {0, 0}, {3, 4}), std::exp(-5.0), 1e-15);
    EXPECT_NEAR(kernel_value({KernelFamily::M32, 1.0}, {0, 0}, {1, 0}), (1 + std::sqrt(3.0)) * std::exp(-std::sqrt(3.0)),
                1e-15);
    EXPECT_NEAR(kernel_value({KernelFamily::M52, 1.0}, {0, 0}, {1, 0}),
                (1 + std::sqrt(5.0) + 5.0 / 3.0) * std::exp(-std::sqrt(5.0)), 1e-15);
    // PE with exponent 2 is SE with lengthscale scaled by sqrt(2).
    EXPECT_NEAR(kernel_value({KernelFamily::PE, 1.0, 2.0}, {0, 0}, {0.7, 0}), se(0.7, 1.0 / std::sqrt(2.0)), 1e-15);
}

TEST(Kernel, MonotoneAndBounded) {
    for (KernelFamily f : all_kernel_families) {
        double prev = 1.0;
        for (double r = 0.01; r < 3.0; r += 0.01) {
            const double k = kernel_value({f, 0.4, 1.2}, {0, 0}, {r, 0});
            EXPECT_LE(k, prev + 1e-15);
            EXPECT_GE(k, 0.0);
            prev = k;
        }
    }
}

TEST(Kernel, RejectsBadHyperparameters) {
    EXPECT_THROW((void)kernel_value({KernelFamily::SE, 0.0}, {0, 0}, {1, 0}), InvalidSpec);
    EXPECT_THROW((void)kernel_value({KernelFamily::SE, -1.0}, {0, 0}, {1, 0}), InvalidSpec);
    EXPECT_THROW((void)kernel_value({KernelFamily::PE, 1.0, 2.5}, {0, 0}, {1, 0}), InvalidSpec);
    EXPECT_THROW((void)kernel_value({KernelFamily::PE, 1.0, 0.0}, {0, 0}, {1, 0}), InvalidSpec);
}

TEST(Kernel, GramIsSymmetricWithUnitDiagonal) {
    const std::vector<Point2> pts{{0, 0}, {0.3, 0.1}, {0.9, 0.5}, {0.2, 0.8}};
    const auto k = gram_matrix({KernelFamily::M52, 0.3}, pts);
    for (int i = 0; i < 4; ++i) {
        EXPECT_DOUBLE_EQ(k(i, i), 1.0);
        for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(k(i, j), k(j, i));
    }
}

TEST(Posterior, SingleObservation) {
    const std::vector<Point2> X{{0.5, 0.5}};
    const std::vector<double> y{3.0};
    const auto gp = GpPosterior::condition(X, y, {KernelFamily::SE, 0.2}, kUnit, 1e-8);
    const auto at = gp.predict(Point2{0.5, 0.5});
    EXPECT_NEAR(at.mean, 3.0, 1e-12);
    EXPECT_NEAR(at.variance, 1e-8, 1e-12);
    // One observation carries no spread: prior unit variance around y.
    const auto off = gp.predict(Point2{0.7, 0.5});
    EXPECT_NEAR(off.mean, 3.0, 1e-12);
    EXPECT_NEAR(off.variance, 1.0 - se(0.2, 0.2) * se(0.2, 0.2) / (1.0 + 1e-8), 1e-9);
}

TEST(Posterior, MatchesDenseSolve) {
    const Bounds b{Interval{-5.0, 10.0}, Interval{0.0, 15.0}};
    const std::vector<Point2> X{{-2.0, 3.0}, {4.0, 11.0}, {8.0, 1.0}};
    const std::vector<double> y{-12.0, -40.0, -3.5};
    const double l = 0.35;
    const double noise = 1e-3;
    const auto gp = GpPosterior::condition(X, y, {KernelFamily::SE, l}, b, noise);

    auto unit = [&](const Point2& x) {
        return Point2{(x[0] + 5.0) / 15.0, x[1] / 15.0};
    };
    const double mean = (y[0] + y[1] + y[2]) / 3.0;
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / 2.0);
    std::vector<double> ys;
    for (double v : y) ys.push_back((v - mean) / sd);

    std::vector<std::vector<double>> K(3, std::vector<double>(3));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const auto ui = unit(X[i]), uj = unit(X[j]);
            K[i][j] = se(std::hypot(ui[0] - uj[0], ui[1] - uj[1]), l) + (i == j ? noise : 0.0);
        }
    const auto alpha = dense_solve(K, ys);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ux(-5.0, 10.0), uy(0.0, 15.0);
    for (int t = 0; t < 40; ++t) {
        const Point2 x{ux(rng), uy(rng)};
        const auto u = unit(x);
        std::vector<double> ks(3);
        for (int i = 0; i < 3; ++i) {
            const auto ui = unit(X[i]);
            ks[i] = se(std::hypot(u[0] - ui[0], u[1] - ui[1]), l);
        }
        const auto v = dense_solve(K, ks);
        double m = 0.0, q = 0.0;
        for (int i = 0; i < 3; ++i) {
            m += ks[i] * alpha[i];
            q += ks[i] * v[i];
        }
        const auto p = gp.predict(x);
        EXPECT_NEAR(p.mean, mean + sd * m, 1e-9 * sd);
        EXPECT_NEAR(p.variance, sd * sd * (1.0 - q), 1e-9 * sd * sd);
    }
}

TEST(Posterior, DuplicateInputsWithoutNoiseUseJitter) {
    const std::vector<Point2> X{{0.2, 0.2}, {0.2, 0.2}, {0.8, 0.6}};
    const std::vector<double> y{1.0, 1.0, -2.0};
    const auto gp = GpPosterior::condition(X, y, {KernelFamily::SE, 0.3}, kUnit, 0.0);
    EXPECT_GT(gp.jitter(), 0.0);
    EXPECT_NEAR(gp.predict(Point2{0.2, 0.2}).mean, 1.0, 1e-3);
    EXPECT_TRUE(std::isfinite(gp.log_marginal_likelihood()));
}

TEST(Posterior, FarPointRecoversPrior) {
    const std::vector<Point2> X{{0.0, 0.0}, {0.05, 0.02}, {0.02, 0.06}};
    const std::vector<double> y{1.0, 2.0, 0.5};
    const auto gp = GpPosterior::condition(X, y, {KernelFamily::SE, 0.05}, kUnit);
    const auto p = gp.predict(Point2{1.0, 1.0});
    const double prior = gp.output_scale() * gp.output_scale();
    EXPECT_GE(p.variance, 0.99 * prior);
    EXPECT_NEAR(p.mean, gp.output_shift(), 1e-6 * gp.output_scale());
}

TEST(Posterior, VarianceShrinksAtData) {
    const auto& prob = find_problem("levy");
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::vector<Point2> X;
    std::vector<double> y;
    for (int i = 0; i < 8; ++i) {
        X.push_back({u(rng), u(rng)});
        y.push_back(prob.score(X.back()));
    }
    for (KernelFamily f : all_kernel_families) {
        const auto gp = GpPosterior::fit(X, y, f, prob.bounds());
        for (std::size_t i = 0; i < X.size(); ++i) {
            const auto p = gp.predict(X[i]);
            EXPECT_NEAR(p.mean, y[i], 1e-3 * gp.output_scale()) << to_string(f);
            EXPECT_LT(p.variance, 1e-3 * gp.output_scale() * gp.output_scale()) << to_string(f);
        }
    }
}

TEST(Posterior, BatchEqualsSingle) {
    const std::vector<Point2> X{{0.1, 0.9}, {0.5, 0.4}, {0.7, 0.2}, {0.3, 0.3}};
    const std::vector<double> y{0.3, -1.0, 2.2, 0.0};
    const auto gp = GpPosterior::fit(X, y, KernelFamily::M32, kUnit);
    std::vector<Point2> q;
    for (int i = 0; i <= 10; ++i) q.push_back({i / 10.0, 1.0 - i / 10.0});
    const auto batch = gp.predict(std::span<const Point2>(q));
    for (std::size_t i = 0; i < q.size(); ++i) {
        const auto s = gp.predict(q[i]);
        EXPECT_EQ(batch[i].mean, s.mean);
        EXPECT_EQ(batch[i].variance, s.variance);
    }
}

TEST(Fit, MaximizesLikelihoodOverLengthscale) {
    const auto& prob = find_problem("branin");
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point2> X;
    std::vector<double> y;
    for (int i = 0; i < 10; ++i) {
        X.push_back(from_unit(prob.bounds(), {u(rng), u(rng)}));
        y.push_back(prob.score(X.back()));
    }
    for (KernelFamily f : {KernelFamily::SE, KernelFamily::EXP, KernelFamily::M32, KernelFamily::M52}) {
        const auto gp = GpPosterior::fit(X, y, f, prob.bounds());
        const double l = gp.kernel().lengthscale;
        EXPECT_GE(l, 1e-2);
        EXPECT_LE(l, 2.0);
        for (double scale : {0.5, 0.9, 1.1, 2.0}) {
            if (l * scale < 1e-2 || l * scale > 2.0) continue;
            const auto other = GpPosterior::condition(X, y, {f, l * scale}, prob.bounds());
            EXPECT_GE(gp.log_marginal_likelihood(), other.log_marginal_likelihood() - 1e-9) << to_string(f);
        }
    }
    const auto pe = GpPosterior::fit(X, y, KernelFamily::PE, prob.bounds());
    EXPECT_GT(pe.kernel().power, 0.0);
    EXPECT_LE(pe.kernel().power, 2.0);
}

TEST(Fit, NoiseHelpsConflictingDuplicates) {
    const std::vector<Point2> X{{0.3, 0.3}, {0.3, 0.3}, {0.7, 0.7}, {0.5, 0.1}};
    const std::vector<double> y{1.0, -1.0, 0.5, 0.2};
    GpOptions tight;
    tight.noise = 0.0;
    GpOptions loose;
    loose.noise = 0.5;
    const auto a = GpPosterior::fit(X, y, KernelFamily::SE, kUnit, tight);
    const auto b = GpPosterior::fit(X, y, KernelFamily::SE, kUnit, loose);
    EXPECT_GT(b.log_marginal_likelihood(), a.log_marginal_likelihood());
}

TEST(Fit, Deterministic) {
    const std::vector<Point2> X{{0.1, 0.2}, {0.6, 0.4}, {0.9, 0.8}, {0.3, 0.7}};
    const std::vector<double> y{1.0, 3.0, -1.0, 0.4};
    for (KernelFamily f : all_kernel_families) {
        const auto a = GpPosterior::fit(X, y, f, kUnit);
        const auto b = GpPosterior::fit(X, y, f, kUnit);
        EXPECT_EQ(a.kernel().lengthscale, b.kernel().lengthscale);
        EXPECT_EQ(a.kernel().power, b.kernel().power);
    }
}

TEST(Fit, InvalidInputs) {
    const std::vector<Point2> none;
    const std::vector<double> empty;
    EXPECT_THROW((void)GpPosterior::fit(none, empty, KernelFamily::SE, kUnit), InsufficientHistory);
    const std::vector<Point2> one{{0.1, 0.1}};
    const std::vector<double> two{1.0, 2.0};
    EXPECT_THROW((void)GpPosterior::fit(one, two, KernelFamily::SE, kUnit), InvalidSpec);
    GpOptions neg;
    neg.noise = -1.0;
    EXPECT_THROW((void)GpPosterior::fit(one, std::vector<double>{1.0}, KernelFamily::SE, kUnit, neg), InvalidSpec);
}
