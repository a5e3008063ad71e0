#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "humsearch/errors.hpp"
#include "humsearch/testbed.hpp"

namespace humsearch {

enum class KernelFamily { SE, EXP, PE, M32, M52 };

inline constexpr std::array<KernelFamily, 5> all_kernel_families{KernelFamily::SE, KernelFamily::EXP, KernelFamily::PE,
                                                                 KernelFamily::M32, KernelFamily::M52};

inline std::string_view to_string(KernelFamily family) {
    switch (family) {
        case KernelFamily::SE: return "SE";
        case KernelFamily::EXP: return "EXP";
        case KernelFamily::PE: return "PE";
        case KernelFamily::M32: return "M32";
        case KernelFamily::M52: return "M52";
    }
    return "?";
}

struct KernelSpec {
    KernelFamily family = KernelFamily::SE;
    double lengthscale = 1.0;
    double power = 2.0;  // PE only

    void validate() const {
        if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
            throw InvalidSpec("kernel lengthscale must be positive, got " + std::to_string(lengthscale));
        }
        if (family == KernelFamily::PE && !(power > 0.0 && power <= 2.0)) {
            throw InvalidSpec("power-exponential exponent must lie in (0, 2], got " + std::to_string(power));
        }
    }
};

/// Kernel as a function of the Euclidean distance r >= 0. No validation.
inline double kernel_of_distance(const KernelSpec& spec, double r) {
    const double s = r / spec.lengthscale;
    switch (spec.family) {
        case KernelFamily::SE: return std::exp(-0.5 * s * s);
        case KernelFamily::EXP: return std::exp(-s);
        case KernelFamily::PE: return std::exp(-std::pow(s, spec.power));
        case KernelFamily::M32: {
            const double a = std::sqrt(3.0) * s;
            return (1.0 + a) * std::exp(-a);
        }
        case KernelFamily::M52: {
            const double a = std::sqrt(5.0) * s;
            return (1.0 + a + 5.0 / 3.0 * s * s) * std::exp(-a);
        }
    }
    return 0.0;
}

inline double distance(const Point2& a, const Point2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

inline double squared_distance(const Point2& a, const Point2& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1];
    return dx * dx + dy * dy;
}

inline double kernel_value(const KernelSpec& spec, const Point2& x, const Point2& x_prime) {
    spec.validate();
    return kernel_of_distance(spec, distance(x, x_prime));
}

/// Gram matrix K_ij = k(x_i, x_j).
inline Eigen::MatrixXd gram_matrix(const KernelSpec& spec, std::span<const Point2> points) {
    spec.validate();
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            k(i, j) = k(j, i) = kernel_of_distance(spec, distance(points[i], points[j]));
        }
    }
    return k;
}

struct GpOptions {
    double noise = 1e-8;  // lambda^2, in standardized output units
    double lengthscale_min = 1e-2;
    double lengthscale_max = 2.0;
    int restarts = 5;
    int power_grid = 20;
    double search_tolerance = 1e-4;  // on log(lengthscale)
};

struct Prediction {
    double mean;
    double variance;
};

namespace detail {

inline constexpr std::array<double, 8> jitter_ladder{0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4};

struct Factorization {
    Eigen::MatrixXd lower;
    Eigen::VectorXd alpha;
    double jitter = 0.0;
};

/// Cholesky of K + (noise + jitter) I, walking the jitter ladder until the
/// factor is numerically positive definite.
inline std::optional<Factorization> factorize(const Eigen::MatrixXd& k, const Eigen::VectorXd& y, double noise) {
    for (double jitter : jitter_ladder) {
        Eigen::MatrixXd a = k;
        a.diagonal().array() += noise + jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() != Eigen::Success) continue;
        Eigen::MatrixXd lower = llt.matrixL();
        const double min_pivot = lower.diagonal().minCoeff();
        if (!(min_pivot * min_pivot > 1e-14)) continue;
        Factorization f;
        f.alpha = llt.solve(y);
        if (!f.alpha.allFinite()) continue;
        f.lower = std::move(lower);
        f.jitter = jitter;
        return f;
    }
    return std::nullopt;
}

inline double log_likelihood(const Factorization& f, const Eigen::VectorXd& y) {
    const double n = static_cast<double>(y.size());
    return -0.5 * y.dot(f.alpha) - f.lower.diagonal().array().log().sum() - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace detail

/// A GP conditioned on scored decisions. Inputs live in the unit square of
/// the problem bounds, outputs are standardized; `predict` maps back to score
/// units. Immutable once built.
class GpPosterior {
public:
    /// Conditions on (X, y) with fixed hyperparameters; `kernel.lengthscale`
    /// is expressed in unit-square coordinates.
    static GpPosterior condition(std::span<const Point2> X, std::span<const double> y, const KernelSpec& kernel,
                                 const Bounds& bounds, double noise = 1e-8) {
        kernel.validate();
        GpPosterior gp = prepare(X, y, bounds, noise);
        gp.kernel_ = kernel;
        const Eigen::MatrixXd k = gp.build_gram(kernel);
        auto f = detail::factorize(k, gp.y_std_, noise);
        if (!f) {
            throw SingularCovariance("covariance factorization failed with jitter up to 1e-4 (" +
                                     std::string(to_string(kernel.family)) + ")");
        }
        gp.factor_ = std::move(*f);
        return gp;
    }

    /// Maximum-likelihood fit of the lengthscale (and the exponent for PE) by
    /// bracketed golden-section search over log-lengthscale.
    static GpPosterior fit(std::span<const Point2> X, std::span<const double> y, KernelFamily family,
                           const Bounds& bounds, const GpOptions& options = {}) {
        GpPosterior gp = prepare(X, y, bounds, options.noise);
        gp.distances_ = gp.pairwise_distances();

        KernelSpec best{family, options.lengthscale_max, 2.0};
        double best_ll = -std::numeric_limits<double>::infinity();

        std::vector<double> powers{2.0};
        if (family == KernelFamily::PE) {
            powers.clear();
            for (int i = 1; i <= options.power_grid; ++i) powers.push_back(2.0 * i / options.power_grid);
        }
        for (double power : powers) {
            auto [ls, ll] = gp.search_lengthscale(family, power, options);
            if (ll > best_ll) {
                best_ll = ll;
                best = KernelSpec{family, ls, power};
            }
        }
        if (!std::isfinite(best_ll)) {
            throw SingularCovariance("no lengthscale in the search range yields a factorizable covariance (" +
                                     std::string(to_string(family)) + ")");
        }
        gp.kernel_ = best;
        auto f = detail::factorize(gp.gram_from_distances(best), gp.y_std_, options.noise);
        if (!f) throw SingularCovariance("covariance factorization failed with jitter up to 1e-4");
        gp.factor_ = std::move(*f);
        return gp;
    }

    /// Posterior mean and variance in standardized units at a unit-square point.
    [[nodiscard]] Prediction predict_unit(const Point2& u) const {
        const auto n = static_cast<Eigen::Index>(unit_inputs_.size());
        Eigen::VectorXd ks(n);
        for (Eigen::Index i = 0; i < n; ++i) ks(i) = kernel_of_distance(kernel_, distance(u, unit_inputs_[i]));
        const double mean = ks.dot(factor_.alpha);
        const Eigen::VectorXd v = factor_.lower.triangularView<Eigen::Lower>().solve(ks);
        const double var = std::clamp(1.0 - v.squaredNorm(), 0.0, 1.0);
        return {mean, var};
    }

    [[nodiscard]] Prediction predict_standardized(const Point2& x) const { return predict_unit(to_unit(bounds_, x)); }

    /// mu(x), sigma^2(x) in score units.
    [[nodiscard]] Prediction predict(const Point2& x) const {
        const Prediction p = predict_standardized(x);
        return {shift_ + scale_ * p.mean, scale_ * scale_ * p.variance};
    }

    [[nodiscard]] std::vector<Prediction> predict(std::span<const Point2> xs) const {
        std::vector<Prediction> out;
        out.reserve(xs.size());
        for (const auto& x : xs) out.push_back(predict(x));
        return out;
    }

    /// Log marginal likelihood of the standardized targets.
    [[nodiscard]] double log_marginal_likelihood() const { return detail::log_likelihood(factor_, y_std_); }

    [[nodiscard]] const KernelSpec& kernel() const noexcept { return kernel_; }
    [[nodiscard]] double noise() const noexcept { return noise_; }
    [[nodiscard]] double jitter() const noexcept { return factor_.jitter; }
    [[nodiscard]] double output_shift() const noexcept { return shift_; }
    [[nodiscard]] double output_scale() const noexcept { return scale_; }
    [[nodiscard]] const Bounds& bounds() const noexcept { return bounds_; }
    [[nodiscard]] std::size_t size() const noexcept { return unit_inputs_.size(); }
    [[nodiscard]] const std::vector<Point2>& unit_inputs() const noexcept { return unit_inputs_; }
    [[nodiscard]] const Eigen::VectorXd& standardized_targets() const noexcept { return y_std_; }

    [[nodiscard]] double standardize(double score) const { return (score - shift_) / scale_; }

private:
    GpPosterior() = default;

    static GpPosterior prepare(std::span<const Point2> X, std::span<const double> y, const Bounds& bounds,
                               double noise) {
        if (X.empty()) throw InsufficientHistory("a GP needs at least one observation");
        if (X.size() != y.size()) throw InvalidSpec("X and y differ in length");
        if (!(noise >= 0.0)) throw InvalidSpec("noise variance must be nonnegative");
        GpPosterior gp;
        gp.bounds_ = bounds;
        gp.noise_ = noise;
        gp.unit_inputs_.reserve(X.size());
        for (const auto& x : X) gp.unit_inputs_.push_back(to_unit(bounds, x));

        const auto n = static_cast<Eigen::Index>(y.size());
        Eigen::VectorXd raw(n);
        for (Eigen::Index i = 0; i < n; ++i) raw(i) = y[static_cast<std::size_t>(i)];
        gp.shift_ = raw.mean();
        double scale = 1.0;
        if (n > 1) {
            const double ss = (raw.array() - gp.shift_).square().sum() / static_cast<double>(n - 1);
            if (ss > 0.0 && std::isfinite(ss)) scale = std::sqrt(ss);
        }
        gp.scale_ = scale;
        gp.y_std_ = (raw.array() - gp.shift_) / scale;
        return gp;
    }

    [[nodiscard]] Eigen::MatrixXd pairwise_distances() const {
        const auto n = static_cast<Eigen::Index>(unit_inputs_.size());
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < i; ++j) d(i, j) = d(j, i) = distance(unit_inputs_[i], unit_inputs_[j]);
        return d;
    }

    [[nodiscard]] Eigen::MatrixXd gram_from_distances(const KernelSpec& spec) const {
        const auto n = distances_.rows();
        Eigen::MatrixXd k(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            k(i, i) = 1.0;
            for (Eigen::Index j = 0; j < i; ++j) k(i, j) = k(j, i) = kernel_of_distance(spec, distances_(i, j));
        }
        return k;
    }

    [[nodiscard]] Eigen::MatrixXd build_gram(const KernelSpec& spec) const {
        return gram_matrix(spec, std::span<const Point2>(unit_inputs_));
    }

    [[nodiscard]] double likelihood_at(KernelFamily family, double power, double log_ls) const {
        const KernelSpec spec{family, std::exp(log_ls), power};
        auto f = detail::factorize(gram_from_distances(spec), y_std_, noise_);
        if (!f) return -std::numeric_limits<double>::infinity();
        return detail::log_likelihood(*f, y_std_);
    }

    /// Best (lengthscale, log-likelihood) over `restarts` equal sub-brackets of
    /// the log-lengthscale range, each refined by golden-section search.
    [[nodiscard]] std::pair<double, double> search_lengthscale(KernelFamily family, double power,
                                                               const GpOptions& options) const {
        const double lo = std::log(options.lengthscale_min);
        const double hi = std::log(options.lengthscale_max);
        const int brackets = std::max(1, options.restarts);
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;

        double best_x = hi;
        double best_ll = likelihood_at(family, power, hi);
        auto consider = [&](double x, double ll) {
            if (ll > best_ll) {
                best_ll = ll;
                best_x = x;
            }
        };
        consider(lo, likelihood_at(family, power, lo));

        for (int b = 0; b < brackets; ++b) {
            double a = lo + (hi - lo) * b / brackets;
            double c = lo + (hi - lo) * (b + 1) / brackets;
            double x1 = c - inv_phi * (c - a);
            double x2 = a + inv_phi * (c - a);
            double f1 = likelihood_at(family, power, x1);
            double f2 = likelihood_at(family, power, x2);
            while (c - a > options.search_tolerance) {
                if (f1 >= f2) {
                    c = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = c - inv_phi * (c - a);
                    f1 = likelihood_at(family, power, x1);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + inv_phi * (c - a);
                    f2 = likelihood_at(family, power, x2);
                }
            }
            consider(x1, f1);
            consider(x2, f2);
        }
        return {std::exp(best_x), best_ll};
    }

    KernelSpec kernel_{};
    Bounds bounds_{};
    double noise_ = 0.0;
    double shift_ = 0.0;
    double scale_ = 1.0;
    std::vector<Point2> unit_inputs_;
    Eigen::VectorXd y_std_;
    Eigen::MatrixXd distances_;
    detail::Factorization factor_;
};

}  // namespace humsearch
