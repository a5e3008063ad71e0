#pragma once

// The ten 2-D global-optimization benchmarks, framed as score maximization
// (score = -f). Formulas and domains follow the Virtual Library of
// Simulation Experiments (Surjanovic & Bingham, sfu.ca/~ssurjano).

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "humsearch/errors.hpp"

namespace humsearch {

using Point2 = std::array<double, 2>;

struct Interval {
    double lower;
    double upper;

    [[nodiscard]] double width() const noexcept { return upper - lower; }
    [[nodiscard]] bool contains(double v) const noexcept { return v >= lower && v <= upper; }
};

using Bounds = std::array<Interval, 2>;

/// Maps a point of the unit square onto `bounds`; the result is clamped so
/// rounding never leaves the interval.
inline Point2 from_unit(const Bounds& bounds, const Point2& u) {
    Point2 x{};
    for (std::size_t d = 0; d < 2; ++d) {
        x[d] = std::clamp(bounds[d].lower + u[d] * bounds[d].width(), bounds[d].lower, bounds[d].upper);
    }
    return x;
}

inline Point2 to_unit(const Bounds& bounds, const Point2& x) {
    return {(x[0] - bounds[0].lower) / bounds[0].width(), (x[1] - bounds[1].lower) / bounds[1].width()};
}

namespace testfn {

inline double ackley(const Point2& x) {
    constexpr double a = 20.0, b = 0.2, c = 2.0 * std::numbers::pi;
    const double sq = (x[0] * x[0] + x[1] * x[1]) / 2.0;
    const double cs = (std::cos(c * x[0]) + std::cos(c * x[1])) / 2.0;
    return -a * std::exp(-b * std::sqrt(sq)) - std::exp(cs) + a + std::numbers::e;
}

inline double beale(const Point2& x) {
    const double x1 = x[0], x2 = x[1];
    const double t1 = 1.5 - x1 + x1 * x2;
    const double t2 = 2.25 - x1 + x1 * x2 * x2;
    const double t3 = 2.625 - x1 + x1 * x2 * x2 * x2;
    return t1 * t1 + t2 * t2 + t3 * t3;
}

inline double branin(const Point2& x) {
    constexpr double pi = std::numbers::pi;
    constexpr double a = 1.0, b = 5.1 / (4.0 * pi * pi), c = 5.0 / pi, r = 6.0, s = 10.0, t = 1.0 / (8.0 * pi);
    const double inner = x[1] - b * x[0] * x[0] + c * x[0] - r;
    return a * inner * inner + s * (1.0 - t) * std::cos(x[0]) + s;
}

inline double bukin6(const Point2& x) {
    return 100.0 * std::sqrt(std::abs(x[1] - 0.01 * x[0] * x[0])) + 0.01 * std::abs(x[0] + 10.0);
}

inline double goldpr(const Point2& x) {
    const double x1 = x[0], x2 = x[1];
    const double s1 = x1 + x2 + 1.0;
    const double f1 = 1.0 + s1 * s1 * (19.0 - 14.0 * x1 + 3.0 * x1 * x1 - 14.0 * x2 + 6.0 * x1 * x2 + 3.0 * x2 * x2);
    const double s2 = 2.0 * x1 - 3.0 * x2;
    const double f2 = 30.0 + s2 * s2 * (18.0 - 32.0 * x1 + 12.0 * x1 * x1 + 48.0 * x2 - 36.0 * x1 * x2 + 27.0 * x2 * x2);
    return f1 * f2;
}

inline double griewank(const Point2& x) {
    const double sum = (x[0] * x[0] + x[1] * x[1]) / 4000.0;
    const double prod = std::cos(x[0] / std::sqrt(1.0)) * std::cos(x[1] / std::sqrt(2.0));
    return sum - prod + 1.0;
}

inline double levy(const Point2& x) {
    constexpr double pi = std::numbers::pi;
    const double w1 = 1.0 + (x[0] - 1.0) / 4.0;
    const double w2 = 1.0 + (x[1] - 1.0) / 4.0;
    const double s1 = std::sin(pi * w1);
    const double s_mid = std::sin(pi * w1 + 1.0);
    const double s_last = std::sin(2.0 * pi * w2);
    return s1 * s1 + (w1 - 1.0) * (w1 - 1.0) * (1.0 + 10.0 * s_mid * s_mid) +
           (w2 - 1.0) * (w2 - 1.0) * (1.0 + s_last * s_last);
}

inline double rastr(const Point2& x) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    return 20.0 + (x[0] * x[0] - 10.0 * std::cos(two_pi * x[0])) + (x[1] * x[1] - 10.0 * std::cos(two_pi * x[1]));
}

inline double schwef(const Point2& x) {
    return 418.9829 * 2.0 - x[0] * std::sin(std::sqrt(std::abs(x[0]))) - x[1] * std::sin(std::sqrt(std::abs(x[1])));
}

inline double stybtang(const Point2& x) {
    double sum = 0.0;
    for (double v : x) sum += v * v * v * v - 16.0 * v * v + 5.0 * v;
    return sum / 2.0;
}

}  // namespace testfn

/// A 2-D minimization benchmark exposed as a maximization task.
class TestProblem {
public:
    using Objective = double (*)(const Point2&);

    TestProblem(std::string id, Bounds bounds, Point2 minimizer, Objective f)
        : id_(std::move(id)), bounds_(bounds), minimizer_(minimizer), f_(f), best_score_(-f(minimizer)) {}

    [[nodiscard]] const std::string& id() const noexcept { return id_; }
    [[nodiscard]] static constexpr int dimension() noexcept { return 2; }
    [[nodiscard]] const Bounds& bounds() const noexcept { return bounds_; }
    [[nodiscard]] const Point2& minimizer() const noexcept { return minimizer_; }
    [[nodiscard]] double known_best_score() const noexcept { return best_score_; }

    [[nodiscard]] bool in_bounds(const Point2& x) const noexcept {
        return bounds_[0].contains(x[0]) && bounds_[1].contains(x[1]);
    }

    /// -f(x). Throws OutOfBounds for any coordinate outside its interval (NaN included).
    [[nodiscard]] double score(const Point2& x) const {
        if (!in_bounds(x)) {
            throw OutOfBounds(id_ + ": location (" + std::to_string(x[0]) + ", " + std::to_string(x[1]) +
                              ") outside the search domain");
        }
        return -f_(x);
    }

    /// Raw objective without the bounds check.
    [[nodiscard]] double objective(const Point2& x) const { return f_(x); }

private:
    std::string id_;
    Bounds bounds_;
    Point2 minimizer_;
    Objective f_;
    double best_score_;
};

/// The ten problems in their canonical order.
inline const std::vector<TestProblem>& list_problems() {
    static const std::vector<TestProblem> problems = [] {
        constexpr double pi = std::numbers::pi;
        constexpr double schwef_star = 420.968746359982;
        constexpr double stybtang_star = -2.903534027771178;
        std::vector<TestProblem> v;
        v.emplace_back("ackley", Bounds{{{-32.768, 32.768}, {-32.768, 32.768}}}, Point2{0.0, 0.0}, &testfn::ackley);
        v.emplace_back("beale", Bounds{{{-4.5, 4.5}, {-4.5, 4.5}}}, Point2{3.0, 0.5}, &testfn::beale);
        v.emplace_back("branin", Bounds{{{-5.0, 10.0}, {0.0, 15.0}}}, Point2{pi, 2.275}, &testfn::branin);
        v.emplace_back("bukin6", Bounds{{{-15.0, -5.0}, {-3.0, 3.0}}}, Point2{-10.0, 1.0}, &testfn::bukin6);
        v.emplace_back("goldpr", Bounds{{{-2.0, 2.0}, {-2.0, 2.0}}}, Point2{0.0, -1.0}, &testfn::goldpr);
        v.emplace_back("griewank", Bounds{{{-600.0, 600.0}, {-600.0, 600.0}}}, Point2{0.0, 0.0}, &testfn::griewank);
        v.emplace_back("levy", Bounds{{{-10.0, 10.0}, {-10.0, 10.0}}}, Point2{1.0, 1.0}, &testfn::levy);
        v.emplace_back("rastr", Bounds{{{-5.12, 5.12}, {-5.12, 5.12}}}, Point2{0.0, 0.0}, &testfn::rastr);
        v.emplace_back("schwef", Bounds{{{-500.0, 500.0}, {-500.0, 500.0}}}, Point2{schwef_star, schwef_star},
                       &testfn::schwef);
        v.emplace_back("stybtang", Bounds{{{-5.0, 5.0}, {-5.0, 5.0}}}, Point2{stybtang_star, stybtang_star},
                       &testfn::stybtang);
        return v;
    }();
    return problems;
}

inline const TestProblem& find_problem(std::string_view id) {
    const auto& all = list_problems();
    auto it = std::find_if(all.begin(), all.end(), [&](const TestProblem& p) { return p.id() == id; });
    if (it == all.end()) throw UnknownProblem("unknown test problem '" + std::string(id) + "'");
    return *it;
}

inline double score(const TestProblem& problem, const Point2& x) { return problem.score(x); }

}  // namespace humsearch
