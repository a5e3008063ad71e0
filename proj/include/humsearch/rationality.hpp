#pragma once

// Pareto rationality of a decision: its image psi = (improvement, uncertainty)
// under a GP, the grid-approximated nondominated front, and the distance from
// that front.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "humsearch/errors.hpp"
#include "humsearch/gp.hpp"
#include "humsearch/testbed.hpp"

namespace humsearch {

enum class UncertaintyMeasure { SD, H, Z };

inline constexpr std::array<UncertaintyMeasure, 3> all_measures{UncertaintyMeasure::SD, UncertaintyMeasure::H,
                                                                UncertaintyMeasure::Z};

inline std::string_view to_string(UncertaintyMeasure m) {
    switch (m) {
        case UncertaintyMeasure::SD: return "SD";
        case UncertaintyMeasure::H: return "H";
        case UncertaintyMeasure::Z: return "Z";
    }
    return "?";
}

inline UncertaintyMeasure parse_measure(std::string_view s) {
    if (s == "SD") return UncertaintyMeasure::SD;
    if (s == "H") return UncertaintyMeasure::H;
    if (s == "Z") return UncertaintyMeasure::Z;
    throw SchemaError("unknown uncertainty measure '" + std::string(s) + "'");
}

struct ObjectivePair {
    double improvement;  // zeta
    double uncertainty;  // u
    // Optional quantity that u is a strictly increasing function of (the
    // predictive variance for SD and H). When both pairs carry one, dominance
    // compares it instead of u, so rounding inside the transform cannot
    // create or remove ties.
    double order_key = std::numeric_limits<double>::quiet_NaN();

    friend bool operator==(const ObjectivePair& a, const ObjectivePair& b) {
        return a.improvement == b.improvement && a.uncertainty == b.uncertainty;
    }
};

namespace detail {
inline bool keyed(const ObjectivePair& a, const ObjectivePair& b) noexcept {
    return !std::isnan(a.order_key) && !std::isnan(b.order_key);
}
}  // namespace detail

/// Strong dominance under simultaneous maximization.
inline bool dominates(const ObjectivePair& a, const ObjectivePair& b) noexcept {
    const bool k = detail::keyed(a, b);
    const double ua = k ? a.order_key : a.uncertainty;
    const double ub = k ? b.order_key : b.uncertainty;
    return a.improvement >= b.improvement && ua >= ub && (a.improvement > b.improvement || ua > ub);
}

struct ParetoFront {
    std::vector<std::size_t> indices;  // into the source cloud
    std::vector<ObjectivePair> points;
    std::vector<Point2> locations;  // empty when built without locations
    std::optional<UncertaintyMeasure> measure;
    std::optional<KernelFamily> kernel;
    std::size_t grid_size = 0;
};

/// Indices of the nondominated members of `cloud`, sorted by decreasing
/// improvement. Equal pairs collapse onto their first occurrence.
inline std::vector<std::size_t> pareto_indices(std::span<const ObjectivePair> cloud) {
    std::vector<std::size_t> order(cloud.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const bool keyed = std::all_of(cloud.begin(), cloud.end(), [](const ObjectivePair& p) { return !std::isnan(p.order_key); });
    auto u = [&](std::size_t i) { return keyed ? cloud[i].order_key : cloud[i].uncertainty; };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (cloud[a].improvement != cloud[b].improvement) return cloud[a].improvement > cloud[b].improvement;
        return u(a) > u(b);
    });
    std::vector<std::size_t> front;
    double best_u = -std::numeric_limits<double>::infinity();
    for (std::size_t i : order) {
        if (front.empty() || u(i) > best_u) {
            front.push_back(i);
            best_u = u(i);
        }
    }
    return front;
}

inline ParetoFront pareto_front(std::span<const ObjectivePair> cloud, std::span<const Point2> locations = {}) {
    if (cloud.empty()) throw InvalidSpec("pareto_front needs a nonempty collection");
    for (const auto& p : cloud) {
        if (!std::isfinite(p.improvement) || !std::isfinite(p.uncertainty)) {
            throw InvalidSpec("objective pairs must be finite");
        }
    }
    ParetoFront front;
    front.indices = pareto_indices(cloud);
    front.grid_size = cloud.size();
    for (std::size_t i : front.indices) {
        front.points.push_back(cloud[i]);
        if (!locations.empty()) front.locations.push_back(locations[i]);
    }
    return front;
}

/// zeta(x) = mu(x) - y+.
inline double improvement(const GpPosterior& gp, const Point2& x, double y_plus) {
    return gp.predict(x).mean - y_plus;
}

/// Inverse-distance uncertainty over decisions already taken, both given in
/// unit-square coordinates. 0 on a previous decision, approaching 1 far away.
inline double inverse_distance_uncertainty(std::span<const Point2> history_unit, const Point2& u) {
    double total = 0.0;
    for (const auto& h : history_unit) {
        const double d2 = squared_distance(u, h);
        if (d2 <= 1e-12) return 0.0;
        total += std::exp(-d2) / d2;
    }
    if (total == 0.0) return 1.0;
    return 2.0 / std::numbers::pi * std::atan(1.0 / total);
}

/// Pointwise predictive differential entropy of y(x), nats.
inline double entropy_from_variance(double variance, double noise_variance) {
    return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * (variance + noise_variance));
}

/// Uncertainty of a GP prediction (score units). Z ignores the prediction.
namespace detail {
inline double uncertainty_of(const GpPosterior& gp, const Prediction& p, UncertaintyMeasure measure) {
    switch (measure) {
        case UncertaintyMeasure::SD: return std::sqrt(p.variance);
        case UncertaintyMeasure::H: {
            const double s = gp.output_scale();
            return entropy_from_variance(p.variance, (gp.noise() + gp.jitter()) * s * s);
        }
        case UncertaintyMeasure::Z: break;
    }
    return 0.0;
}
}  // namespace detail

inline double uncertainty(const GpPosterior& gp, std::span<const Point2> history, const Point2& x,
                          UncertaintyMeasure measure) {
    if (measure == UncertaintyMeasure::Z) {
        if (history.empty()) throw InsufficientHistory("Z uncertainty needs at least one previous decision");
        std::vector<Point2> unit;
        unit.reserve(history.size());
        for (const auto& h : history) unit.push_back(to_unit(gp.bounds(), h));
        return inverse_distance_uncertainty(unit, to_unit(gp.bounds(), x));
    }
    return detail::uncertainty_of(gp, gp.predict(x), measure);
}

/// Uniform lattice of `per_axis` x `per_axis` points over `bounds`, corners included.
inline std::vector<Point2> lattice(const Bounds& bounds, int per_axis) {
    if (per_axis < 2) throw InvalidSpec("grid needs at least 2 points per axis");
    std::vector<Point2> grid;
    grid.reserve(static_cast<std::size_t>(per_axis * per_axis));
    for (int i = 0; i < per_axis; ++i) {
        for (int j = 0; j < per_axis; ++j) {
            const double u = static_cast<double>(i) / (per_axis - 1);
            const double v = static_cast<double>(j) / (per_axis - 1);
            Point2 p = from_unit(bounds, {u, v});
            if (i == per_axis - 1) p[0] = bounds[0].upper;
            if (j == per_axis - 1) p[1] = bounds[1].upper;
            grid.push_back(p);
        }
    }
    return grid;
}

/// The objective cloud over a grid together with its front.
struct FrontierEvaluation {
    std::vector<Point2> locations;
    std::vector<ObjectivePair> cloud;
    ParetoFront front;
};

inline double max_score(std::span<const double> y) {
    if (y.empty()) throw InsufficientHistory("no observed scores");
    return *std::max_element(y.begin(), y.end());
}

inline FrontierEvaluation frontier_for(const GpPosterior& gp, const TestProblem& problem,
                                       std::span<const Point2> history, std::span<const double> scores,
                                       UncertaintyMeasure measure, int grid_per_axis = 30) {
    const double y_plus = max_score(scores);
    FrontierEvaluation ev;
    ev.locations = lattice(problem.bounds(), grid_per_axis);
    ev.cloud.reserve(ev.locations.size());
    for (const auto& x : ev.locations) {
        const Prediction p = gp.predict(x);
        if (measure == UncertaintyMeasure::Z) {
            ev.cloud.push_back({p.mean - y_plus, uncertainty(gp, history, x, measure)});
        } else {
            ev.cloud.push_back({p.mean - y_plus, detail::uncertainty_of(gp, p, measure), p.variance});
        }
    }
    ev.front = pareto_front(ev.cloud, ev.locations);
    ev.front.measure = measure;
    ev.front.kernel = gp.kernel().family;
    return ev;
}

/// Squared distance from `target` to the front, 0 when `target` is not
/// dominated by any member of `cloud`. With `normalize`, both objectives are
/// min-max scaled over cloud + {target} first.
inline double distance_to_front(const ObjectivePair& target, const ParetoFront& front,
                                std::span<const ObjectivePair> cloud, bool normalize = true) {
    if (front.points.empty()) throw InvalidSpec("empty Pareto front");
    const bool dominated =
        std::any_of(front.points.begin(), front.points.end(), [&](const ObjectivePair& p) { return dominates(p, target); });
    if (!dominated) return 0.0;

    double z_lo = target.improvement, z_hi = target.improvement;
    double u_lo = target.uncertainty, u_hi = target.uncertainty;
    if (normalize) {
        for (const auto& p : cloud) {
            z_lo = std::min(z_lo, p.improvement);
            z_hi = std::max(z_hi, p.improvement);
            u_lo = std::min(u_lo, p.uncertainty);
            u_hi = std::max(u_hi, p.uncertainty);
        }
    }
    const double z_span = normalize && z_hi > z_lo ? z_hi - z_lo : 1.0;
    const double u_span = normalize && u_hi > u_lo ? u_hi - u_lo : 1.0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : front.points) {
        const double dz = (target.improvement - p.improvement) / z_span;
        const double du = (target.uncertainty - p.uncertainty) / u_span;
        best = std::min(best, dz * dz + du * du);
    }
    return best;
}

enum class DecisionClass { Pareto, NotPareto };

inline std::string_view to_string(DecisionClass c) { return c == DecisionClass::Pareto ? "Pareto" : "notPareto"; }

inline DecisionClass parse_class(std::string_view s) {
    if (s == "Pareto") return DecisionClass::Pareto;
    if (s == "notPareto") return DecisionClass::NotPareto;
    throw SchemaError("unknown decision class '" + std::string(s) + "'");
}

inline DecisionClass classify(double dst, double threshold = 0.5) {
    return dst < threshold ? DecisionClass::Pareto : DecisionClass::NotPareto;
}

/// Average cumulated reward of the scores collected so far.
inline double acr(std::span<const double> scores) {
    if (scores.empty()) throw EmptyRecords("ACR of an empty score sequence");
    return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

struct AnalysisOptions {
    int grid_per_axis = 30;
    double threshold = 0.5;
    bool normalize_objectives = true;
    GpOptions gp{};
    std::size_t min_history = 3;
};

/// Per-measure minimum distance over the kernels that could be fitted.
struct DecisionEvaluation {
    std::array<double, 3> min_distance{};  // indexed like all_measures
    std::array<KernelFamily, 3> argmin_kernel{};
    std::vector<KernelFamily> fitted_kernels;
    std::vector<std::string> failures;

    [[nodiscard]] double distance(UncertaintyMeasure m) const { return min_distance[static_cast<std::size_t>(m)]; }
};

/// Fits one GP per kernel family to the first n decisions, builds the grid
/// front for each measure and kernel, and scores the next decision against
/// every front. Kernels whose fit fails are skipped; SingularCovariance is
/// raised only when none survives.
inline DecisionEvaluation evaluate_decision_all(const TestProblem& problem, std::span<const Point2> history,
                                                std::span<const double> scores, const Point2& next,
                                                const AnalysisOptions& options = {}) {
    if (history.size() != scores.size()) throw InvalidSpec("history and scores differ in length");
    if (history.size() < options.min_history) {
        throw InsufficientHistory("decision analysis needs at least " + std::to_string(options.min_history) +
                                  " previous decisions, got " + std::to_string(history.size()));
    }
    const double y_plus = max_score(scores);
    const auto grid = lattice(problem.bounds(), options.grid_per_axis);

    std::vector<Point2> history_unit;
    for (const auto& h : history) history_unit.push_back(to_unit(problem.bounds(), h));
    std::vector<double> z_grid;
    z_grid.reserve(grid.size());
    for (const auto& x : grid) z_grid.push_back(inverse_distance_uncertainty(history_unit, to_unit(problem.bounds(), x)));
    const double z_next = inverse_distance_uncertainty(history_unit, to_unit(problem.bounds(), next));

    DecisionEvaluation ev;
    ev.min_distance.fill(std::numeric_limits<double>::infinity());

    std::vector<ObjectivePair> cloud(grid.size());
    for (KernelFamily family : all_kernel_families) {
        std::optional<GpPosterior> gp;
        try {
            gp.emplace(GpPosterior::fit(history, scores, family, problem.bounds(), options.gp));
        } catch (const SingularCovariance& e) {
            ev.failures.emplace_back(e.what());
            continue;
        }
        ev.fitted_kernels.push_back(family);
        const auto preds = gp->predict(grid);
        const Prediction next_pred = gp->predict(next);

        for (std::size_t mi = 0; mi < all_measures.size(); ++mi) {
            const UncertaintyMeasure measure = all_measures[mi];
            for (std::size_t g = 0; g < grid.size(); ++g) {
                cloud[g] = measure == UncertaintyMeasure::Z
                               ? ObjectivePair{preds[g].mean - y_plus, z_grid[g]}
                               : ObjectivePair{preds[g].mean - y_plus, detail::uncertainty_of(*gp, preds[g], measure),
                                               preds[g].variance};
            }
            const ObjectivePair target =
                measure == UncertaintyMeasure::Z
                    ? ObjectivePair{next_pred.mean - y_plus, z_next}
                    : ObjectivePair{next_pred.mean - y_plus, detail::uncertainty_of(*gp, next_pred, measure),
                                    next_pred.variance};
            const ParetoFront front = pareto_front(cloud);
            const double d = distance_to_front(target, front, cloud, options.normalize_objectives);
            if (d < ev.min_distance[mi]) {
                ev.min_distance[mi] = d;
                ev.argmin_kernel[mi] = family;
            }
        }
    }
    if (ev.fitted_kernels.empty()) {
        throw SingularCovariance("no kernel could be fitted: " + (ev.failures.empty() ? "" : ev.failures.front()));
    }
    return ev;
}

/// Minimum distance of `next` from the five kernel fronts under one measure.
inline double evaluate_decision(const TestProblem& problem, std::span<const Point2> history,
                                std::span<const double> scores, const Point2& next, UncertaintyMeasure measure,
                                const AnalysisOptions& options = {}) {
    return evaluate_decision_all(problem, history, scores, next, options).distance(measure);
}

}  // namespace humsearch
