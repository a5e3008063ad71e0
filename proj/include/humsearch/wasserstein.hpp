#pragma once

// Discrete optimal transport: exact EMD by min-cost flow on the bipartite
// transport graph, the 1-D quantile closed form, fixed-support barycenters
// as one joint LP, and k-means in Wasserstein space.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "humsearch/errors.hpp"
#include "humsearch/lp.hpp"

namespace humsearch {

/// Weighted point masses. Points are stored flat, `dimension` coordinates each.
class DiscreteDistribution {
public:
    DiscreteDistribution() = default;

    DiscreteDistribution(std::size_t dimension, std::vector<double> coords, std::vector<double> weights)
        : dim_(dimension), coords_(std::move(coords)), weights_(std::move(weights)) {
        validate();
    }

    /// 1-D distribution on the given support points.
    static DiscreteDistribution on_line(std::vector<double> points, std::vector<double> weights) {
        return {1, std::move(points), std::move(weights)};
    }

    /// Histogram on bins 0..m-1, normalizing the counts to unit mass.
    static DiscreteDistribution histogram(std::span<const double> counts) {
        if (counts.empty()) throw InvalidDistribution("histogram has no bins");
        double total = 0.0;
        for (double c : counts) {
            if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidDistribution("histogram counts must be nonnegative");
            total += c;
        }
        if (!(total > 0.0)) throw InvalidDistribution("histogram has zero mass");
        std::vector<double> support(counts.size());
        std::vector<double> weights(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i) {
            support[i] = static_cast<double>(i);
            weights[i] = counts[i] / total;
        }
        return on_line(std::move(support), std::move(weights));
    }

    [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }
    [[nodiscard]] std::size_t dimension() const noexcept { return dim_; }
    [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }
    [[nodiscard]] const std::vector<double>& coordinates() const noexcept { return coords_; }
    [[nodiscard]] std::span<const double> point(std::size_t i) const {
        return std::span<const double>(coords_).subspan(i * dim_, dim_);
    }

    [[nodiscard]] bool same_support(const DiscreteDistribution& other) const {
        return dim_ == other.dim_ && coords_ == other.coords_;
    }

    void validate() const {
        if (dim_ == 0) throw InvalidDistribution("support dimension must be positive");
        if (weights_.empty()) throw InvalidDistribution("distribution has no support points");
        if (coords_.size() != weights_.size() * dim_) throw InvalidDistribution("support/weight size mismatch");
        double total = 0.0;
        for (double w : weights_) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidDistribution("weights must be finite and nonnegative");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw InvalidDistribution("weights sum to " + std::to_string(total) + ", expected 1");
        }
        for (double c : coords_) {
            if (!std::isfinite(c)) throw InvalidDistribution("support coordinates must be finite");
        }
        for (std::size_t i = 0; i < size(); ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                if (std::equal(point(i).begin(), point(i).end(), point(j).begin())) {
                    throw InvalidDistribution("support points must be distinct");
                }
            }
        }
    }

private:
    std::size_t dim_ = 1;
    std::vector<double> coords_;
    std::vector<double> weights_;
};

/// Ground cost ||a - b||^p.
inline double ground_cost(std::span<const double> a, std::span<const double> b, int p) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    const double d = std::sqrt(s);
    return p == 1 ? d : std::pow(d, p);
}

inline Eigen::MatrixXd cost_matrix(const DiscreteDistribution& from, const DiscreteDistribution& to, int p) {
    Eigen::MatrixXd c(static_cast<Eigen::Index>(from.size()), static_cast<Eigen::Index>(to.size()));
    for (std::size_t i = 0; i < from.size(); ++i)
        for (std::size_t j = 0; j < to.size(); ++j)
            c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = ground_cost(from.point(i), to.point(j), p);
    return c;
}

struct TransportPlan {
    Eigen::MatrixXd flow;  // gamma_ij, source rows, target columns
    double cost = 0.0;
};

struct EmdResult {
    double distance = 0.0;  // sum_ij gamma_ij * ||x_i - x_j||^p
    TransportPlan plan;
};

namespace detail {

/// Exact transportation problem by successive shortest augmenting paths on
/// the residual bipartite graph (Bellman-Ford, since backward arcs carry
/// negative cost).
inline TransportPlan transport(std::span<const double> supply, std::span<const double> demand,
                               const Eigen::MatrixXd& cost) {
    const std::size_t m1 = supply.size(), m2 = demand.size();
    const std::size_t nodes = m1 + m2;
    constexpr double kMassEps = 1e-14;
    constexpr double kInf = std::numeric_limits<double>::infinity();

    std::vector<double> left(supply.begin(), supply.end());
    std::vector<double> need(demand.begin(), demand.end());
    Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m1), static_cast<Eigen::Index>(m2));

    std::vector<double> dist(nodes);
    std::vector<std::ptrdiff_t> pred(nodes);
    const auto c = [&](std::size_t i, std::size_t j) {
        return cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    };
    const auto f = [&](std::size_t i, std::size_t j) -> double& {
        return flow(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    };

    const std::size_t max_rounds = 4 * (m1 + 1) * (m2 + 1) + 16;
    for (std::size_t round = 0; round < max_rounds; ++round) {
        double remaining = 0.0;
        for (double v : left) remaining += v;
        double open_demand = 0.0;
        for (double v : need) open_demand += v;
        if (remaining <= kMassEps || open_demand <= kMassEps) break;

        // Sources with supply are roots; node ids: sources [0, m1), sinks [m1, m1+m2).
        std::fill(dist.begin(), dist.end(), kInf);
        std::fill(pred.begin(), pred.end(), -1);
        for (std::size_t i = 0; i < m1; ++i)
            if (left[i] > kMassEps) dist[i] = 0.0;
        for (std::size_t pass = 0; pass < nodes; ++pass) {
            bool changed = false;
            for (std::size_t i = 0; i < m1; ++i) {
                if (dist[i] == kInf) continue;
                for (std::size_t j = 0; j < m2; ++j) {
                    const double nd = dist[i] + c(i, j);
                    if (nd < dist[m1 + j] - 1e-15) {
                        dist[m1 + j] = nd;
                        pred[m1 + j] = static_cast<std::ptrdiff_t>(i);
                        changed = true;
                    }
                }
            }
            for (std::size_t j = 0; j < m2; ++j) {
                if (dist[m1 + j] == kInf) continue;
                for (std::size_t i = 0; i < m1; ++i) {
                    if (f(i, j) <= kMassEps) continue;
                    const double nd = dist[m1 + j] - c(i, j);
                    if (nd < dist[i] - 1e-15) {
                        dist[i] = nd;
                        pred[i] = static_cast<std::ptrdiff_t>(m1 + j);
                        changed = true;
                    }
                }
            }
            if (!changed) break;
        }

        std::size_t sink = nodes;
        for (std::size_t j = 0; j < m2; ++j) {
            if (need[j] <= kMassEps || dist[m1 + j] == kInf) continue;
            if (sink == nodes || dist[m1 + j] < dist[sink]) sink = m1 + j;
        }
        if (sink == nodes) break;

        // Walk back to the root source, recording the bottleneck.
        double push = need[sink - m1];
        std::size_t v = sink;
        while (pred[v] >= 0) {
            const auto u = static_cast<std::size_t>(pred[v]);
            if (u >= m1) push = std::min(push, f(v, u - m1));  // backward arc sink u -> source v
            v = u;
        }
        push = std::min(push, left[v]);
        if (push <= 0.0) break;

        v = sink;
        while (pred[v] >= 0) {
            const auto u = static_cast<std::size_t>(pred[v]);
            if (u < m1) {
                f(u, v - m1) += push;
            } else {
                f(v, u - m1) -= push;
            }
            v = u;
        }
        left[v] -= push;
        need[sink - m1] -= push;
    }

    TransportPlan plan;
    plan.cost = (flow.array() * cost.array()).sum();
    plan.flow = std::move(flow);
    return plan;
}

}  // namespace detail

/// Earth mover's distance with ground cost ||x_i - x_j||^p.
inline EmdResult emd(const DiscreteDistribution& from, const DiscreteDistribution& to, int p = 1) {
    from.validate();
    to.validate();
    if (p < 1) throw InvalidDistribution("ground power p must be >= 1");
    if (from.dimension() != to.dimension()) throw InvalidDistribution("distributions live in different dimensions");
    const Eigen::MatrixXd cost = cost_matrix(from, to, p);
    EmdResult r;
    r.plan = detail::transport(from.weights(), to.weights(), cost);
    r.distance = r.plan.cost;
    return r;
}

/// (int_0^1 |F1^-1(t) - F2^-1(t)|^p dt)^(1/p) for 1-D step CDFs.
inline double wst_1d(const DiscreteDistribution& a, const DiscreteDistribution& b, int p = 1) {
    a.validate();
    b.validate();
    if (a.dimension() != 1 || b.dimension() != 1) throw InvalidDistribution("wst_1d needs 1-D supports");
    if (p < 1) throw InvalidDistribution("p must be >= 1");

    auto sorted = [](const DiscreteDistribution& d) {
        std::vector<std::pair<double, double>> v;
        for (std::size_t i = 0; i < d.size(); ++i) v.emplace_back(d.coordinates()[i], d.weights()[i]);
        std::sort(v.begin(), v.end());
        return v;
    };
    const auto xa = sorted(a);
    const auto xb = sorted(b);
    const double total_a = std::accumulate(xa.begin(), xa.end(), 0.0, [](double s, auto& e) { return s + e.second; });
    const double total_b = std::accumulate(xb.begin(), xb.end(), 0.0, [](double s, auto& e) { return s + e.second; });

    std::size_t i = 0, j = 0;
    double ca = xa[0].second / total_a, cb = xb[0].second / total_b;
    double t = 0.0, integral = 0.0;
    while (true) {
        const double next = std::min(ca, cb);
        const double gap = std::abs(xa[i].first - xb[j].first);
        integral += (next - t) * (p == 1 ? gap : std::pow(gap, p));
        t = next;
        const bool adv_a = ca <= next && i + 1 < xa.size();
        const bool adv_b = cb <= next && j + 1 < xb.size();
        if (!adv_a && !adv_b) break;
        if (adv_a) ca += xa[++i].second / total_a;
        if (adv_b) cb += xb[++j].second / total_b;
    }
    return p == 1 ? integral : std::pow(integral, 1.0 / p);
}

struct BarycenterResult {
    DiscreteDistribution barycenter;
    double objective = 0.0;  // sum_k lambda_k W(barycenter, P_k)
};

/// Fixed-support barycenter: minimizes sum_k lambda_k W(Q, P_k) over weights of
/// Q on the common support, solved jointly over Q and all transport plans.
inline BarycenterResult barycenter_lp(std::span<const DiscreteDistribution> inputs, std::span<const double> lambda,
                                      int p = 1) {
    if (inputs.empty()) throw InvalidDistribution("barycenter of an empty set");
    const std::size_t nd = inputs.size();
    if (lambda.size() != nd) throw InvalidDistribution("one lambda weight per distribution is required");
    double lambda_total = 0.0;
    for (double l : lambda) {
        if (!(l >= 0.0)) throw InvalidDistribution("lambda weights must be nonnegative");
        lambda_total += l;
    }
    if (std::abs(lambda_total - 1.0) > 1e-9) throw InvalidDistribution("lambda weights must sum to 1");
    for (const auto& d : inputs) {
        d.validate();
        if (!d.same_support(inputs[0])) throw MismatchedSupport("barycenter inputs must share one support");
    }
    const DiscreteDistribution& ref = inputs[0];

    bool identical = true;
    for (const auto& d : inputs) identical = identical && d.weights() == ref.weights();
    if (identical) return {ref, 0.0};

    const std::size_t m = ref.size();
    const Eigen::MatrixXd cost = cost_matrix(ref, ref, p);

    // Variables: w (m), then gamma_k (m x m, row-major) for each k.
    // Rows: per k, m "row sum = w_i" constraints then m "column sum = P_k" constraints.
    lp::Problem prob(2 * m * nd, m + nd * m * m);
    for (std::size_t k = 0; k < nd; ++k) {
        const std::size_t var0 = m + k * m * m;
        const std::size_t row0 = 2 * m * k;
        for (std::size_t i = 0; i < m; ++i) {
            prob.at(row0 + i, i) = -1.0;
            for (std::size_t j = 0; j < m; ++j) {
                const std::size_t v = var0 + i * m + j;
                prob.at(row0 + i, v) = 1.0;
                prob.at(row0 + m + j, v) = 1.0;
                prob.c[v] = lambda[k] * cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
        }
        for (std::size_t j = 0; j < m; ++j) prob.b[row0 + m + j] = inputs[k].weights()[j];
    }
    const lp::Solution sol = lp::solve(prob);

    std::vector<double> w(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(m));
    double total = 0.0;
    for (double& v : w) {
        if (v < 1e-13) v = 0.0;
        total += v;
    }
    for (double& v : w) v /= total;
    return {DiscreteDistribution(ref.dimension(), ref.coordinates(), std::move(w)), sol.objective};
}

inline BarycenterResult barycenter_lp(std::span<const DiscreteDistribution> inputs, int p = 1) {
    std::vector<double> lambda(inputs.size(), 1.0 / static_cast<double>(inputs.size()));
    return barycenter_lp(inputs, lambda, p);
}

inline DiscreteDistribution barycenter(std::span<const DiscreteDistribution> inputs, std::span<const double> lambda,
                                       int p = 1) {
    return barycenter_lp(inputs, lambda, p).barycenter;
}

inline DiscreteDistribution barycenter(std::span<const DiscreteDistribution> inputs, int p = 1) {
    return barycenter_lp(inputs, p).barycenter;
}

struct KMeansOptions {
    std::size_t k = 2;
    std::uint64_t seed = 0;
    std::size_t max_iter = 50;
    std::size_t restarts = 10;
    int p = 1;
};

struct KMeansResult {
    std::vector<std::size_t> assignments;
    std::vector<DiscreteDistribution> barycenters;
    double objective = 0.0;
    std::size_t iterations = 0;
    std::vector<double> objective_history;  // after each barycenter update of the kept run
};

namespace detail {

inline KMeansResult kmeans_run(std::span<const DiscreteDistribution> data, std::size_t k, std::mt19937_64& rng,
                               std::size_t max_iter, int p) {
    const std::size_t n = data.size();
    auto w = [&](const DiscreteDistribution& a, const DiscreteDistribution& b) { return emd(a, b, p).distance; };

    // Seeding: k distinct members drawn at random, each further pick weighted by
    // the squared distance to the nearest pick so far.
    std::vector<std::size_t> seeds;
    seeds.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    while (seeds.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], w(data[seeds.back()], data[i]));
            if (std::find(seeds.begin(), seeds.end(), i) != seeds.end()) nearest[i] = 0.0;
            total += nearest[i] * nearest[i];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (std::size_t i = 0; i < n; ++i) {
                if (nearest[i] <= 0.0) continue;
                pick = i;
                r -= nearest[i] * nearest[i];
                if (r <= 0.0) break;
            }
        }
        if (pick == n) {
            std::vector<std::size_t> rest;
            for (std::size_t i = 0; i < n; ++i)
                if (std::find(seeds.begin(), seeds.end(), i) == seeds.end()) rest.push_back(i);
            pick = rest[std::uniform_int_distribution<std::size_t>(0, rest.size() - 1)(rng)];
        }
        seeds.push_back(pick);
    }

    KMeansResult res;
    for (std::size_t s : seeds) res.barycenters.push_back(data[s]);
    res.assignments.assign(n, k);
    std::vector<double> member_cost(n, 0.0);

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        std::vector<std::size_t> next(n);
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = w(res.barycenters[c], data[i]);
                if (d < best - 1e-12) {
                    best = d;
                    next[i] = c;
                }
            }
            member_cost[i] = best;
        }
        // Empty clusters take the member farthest from its barycenter.
        for (std::size_t c = 0; c < k; ++c) {
            if (std::find(next.begin(), next.end(), c) != next.end()) continue;
            std::size_t far = 0;
            for (std::size_t i = 1; i < n; ++i)
                if (member_cost[i] > member_cost[far]) far = i;
            next[far] = c;
            member_cost[far] = 0.0;
        }
        const bool stable = next == res.assignments;
        res.assignments = std::move(next);
        ++res.iterations;

        double objective = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<DiscreteDistribution> members;
            for (std::size_t i = 0; i < n; ++i)
                if (res.assignments[i] == c) members.push_back(data[i]);
            if (!stable) res.barycenters[c] = barycenter(members, p);
            for (const auto& mbr : members) objective += w(res.barycenters[c], mbr);
        }
        res.objective = objective;
        res.objective_history.push_back(objective);
        if (stable) break;
    }
    return res;
}

}  // namespace detail

/// k-means over distributions with EMD assignments and barycenter centroids.
/// Runs `restarts` seeded initializations and keeps the lowest objective.
inline KMeansResult wst_kmeans(std::span<const DiscreteDistribution> data, const KMeansOptions& options = {}) {
    if (options.k < 1 || options.k > data.size()) {
        throw InvalidK("k must lie in [1, " + std::to_string(data.size()) + "], got " + std::to_string(options.k));
    }
    for (const auto& d : data) {
        d.validate();
        if (!d.same_support(data[0])) throw MismatchedSupport("k-means inputs must share one support");
    }
    std::mt19937_64 rng(options.seed);
    std::optional<KMeansResult> best;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, options.restarts); ++r) {
        KMeansResult run = detail::kmeans_run(data, options.k, rng, options.max_iter, options.p);
        if (!best || run.objective < best->objective - 1e-12) best = std::move(run);
    }
    return std::move(*best);
}

}  // namespace humsearch
