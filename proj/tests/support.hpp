#pragma once

// Independent oracles and fixtures shared by the unit tests and the
// acceptance binary. Nothing here calls the code it is used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "humsearch/humsearch.hpp"

namespace support {

using humsearch::ObjectivePair;

/// O(n^2) nondominated filter; equal points keep their first occurrence.
inline std::vector<std::size_t> brute_force_front(const std::vector<ObjectivePair>& cloud) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        bool keep = true;
        for (std::size_t j = 0; j < cloud.size() && keep; ++j) {
            if (i == j) continue;
            const auto& a = cloud[j];
            const auto& b = cloud[i];
            const bool geq = a.improvement >= b.improvement && a.uncertainty >= b.uncertainty;
            const bool gt = a.improvement > b.improvement || a.uncertainty > b.uncertainty;
            if (geq && gt) keep = false;
            if (!gt && geq && j < i) keep = false;  // duplicate of an earlier point
        }
        if (keep) out.push_back(i);
    }
    return out;
}

inline bool brute_force_nondominated(const ObjectivePair& p, const std::vector<ObjectivePair>& cloud) {
    for (const auto& q : cloud) {
        const bool geq = q.improvement >= p.improvement && q.uncertainty >= p.uncertainty;
        const bool gt = q.improvement > p.improvement || q.uncertainty > p.uncertainty;
        if (geq && gt) return false;
    }
    return true;
}

/// 1-D W1 on bins 0..m-1 via the cumulative-difference formula.
inline double w1_cdf(const std::vector<double>& a, const std::vector<double>& b) {
    double ca = 0.0;
    double cb = 0.0;
    double d = 0.0;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        ca += a[i];
        cb += b[i];
        d += std::abs(ca - cb);
    }
    return d;
}

inline std::vector<double> random_histogram(std::mt19937_64& rng, std::size_t bins, double zero_prob = 0.2) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> w(bins);
    double s = 0.0;
    for (auto& x : w) {
        x = u(rng) < zero_prob ? 0.0 : u(rng);
        s += x;
    }
    if (s == 0.0) {
        w[0] = 1.0;
        s = 1.0;
    }
    for (auto& x : w) x /= s;
    return w;
}

/// All weight vectors on 3 bins with coordinates in multiples of 0.1.
inline std::vector<std::vector<double>> simplex_grid_3() {
    std::vector<std::vector<double>> out;
    for (int i = 0; i <= 10; ++i)
        for (int j = 0; i + j <= 10; ++j) out.push_back({i / 10.0, j / 10.0, (10 - i - j) / 10.0});
    return out;
}

/// Two well separated groups of decile histograms: group 0 puts its mass in
/// the three lowest bins, group 1 in the three highest.
inline std::vector<humsearch::DiscreteDistribution> two_group_deciles(std::uint64_t seed, std::size_t per_group = 10) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<humsearch::DiscreteDistribution> out;
    for (int g = 0; g < 2; ++g) {
        for (std::size_t k = 0; k < per_group; ++k) {
            std::array<double, 10> c{};
            for (int b = 0; b < 3; ++b) c[g == 0 ? b : 9 - b] = u(rng);
            out.push_back(humsearch::DiscreteDistribution::histogram(c));
        }
    }
    return out;
}

/// Ground-truth grouping of two_group_deciles.
inline std::vector<std::size_t> expected_two_groups(std::size_t per_group = 10) {
    std::vector<std::size_t> g(2 * per_group, 0);
    for (std::size_t i = per_group; i < g.size(); ++i) g[i] = 1;
    return g;
}

inline bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j)
            if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    return true;
}

/// Decision-tree dataset shaped after the qualitative description of the
/// human study: 14 players x 10 problems x decisions 4..20. Four problems lean
/// Pareto, five lean notPareto, and on rastr five players stay Pareto while
/// the other nine turn notPareto after a player-specific iteration. Each label
/// follows its tendency with probability `fidelity`.
inline std::vector<humsearch::dtree::ClassifiedRow> paper_style_rows(std::uint64_t seed, double fidelity = 0.8) {
    using humsearch::DecisionClass;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::vector<std::string> easy{"ackley", "griewank", "levy", "schwef"};
    std::vector<int> cutoff(14);
    for (auto& c : cutoff) c = 8 + static_cast<int>(u(rng) * 9.0);
    std::vector<humsearch::dtree::ClassifiedRow> rows;
    for (int user = 1; user <= 14; ++user) {
        char uid[8];
        std::snprintf(uid, sizeof uid, "u%02d", user);
        for (const auto& p : humsearch::list_problems()) {
            double cum = 0.0;
            for (int iter = 4; iter <= 20; ++iter) {
                cum += -std::abs(p.known_best_score()) - 10.0 * u(rng);
                bool pareto_tendency = false;
                if (std::find(easy.begin(), easy.end(), p.id()) != easy.end()) {
                    pareto_tendency = true;
                } else if (p.id() == "rastr") {
                    pareto_tendency = user <= 5 || iter <= cutoff[static_cast<std::size_t>(user - 1)];
                }
                const bool follow = u(rng) < fidelity;
                const bool pareto = follow ? pareto_tendency : !pareto_tendency;
                rows.push_back({p.id(), uid, iter, cum, pareto ? DecisionClass::Pareto : DecisionClass::NotPareto});
            }
        }
    }
    return rows;
}

/// A fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("humsearch-test-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// A full game on `problem` with uniformly random clicks.
inline humsearch::GameSessionRecord random_session(const humsearch::TestProblem& problem, std::uint64_t seed,
                                                   std::size_t clicks = 20, const std::string& user = "tester") {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    humsearch::GameSessionRecord s{user, problem.id(), {}, clicks == 20};
    for (std::size_t i = 0; i < clicks; ++i) {
        const auto& b = problem.bounds();
        const humsearch::Point2 x{std::min(b[0].upper, b[0].lower + u(rng) * b[0].width()),
                                  std::min(b[1].upper, b[1].lower + u(rng) * b[1].width())};
        s.clicks.push_back({x, problem.score(x), static_cast<std::int64_t>(i)});
    }
    return s;
}

}  // namespace support
