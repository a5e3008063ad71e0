#pragma once

// Offline analysis of recorded games: sessions (JSONL) -> rationality records
// (CSV) -> report bundle (counts, signatures, clusters, trees).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "humsearch/dtree.hpp"
#include "humsearch/errors.hpp"
#include "humsearch/rationality.hpp"
#include "humsearch/records.hpp"
#include "humsearch/signatures.hpp"
#include "humsearch/testbed.hpp"

namespace humsearch {

inline constexpr std::size_t kShotBudget = 20;

struct Click {
    Point2 x{};
    double y = 0.0;
    std::int64_t t = 0;  // milliseconds since the epoch

    friend bool operator==(const Click&, const Click&) = default;
};

struct GameSessionRecord {
    std::string user_id;
    std::string problem_id;
    std::vector<Click> clicks;
    bool complete = false;

    friend bool operator==(const GameSessionRecord&, const GameSessionRecord&) = default;
};

struct SessionCheck {
    double score_tolerance = 1e-9;  // negative disables the recomputation check
};

inline nlohmann::ordered_json session_to_json(const GameSessionRecord& s) {
    nlohmann::ordered_json j;
    j["user_id"] = s.user_id;
    j["problem_id"] = s.problem_id;
    auto clicks = nlohmann::ordered_json::array();
    for (const auto& c : s.clicks) clicks.push_back({{"x", {c.x[0], c.x[1]}}, {"y", c.y}, {"t", c.t}});
    j["clicks"] = std::move(clicks);
    j["complete"] = s.complete;
    return j;
}

/// Validates one decoded session; violations are reported as ParseError at `line`.
inline GameSessionRecord session_from_json(const nlohmann::json& j, std::size_t line, const SessionCheck& check = {}) {
    auto fail = [line](const std::string& msg) { return ParseError(line, msg); };
    if (!j.is_object()) throw fail("session must be a JSON object");
    GameSessionRecord s;
    try {
        s.user_id = j.at("user_id").get<std::string>();
        s.problem_id = j.at("problem_id").get<std::string>();
        const auto& clicks = j.at("clicks");
        if (!clicks.is_array()) throw fail("'clicks' must be an array");
        if (clicks.empty()) throw fail("session has no clicks");
        if (clicks.size() > kShotBudget) {
            throw fail("session has " + std::to_string(clicks.size()) + " clicks; the budget is " +
                       std::to_string(kShotBudget));
        }
        for (const auto& c : clicks) {
            const auto& x = c.at("x");
            if (!x.is_array() || x.size() != 2) throw fail("click location must be a 2-element array");
            Click k;
            k.x = {x[0].get<double>(), x[1].get<double>()};
            k.y = c.at("y").get<double>();
            k.t = c.contains("t") ? c.at("t").get<std::int64_t>() : 0;
            s.clicks.push_back(k);
        }
        s.complete = j.contains("complete") ? j.at("complete").get<bool>() : s.clicks.size() == kShotBudget;
    } catch (const nlohmann::json::exception& e) {
        throw fail(std::string("malformed session: ") + e.what());
    }
    if (s.user_id.empty()) throw fail("user_id is empty");
    const TestProblem* problem = nullptr;
    try {
        problem = &find_problem(s.problem_id);
    } catch (const UnknownProblem& e) {
        throw fail(e.what());
    }
    for (std::size_t i = 0; i < s.clicks.size(); ++i) {
        const auto& c = s.clicks[i];
        if (!problem->in_bounds(c.x)) throw fail("click " + std::to_string(i + 1) + " lies outside the problem bounds");
        if (!std::isfinite(c.y)) throw fail("click " + std::to_string(i + 1) + " has a non-finite score");
        if (check.score_tolerance >= 0.0) {
            const double expected = problem->score(c.x);
            if (std::abs(expected - c.y) > check.score_tolerance * std::max(1.0, std::abs(expected))) {
                throw fail("click " + std::to_string(i + 1) + " score " + format_double(c.y) +
                           " does not match the testbed value " + format_double(expected));
            }
        }
    }
    return s;
}

inline std::vector<GameSessionRecord> read_sessions(std::istream& in, const SessionCheck& check = {}) {
    std::vector<GameSessionRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
        }
        out.push_back(session_from_json(j, lineno, check));
    }
    return out;
}

inline std::vector<GameSessionRecord> load_sessions(const std::string& path, const SessionCheck& check = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open '" + path + "'");
    return read_sessions(in, check);
}

inline void write_sessions(std::ostream& out, std::span<const GameSessionRecord> sessions) {
    for (const auto& s : sessions) out << session_to_json(s).dump() << '\n';
}

inline void save_sessions(const std::string& path, std::span<const GameSessionRecord> sessions) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoError", "cannot open '" + path + "' for writing");
    write_sessions(out, sessions);
}

// ---------------------------------------------------------------- step 1

struct Step1Result {
    std::vector<RationalityRecord> records;
    std::vector<std::string> warnings;  // skipped decisions and failed kernels
};

using ProgressFn = std::function<void(const GameSessionRecord&, std::size_t index, std::size_t total)>;

/// Appends the records of one session. A decision with no fittable kernel is skipped.
inline void analyze_session(const GameSessionRecord& s, const AnalysisOptions& options, Step1Result& result) {
    const TestProblem& problem = find_problem(s.problem_id);
    std::vector<Point2> xs;
    std::vector<double> ys;
    for (const auto& c : s.clicks) {
        xs.push_back(c.x);
        ys.push_back(c.y);
    }
    const std::string where = s.user_id + "/" + s.problem_id;
    for (std::size_t n = options.min_history; n < xs.size(); ++n) {
        const auto hx = std::span<const Point2>(xs).first(n);
        const auto hy = std::span<const double>(ys).first(n);
        DecisionEvaluation ev;
        try {
            ev = evaluate_decision_all(problem, hx, hy, xs[n], options);
        } catch (const SingularCovariance& e) {
            result.warnings.push_back(where + " iter " + std::to_string(n + 1) + " skipped: " + e.what());
            continue;
        }
        for (const auto& f : ev.failures) {
            result.warnings.push_back(where + " iter " + std::to_string(n + 1) + ": " + f);
        }
        double cum = 0.0;
        for (double y : hy) cum += y;
        for (UncertaintyMeasure m : all_measures) {
            RationalityRecord r;
            r.tf = s.problem_id;
            r.user = s.user_id;
            r.iter = static_cast<int>(n + 1);
            r.uq = m;
            r.dst = ev.distance(m);
            r.cum_reward = cum;
            r.acr = cum / static_cast<double>(n);
            r.cls = classify(r.dst, options.threshold);
            result.records.push_back(std::move(r));
        }
    }
}

/// Sessions are processed in (user, problem) order and the records sorted by
/// (user, tf, iter, uq), so the output does not depend on input order.
inline Step1Result step1(std::span<const GameSessionRecord> sessions, const AnalysisOptions& options = {},
                         const ProgressFn& progress = {}) {
    std::vector<std::size_t> order(sessions.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(sessions[a].user_id, sessions[a].problem_id) <
               std::tie(sessions[b].user_id, sessions[b].problem_id);
    });
    Step1Result result;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (progress) progress(sessions[order[k]], k, order.size());
        analyze_session(sessions[order[k]], options, result);
    }
    std::stable_sort(result.records.begin(), result.records.end(), record_less);
    return result;
}

// ---------------------------------------------------------------- step 2

struct ParetoCount {
    std::size_t pareto = 0;
    std::size_t total = 0;
};

struct TreeRun {
    std::string name;
    std::vector<dtree::Feature> feature_order;
    double confidence_factor = 0.25;
    dtree::TreeNode tree;
    dtree::Evaluation train;
    dtree::Evaluation validation;
};

struct AcrSummary {
    UncertaintyMeasure measure;
    DecisionClass cls;
    std::size_t n = 0;
    double mean_acr = 0.0;
};

struct ReportOptions {
    std::size_t k = 2;
    double confidence_factor = 0.02;  // paired with the 0.25 default
    std::uint64_t seed = 0;
    std::optional<UncertaintyMeasure> tree_measure;  // default: measure with the most Pareto decisions
};

struct ReportBundle {
    std::map<UncertaintyMeasure, ParetoCount> by_measure;
    std::map<std::string, std::map<UncertaintyMeasure, ParetoCount>> by_user;
    std::map<std::string, std::map<UncertaintyMeasure, ParetoCount>> by_function;
    SignatureReport signatures;
    UncertaintyMeasure tree_measure = UncertaintyMeasure::Z;
    std::vector<TreeRun> trees;
    std::vector<AcrSummary> acr;
};

/// Measure with the largest Pareto count; ties resolved in SD, H, Z order.
inline UncertaintyMeasure most_permissive_measure(const std::map<UncertaintyMeasure, ParetoCount>& counts) {
    UncertaintyMeasure best = UncertaintyMeasure::SD;
    std::size_t most = 0;
    bool first = true;
    for (UncertaintyMeasure m : all_measures) {
        auto it = counts.find(m);
        const std::size_t c = it == counts.end() ? 0 : it->second.pareto;
        if (first || c > most) {
            best = m;
            most = c;
            first = false;
        }
    }
    return best;
}

inline ReportBundle step2(std::span<const RationalityRecord> records, const ReportOptions& options = {}) {
    if (records.empty()) throw EmptyRecords("report needs at least one record");
    ReportBundle b;
    for (const auto& r : records) {
        const bool p = r.cls == DecisionClass::Pareto;
        for (ParetoCount* c : {&b.by_measure[r.uq], &b.by_user[r.user][r.uq], &b.by_function[r.tf][r.uq]}) {
            ++c->total;
            if (p) ++c->pareto;
        }
    }

    KMeansOptions km;
    km.k = options.k;
    km.seed = options.seed;
    b.signatures = signature_report(records, km);

    b.tree_measure = options.tree_measure.value_or(most_permissive_measure(b.by_measure));
    const auto rows = dtree::rows_for_measure(records, b.tree_measure);
    if (!rows.empty()) {
        const auto split = dtree::stratified_split(rows, 0.66, options.seed);
        std::vector<double> cfs{0.25};
        if (options.confidence_factor != 0.25) cfs.push_back(options.confidence_factor);
        const std::vector<std::pair<std::string, std::vector<dtree::Feature>>> orders{
            {"default", dtree::default_feature_order()}, {"inverted", dtree::inverted_feature_order()}};
        for (const auto& [oname, order] : orders) {
            for (double cf : cfs) {
                TreeRun run;
                run.name = oname + "_cf" + format_double(cf);
                run.feature_order = order;
                run.confidence_factor = cf;
                dtree::TreeOptions topt;
                topt.confidence_factor = cf;
                topt.feature_order = order;
                const auto& train_rows = split.train.empty() ? rows : split.train;
                run.tree = dtree::train(train_rows, topt);
                run.train = dtree::evaluate(run.tree, train_rows);
                if (!split.validation.empty()) run.validation = dtree::evaluate(run.tree, split.validation);
                b.trees.push_back(std::move(run));
            }
        }
    }

    for (UncertaintyMeasure m : all_measures) {
        for (DecisionClass c : {DecisionClass::Pareto, DecisionClass::NotPareto}) {
            AcrSummary s{m, c, 0, 0.0};
            for (const auto& r : records) {
                if (r.uq != m || r.cls != c) continue;
                ++s.n;
                s.mean_acr += r.acr;
            }
            if (s.n > 0) s.mean_acr /= static_cast<double>(s.n);
            b.acr.push_back(s);
        }
    }
    return b;
}

namespace detail {

inline nlohmann::ordered_json evaluation_json(const dtree::Evaluation& e) {
    return {{"accuracy", e.accuracy},
            {"confusion",
             {{"Pareto", {{"Pareto", e.confusion[0][0]}, {"notPareto", e.confusion[0][1]}}},
              {"notPareto", {{"Pareto", e.confusion[1][0]}, {"notPareto", e.confusion[1][1]}}}}}};
}

inline void write_count_table(const std::filesystem::path& path,
                              const std::map<std::string, std::map<UncertaintyMeasure, ParetoCount>>& table,
                              const std::vector<std::string>& order) {
    std::ofstream out(path, std::ios::binary);
    out << "id,H,SD,Z,decisions\n";
    for (const auto& id : order) {
        const auto& row = table.at(id);
        auto get = [&](UncertaintyMeasure m) {
            auto it = row.find(m);
            return it == row.end() ? std::size_t{0} : it->second.pareto;
        };
        std::size_t decisions = 0;
        for (const auto& [m, c] : row) decisions = std::max(decisions, c.total);
        out << id << ',' << get(UncertaintyMeasure::H) << ',' << get(UncertaintyMeasure::SD) << ','
            << get(UncertaintyMeasure::Z) << ',' << decisions << '\n';
    }
}

}  // namespace detail

/// Writes the bundle as CSV tables, tree text files and report.json.
inline void write_report(const ReportBundle& b, std::span<const RationalityRecord> records,
                         const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "counts_by_measure.csv", std::ios::binary);
        out << "measure,pareto,decisions\n";
        for (UncertaintyMeasure m : all_measures) {
            auto it = b.by_measure.find(m);
            const ParetoCount c = it == b.by_measure.end() ? ParetoCount{} : it->second;
            out << to_string(m) << ',' << c.pareto << ',' << c.total << '\n';
        }
    }
    detail::write_count_table(dir / "counts_by_user.csv", b.by_user, subjects(records, SignatureAxis::User));
    detail::write_count_table(dir / "counts_by_function.csv", b.by_function,
                              subjects(records, SignatureAxis::Function));
    write_signature_report(b.signatures, dir);
    {
        std::ofstream out(dir / "acr_summary.csv", std::ios::binary);
        out << "measure,class,decisions,mean_acr\n";
        for (const auto& s : b.acr) {
            out << to_string(s.measure) << ',' << to_string(s.cls) << ',' << s.n << ',' << format_double(s.mean_acr)
                << '\n';
        }
    }

    nlohmann::ordered_json j;
    j["decisions"] = records.size() / std::max<std::size_t>(1, b.by_measure.size());
    auto counts = nlohmann::ordered_json::object();
    for (const auto& [m, c] : b.by_measure) counts[std::string(to_string(m))] = {{"pareto", c.pareto}, {"decisions", c.total}};
    j["pareto_counts"] = counts;

    auto sig = nlohmann::ordered_json::array();
    for (const auto& a : b.signatures.analyses) {
        nlohmann::ordered_json e;
        e["axis"] = to_string(a.axis);
        e["measure"] = to_string(a.measure);
        e["barycenter"] = a.barycenter.weights();
        e["barycenter_ideal_distance"] = a.barycenter_ideal_distance;
        auto members = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < a.signatures.size(); ++i) {
            members.push_back({{"id", a.signatures[i].subject},
                               {"counts", a.signatures[i].counts},
                               {"ideal_distance", a.ideal_distance[i]},
                               {"cluster", a.cluster_label[i]}});
        }
        e["subjects"] = std::move(members);
        sig.push_back(std::move(e));
    }
    j["signatures"] = std::move(sig);

    j["tree_measure"] = to_string(b.tree_measure);
    auto trees = nlohmann::ordered_json::array();
    for (const auto& t : b.trees) {
        nlohmann::ordered_json e;
        e["name"] = t.name;
        auto order = nlohmann::ordered_json::array();
        for (auto f : t.feature_order) order.push_back(dtree::to_string(f));
        e["feature_order"] = std::move(order);
        e["confidence_factor"] = t.confidence_factor;
        e["size"] = t.tree.node_count();
        e["leaves"] = t.tree.leaf_count();
        e["train"] = detail::evaluation_json(t.train);
        e["validation"] = detail::evaluation_json(t.validation);
        e["tree"] = dtree::to_json(t.tree);
        trees.push_back(std::move(e));

        std::ofstream out(dir / ("tree_" + t.name + ".txt"), std::ios::binary);
        out << dtree::to_text(t.tree);
    }
    j["trees"] = std::move(trees);

    auto acr = nlohmann::ordered_json::array();
    for (const auto& s : b.acr) {
        acr.push_back({{"measure", to_string(s.measure)}, {"class", to_string(s.cls)}, {"decisions", s.n},
                       {"mean_acr", s.mean_acr}});
    }
    j["acr"] = std::move(acr);

    std::ofstream out(dir / "report.json", std::ios::binary);
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------- simulation

enum class Policy { Random, Greedy };

inline Policy parse_policy(std::string_view s) {
    if (s == "random") return Policy::Random;
    if (s == "greedy") return Policy::Greedy;
    throw SchemaError("unknown policy '" + std::string(s) + "' (expected random or greedy)");
}

struct SimulationOptions {
    Policy policy = Policy::Random;
    std::size_t games = 1;       // sessions per problem
    std::size_t clicks = kShotBudget;
    std::uint64_t seed = 0;
    double explore = 0.3;        // greedy: chance of a uniform click
    double step = 0.08;          // greedy: perturbation scale in unit coordinates
};

/// Synthetic players. `random` clicks uniformly; `greedy` perturbs its best
/// click so far and occasionally explores uniformly.
inline std::vector<GameSessionRecord> simulate(const SimulationOptions& o) {
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<GameSessionRecord> out;
    const std::size_t clicks = std::clamp<std::size_t>(o.clicks, 1, kShotBudget);
    for (std::size_t g = 0; g < o.games; ++g) {
        char user[16];
        std::snprintf(user, sizeof user, "sim%02zu", g + 1);
        for (const auto& p : list_problems()) {
            GameSessionRecord s{user, p.id(), {}, clicks == kShotBudget};
            Point2 best_u{};
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < clicks; ++i) {
                Point2 u{unif(rng), unif(rng)};
                if (o.policy == Policy::Greedy && i >= 3 && unif(rng) >= o.explore) {
                    u = {std::clamp(best_u[0] + o.step * gauss(rng), 0.0, 1.0),
                         std::clamp(best_u[1] + o.step * gauss(rng), 0.0, 1.0)};
                }
                const Point2 x = from_unit(p.bounds(), u);
                const double y = p.score(x);
                if (y > best) {
                    best = y;
                    best_u = u;
                }
                s.clicks.push_back({x, y, static_cast<std::int64_t>(1'600'000'000'000LL + 1000 * (i + 1))});
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace humsearch
