#pragma once

// C4.5-style classification tree for Pareto / notPareto decisions.
// Gain-ratio splits (multiway on categorical features, binary at midpoints on
// numeric ones) followed by pessimistic subtree-replacement pruning.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include "humsearch/errors.hpp"
#include "humsearch/rationality.hpp"
#include "humsearch/records.hpp"

namespace humsearch::dtree {

enum class Feature { Tf, User, Iter, CumReward };

inline std::string_view to_string(Feature f) {
    switch (f) {
        case Feature::Tf: return "tf";
        case Feature::User: return "user";
        case Feature::Iter: return "iter";
        case Feature::CumReward: return "cum.reward";
    }
    return "?";
}

inline bool is_categorical(Feature f) { return f == Feature::Tf || f == Feature::User; }

inline const std::vector<Feature>& default_feature_order() {
    static const std::vector<Feature> order{Feature::Tf, Feature::User, Feature::Iter, Feature::CumReward};
    return order;
}

inline const std::vector<Feature>& inverted_feature_order() {
    static const std::vector<Feature> order{Feature::CumReward, Feature::Iter, Feature::User, Feature::Tf};
    return order;
}

struct ClassifiedRow {
    std::string tf;
    std::string user;
    int iter = 0;
    double cum_reward = 0.0;
    DecisionClass cls = DecisionClass::NotPareto;

    [[nodiscard]] const std::string& category(Feature f) const { return f == Feature::Tf ? tf : user; }
    [[nodiscard]] double number(Feature f) const { return f == Feature::Iter ? static_cast<double>(iter) : cum_reward; }
};

inline std::vector<ClassifiedRow> rows_for_measure(std::span<const RationalityRecord> records, UncertaintyMeasure m) {
    std::vector<ClassifiedRow> rows;
    for (const auto& r : records)
        if (r.uq == m) rows.push_back({r.tf, r.user, r.iter, r.cum_reward, r.cls});
    return rows;
}

// counts[0] = Pareto, counts[1] = notPareto
using ClassCounts = std::array<double, 2>;

inline std::size_t class_index(DecisionClass c) { return c == DecisionClass::Pareto ? 0 : 1; }

/// Majority class; ties go to Pareto.
inline DecisionClass majority(const ClassCounts& c) {
    return c[0] >= c[1] ? DecisionClass::Pareto : DecisionClass::NotPareto;
}

struct TreeNode {
    enum class Kind { Leaf, Categorical, Numeric };

    Kind kind = Kind::Leaf;
    Feature feature = Feature::Tf;
    double threshold = 0.0;               // numeric: child 0 is <=, child 1 is >
    std::vector<std::string> categories;  // categorical: one per child
    std::vector<TreeNode> children;
    ClassCounts counts{};
    DecisionClass cls = DecisionClass::Pareto;
    std::size_t majority_child = 0;  // receives unseen categorical values

    [[nodiscard]] bool is_leaf() const { return kind == Kind::Leaf; }
    [[nodiscard]] double total() const { return counts[0] + counts[1]; }

    [[nodiscard]] std::size_t node_count() const {
        std::size_t n = 1;
        for (const auto& c : children) n += c.node_count();
        return n;
    }

    [[nodiscard]] std::size_t leaf_count() const {
        if (is_leaf()) return 1;
        std::size_t n = 0;
        for (const auto& c : children) n += c.leaf_count();
        return n;
    }
};

struct TreeOptions {
    std::size_t min_leaf = 2;
    double confidence_factor = 0.25;
    bool prune = true;
    std::vector<Feature> feature_order = default_feature_order();
};

namespace detail {

inline double entropy(const ClassCounts& c) {
    const double n = c[0] + c[1];
    double h = 0.0;
    for (double k : c)
        if (k > 0.0) h -= k / n * std::log2(k / n);
    return h;
}

inline double split_entropy(std::span<const double> sizes, double total) {
    double h = 0.0;
    for (double s : sizes)
        if (s > 0.0) h -= s / total * std::log2(s / total);
    return h;
}

struct Candidate {
    bool valid = false;
    Feature feature = Feature::Tf;
    double gain = 0.0;
    double ratio = 0.0;
    double threshold = 0.0;
};

inline ClassCounts count(std::span<const ClassifiedRow> rows, std::span<const std::size_t> idx) {
    ClassCounts c{};
    for (std::size_t i : idx) c[class_index(rows[i].cls)] += 1.0;
    return c;
}

inline Candidate categorical_candidate(std::span<const ClassifiedRow> rows, std::span<const std::size_t> idx,
                                       Feature f, double base, std::size_t min_leaf) {
    std::map<std::string, ClassCounts> parts;
    for (std::size_t i : idx) parts[rows[i].category(f)][class_index(rows[i].cls)] += 1.0;
    if (parts.size() < 2) return {};
    std::size_t big_enough = 0;
    const double n = static_cast<double>(idx.size());
    double remainder = 0.0;
    std::vector<double> sizes;
    for (const auto& [v, c] : parts) {
        const double s = c[0] + c[1];
        if (s >= static_cast<double>(min_leaf)) ++big_enough;
        remainder += s / n * entropy(c);
        sizes.push_back(s);
    }
    if (big_enough < 2) return {};
    const double gain = base - remainder;
    const double si = split_entropy(sizes, n);
    if (!(si > 0.0)) return {};
    return {true, f, gain, gain / si, 0.0};
}

inline Candidate numeric_candidate(std::span<const ClassifiedRow> rows, std::span<const std::size_t> idx, Feature f,
                                   double base, std::size_t min_leaf) {
    std::vector<std::pair<double, std::size_t>> v;
    v.reserve(idx.size());
    for (std::size_t i : idx) v.emplace_back(rows[i].number(f), class_index(rows[i].cls));
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    ClassCounts total{};
    for (const auto& e : v) total[e.second] += 1.0;

    Candidate best;
    ClassCounts left{};
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
        left[v[k].second] += 1.0;
        if (v[k].first == v[k + 1].first) continue;
        const double nl = static_cast<double>(k + 1);
        const double nr = n - nl;
        if (nl < static_cast<double>(min_leaf) || nr < static_cast<double>(min_leaf)) continue;
        const ClassCounts right{total[0] - left[0], total[1] - left[1]};
        const double gain = base - (nl / n * entropy(left) + nr / n * entropy(right));
        if (!best.valid || gain > best.gain + 1e-12) {
            const std::array<double, 2> sizes{nl, nr};
            best = {true, f, gain, gain / split_entropy(sizes, n), 0.5 * (v[k].first + v[k + 1].first)};
        }
    }
    return best;
}

inline TreeNode make_leaf(const ClassCounts& c) {
    TreeNode leaf;
    leaf.counts = c;
    leaf.cls = majority(c);
    return leaf;
}

inline TreeNode grow(std::span<const ClassifiedRow> rows, std::vector<std::size_t> idx, const TreeOptions& opt) {
    const ClassCounts c = count(rows, idx);
    TreeNode node = make_leaf(c);
    if (c[0] == 0.0 || c[1] == 0.0) return node;
    if (idx.size() < 2 * opt.min_leaf) return node;

    const double base = entropy(c);
    std::vector<Candidate> cands;
    for (Feature f : opt.feature_order) {
        Candidate cand = is_categorical(f) ? categorical_candidate(rows, idx, f, base, opt.min_leaf)
                                           : numeric_candidate(rows, idx, f, base, opt.min_leaf);
        if (cand.valid && cand.gain > 1e-12) cands.push_back(cand);
    }
    if (cands.empty()) return node;

    // Only candidates with at least average gain compete on gain ratio.
    double avg = 0.0;
    for (const auto& cd : cands) avg += cd.gain;
    avg /= static_cast<double>(cands.size());
    const Candidate* best = nullptr;
    for (const auto& cd : cands) {
        if (cd.gain < avg - 1e-12) continue;
        if (best == nullptr || cd.ratio > best->ratio + 1e-12) best = &cd;
    }

    node.feature = best->feature;
    std::vector<std::vector<std::size_t>> parts;
    if (is_categorical(best->feature)) {
        node.kind = TreeNode::Kind::Categorical;
        std::map<std::string, std::vector<std::size_t>> by_value;
        for (std::size_t i : idx) by_value[rows[i].category(best->feature)].push_back(i);
        for (auto& [v, p] : by_value) {
            node.categories.push_back(v);
            parts.push_back(std::move(p));
        }
    } else {
        node.kind = TreeNode::Kind::Numeric;
        node.threshold = best->threshold;
        parts.resize(2);
        for (std::size_t i : idx) parts[rows[i].number(best->feature) <= node.threshold ? 0 : 1].push_back(i);
    }
    std::size_t largest = 0;
    for (std::size_t k = 0; k < parts.size(); ++k)
        if (parts[k].size() > parts[largest].size()) largest = k;
    for (auto& p : parts) node.children.push_back(grow(rows, std::move(p), opt));
    node.majority_child = largest;
    return node;
}

/// Upper-confidence extra errors for a leaf with `e` errors out of `n`
/// (normal approximation to the binomial, as in C4.5).
inline double added_errors(double n, double e, double cf) {
    if (n <= 0.0) return 0.0;
    if (e < 1.0) {
        const double base = n * (1.0 - std::pow(cf, 1.0 / n));
        if (e == 0.0) return base;
        return base + e * (added_errors(n, 1.0, cf) - base);
    }
    if (e + 0.5 >= n) return std::max(n - e, 0.0);
    const double z = boost::math::quantile(boost::math::normal(), 1.0 - cf);
    const double f = (e + 0.5) / n;
    const double r = (f + z * z / (2 * n) + z * std::sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (1 + z * z / n);
    return r * n - e;
}

inline double leaf_errors(const ClassCounts& c) { return std::min(c[0], c[1]); }

/// Prunes bottom-up; returns the estimated error count of the resulting subtree.
inline double prune(TreeNode& node, double cf) {
    const double as_leaf = leaf_errors(node.counts) + added_errors(node.total(), leaf_errors(node.counts), cf);
    if (node.is_leaf()) return as_leaf;
    double subtree = 0.0;
    for (auto& c : node.children) subtree += prune(c, cf);
    if (as_leaf <= subtree + 0.1) {
        node = make_leaf(node.counts);
        return as_leaf;
    }
    return subtree;
}

}  // namespace detail

inline TreeNode train(std::span<const ClassifiedRow> rows, const TreeOptions& options = {}) {
    if (rows.empty()) throw EmptyDataset("cannot train a tree on zero rows");
    if (options.min_leaf == 0) throw InvalidSpec("min_leaf must be positive");
    if (options.prune && !(options.confidence_factor > 0.0 && options.confidence_factor <= 0.5)) {
        throw InvalidSpec("confidence factor must lie in (0, 0.5]");
    }
    std::vector<std::size_t> idx(rows.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    TreeNode root = detail::grow(rows, std::move(idx), options);
    if (options.prune) detail::prune(root, options.confidence_factor);
    return root;
}

inline DecisionClass predict(const TreeNode& tree, const ClassifiedRow& row) {
    const TreeNode* node = &tree;
    while (!node->is_leaf()) {
        if (node->kind == TreeNode::Kind::Numeric) {
            node = &node->children[row.number(node->feature) <= node->threshold ? 0 : 1];
        } else {
            const auto& cats = node->categories;
            auto it = std::find(cats.begin(), cats.end(), row.category(node->feature));
            node = &node->children[it == cats.end() ? node->majority_child : static_cast<std::size_t>(it - cats.begin())];
        }
    }
    return node->cls;
}

struct Evaluation {
    double accuracy = 0.0;
    // confusion[actual][predicted], index 0 = Pareto, 1 = notPareto
    std::array<std::array<std::size_t, 2>, 2> confusion{};
};

inline Evaluation evaluate(const TreeNode& tree, std::span<const ClassifiedRow> rows) {
    if (rows.empty()) throw EmptyDataset("cannot evaluate on zero rows");
    Evaluation ev;
    std::size_t correct = 0;
    for (const auto& r : rows) {
        const DecisionClass p = predict(tree, r);
        ++ev.confusion[class_index(r.cls)][class_index(p)];
        if (p == r.cls) ++correct;
    }
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());
    return ev;
}

struct Split {
    std::vector<ClassifiedRow> train;
    std::vector<ClassifiedRow> validation;
};

/// Stratified split: each class contributes round(fraction * size) rows to the
/// training part, chosen by a seeded shuffle. Row order within each part
/// follows the input order.
inline Split stratified_split(std::span<const ClassifiedRow> rows, double train_fraction = 0.66,
                              std::uint64_t seed = 0) {
    if (rows.empty()) throw EmptyDataset("cannot split zero rows");
    std::mt19937_64 rng(seed);
    std::vector<char> in_train(rows.size(), 0);
    for (DecisionClass c : {DecisionClass::Pareto, DecisionClass::NotPareto}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].cls == c) members.push_back(i);
        std::shuffle(members.begin(), members.end(), rng);
        const auto take = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
        for (std::size_t k = 0; k < take; ++k) in_train[members[k]] = 1;
    }
    Split s;
    for (std::size_t i = 0; i < rows.size(); ++i) (in_train[i] ? s.train : s.validation).push_back(rows[i]);
    return s;
}

namespace detail {

inline std::string format_count(double v) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << v;
    return os.str();
}

inline std::string leaf_label(const TreeNode& n) {
    const double errors = n.cls == DecisionClass::Pareto ? n.counts[1] : n.counts[0];
    std::string s = std::string(humsearch::to_string(n.cls)) + " (" + format_count(n.total());
    if (errors > 0.0) s += "/" + format_count(errors);
    return s + ")";
}

inline void write_text(std::ostream& out, const TreeNode& n, int depth) {
    for (std::size_t k = 0; k < n.children.size(); ++k) {
        for (int d = 0; d < depth; ++d) out << "|   ";
        out << to_string(n.feature);
        if (n.kind == TreeNode::Kind::Numeric) {
            out << (k == 0 ? " <= " : " > ") << format_double(n.threshold);
        } else {
            out << " = " << n.categories[k];
        }
        const TreeNode& child = n.children[k];
        if (child.is_leaf()) {
            out << ": " << leaf_label(child) << '\n';
        } else {
            out << '\n';
            write_text(out, child, depth + 1);
        }
    }
}

}  // namespace detail

/// Indented text in the familiar Weka J48 layout.
inline std::string to_text(const TreeNode& tree) {
    std::ostringstream out;
    if (tree.is_leaf()) {
        out << ": " << detail::leaf_label(tree) << '\n';
    } else {
        detail::write_text(out, tree, 0);
    }
    out << "\nNumber of Leaves  : " << tree.leaf_count() << "\n\nSize of the tree : " << tree.node_count() << '\n';
    return out.str();
}

inline nlohmann::ordered_json to_json(const TreeNode& n) {
    nlohmann::ordered_json j;
    j["counts"] = {{"Pareto", n.counts[0]}, {"notPareto", n.counts[1]}};
    if (n.is_leaf()) {
        j["class"] = humsearch::to_string(n.cls);
        return j;
    }
    j["feature"] = to_string(n.feature);
    auto children = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < n.children.size(); ++k) {
        nlohmann::ordered_json c;
        if (n.kind == TreeNode::Kind::Numeric) {
            c["op"] = k == 0 ? "<=" : ">";
            c["value"] = n.threshold;
        } else {
            c["op"] = "=";
            c["value"] = n.categories[k];
        }
        c["node"] = to_json(n.children[k]);
        children.push_back(std::move(c));
    }
    j["children"] = std::move(children);
    return j;
}

}  // namespace humsearch::dtree
