#pragma once

// Decile behavioural signatures: for each test function (or player), a
// 10-bin histogram of subjects by their share of Pareto-rational decisions.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "humsearch/errors.hpp"
#include "humsearch/records.hpp"
#include "humsearch/testbed.hpp"
#include "humsearch/wasserstein.hpp"

namespace humsearch {

enum class SignatureAxis { Function, User };

inline std::string_view to_string(SignatureAxis a) { return a == SignatureAxis::Function ? "function" : "user"; }

inline constexpr std::size_t kDeciles = 10;

struct DecileSignature {
    SignatureAxis axis = SignatureAxis::Function;
    std::string subject;
    UncertaintyMeasure measure = UncertaintyMeasure::SD;
    std::array<double, kDeciles> counts{};

    [[nodiscard]] double total() const {
        double s = 0.0;
        for (double c : counts) s += c;
        return s;
    }

    /// Normalized histogram on bin indices 0..9.
    [[nodiscard]] DiscreteDistribution distribution() const { return DiscreteDistribution::histogram(counts); }
};

/// Decile of a Pareto share: [10(b-1)%, 10b%) for b = 1..9, and [90%, 100%]
/// for the top bin. Returned 0-based. Integer arithmetic keeps edges exact.
inline std::size_t decile_bin(std::size_t pareto, std::size_t total) {
    if (total == 0) throw EmptyRecords("decile of an empty record set");
    return std::min<std::size_t>(kDeciles - 1, (10 * pareto) / total);
}

inline double pareto_percentage(std::span<const RationalityRecord> records) {
    if (records.empty()) throw EmptyRecords("no records for the requested subject/task/measure");
    const auto pareto = std::count_if(records.begin(), records.end(),
                                      [](const RationalityRecord& r) { return r.cls == DecisionClass::Pareto; });
    return 100.0 * static_cast<double>(pareto) / static_cast<double>(records.size());
}

/// For axis = Function the subject is a test function and each player adds
/// one count; for axis = User the subject is a player and each problem adds one.
inline DecileSignature build_signature(std::span<const RationalityRecord> dataset, SignatureAxis axis,
                                       const std::string& subject, UncertaintyMeasure measure) {
    if (dataset.empty()) throw EmptyRecords("empty dataset");
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_member;  // pareto, total
    for (const auto& r : dataset) {
        if (r.uq != measure) continue;
        const std::string& key = axis == SignatureAxis::Function ? r.tf : r.user;
        if (key != subject) continue;
        auto& [p, t] = per_member[axis == SignatureAxis::Function ? r.user : r.tf];
        ++t;
        if (r.cls == DecisionClass::Pareto) ++p;
    }
    if (per_member.empty()) {
        throw UnknownSubject("no " + std::string(to_string(measure)) + " records for " + std::string(to_string(axis)) +
                             " '" + subject + "'");
    }
    DecileSignature sig{axis, subject, measure, {}};
    for (const auto& [member, pt] : per_member) sig.counts[decile_bin(pt.first, pt.second)] += 1.0;
    return sig;
}

inline DecileSignature ideal_signature(SignatureAxis axis, double mass = 1.0) {
    DecileSignature sig{axis, "ideal", UncertaintyMeasure::SD, {}};
    sig.counts.back() = mass;
    return sig;
}

inline const DiscreteDistribution& ideal_distribution() {
    static const DiscreteDistribution ideal = ideal_signature(SignatureAxis::Function).distribution();
    return ideal;
}

inline double distance_from_ideal(const DiscreteDistribution& d) { return emd(d, ideal_distribution(), 1).distance; }

inline double distance_from_ideal(const DecileSignature& sig) { return distance_from_ideal(sig.distribution()); }

/// Subjects present on an axis. Test functions keep the canonical testbed
/// order; anything else sorts lexicographically.
inline std::vector<std::string> subjects(std::span<const RationalityRecord> dataset, SignatureAxis axis) {
    std::set<std::string> seen;
    for (const auto& r : dataset) seen.insert(axis == SignatureAxis::Function ? r.tf : r.user);
    std::vector<std::string> out;
    if (axis == SignatureAxis::Function) {
        for (const auto& p : list_problems()) {
            if (seen.erase(p.id())) out.push_back(p.id());
        }
    }
    out.insert(out.end(), seen.begin(), seen.end());
    return out;
}

struct AxisMeasureAnalysis {
    SignatureAxis axis;
    UncertaintyMeasure measure;
    std::vector<DecileSignature> signatures;
    std::vector<double> ideal_distance;
    DiscreteDistribution barycenter;
    double barycenter_ideal_distance = 0.0;
    KMeansResult clusters;
    std::vector<int> cluster_label;  // 1-based; cluster 1 has the barycenter closest to the ideal
};

struct SignatureReport {
    std::vector<AxisMeasureAnalysis> analyses;

    [[nodiscard]] const AxisMeasureAnalysis& get(SignatureAxis axis, UncertaintyMeasure measure) const {
        for (const auto& a : analyses)
            if (a.axis == axis && a.measure == measure) return a;
        throw UnknownSubject("no analysis for the requested axis/measure");
    }
};

inline AxisMeasureAnalysis analyze_axis(std::span<const RationalityRecord> dataset, SignatureAxis axis,
                                        UncertaintyMeasure measure, const KMeansOptions& kmeans) {
    AxisMeasureAnalysis a{axis, measure, {}, {}, {}, 0.0, {}, {}};
    for (const auto& s : subjects(dataset, axis)) {
        try {
            a.signatures.push_back(build_signature(dataset, axis, s, measure));
        } catch (const UnknownSubject&) {
            continue;  // subject has no records under this measure
        }
        a.ideal_distance.push_back(distance_from_ideal(a.signatures.back()));
    }
    if (a.signatures.empty()) throw EmptyRecords("no signatures for measure " + std::string(to_string(measure)));

    std::vector<DiscreteDistribution> dists;
    for (const auto& s : a.signatures) dists.push_back(s.distribution());
    a.barycenter = barycenter(dists);
    a.barycenter_ideal_distance = distance_from_ideal(a.barycenter);

    KMeansOptions opts = kmeans;
    opts.k = std::min(opts.k, dists.size());
    a.clusters = wst_kmeans(dists, opts);

    std::vector<std::size_t> order(opts.k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> closeness(opts.k);
    for (std::size_t c = 0; c < opts.k; ++c) closeness[c] = distance_from_ideal(a.clusters.barycenters[c]);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return closeness[x] < closeness[y]; });
    std::vector<int> rank(opts.k);
    for (std::size_t r = 0; r < opts.k; ++r) rank[order[r]] = static_cast<int>(r + 1);
    for (std::size_t assigned : a.clusters.assignments) a.cluster_label.push_back(rank[assigned]);
    return a;
}

inline SignatureReport signature_report(std::span<const RationalityRecord> dataset, const KMeansOptions& kmeans = {}) {
    if (dataset.empty()) throw EmptyRecords("signature report on an empty dataset");
    SignatureReport report;
    for (SignatureAxis axis : {SignatureAxis::Function, SignatureAxis::User}) {
        for (UncertaintyMeasure m : {UncertaintyMeasure::H, UncertaintyMeasure::SD, UncertaintyMeasure::Z}) {
            report.analyses.push_back(analyze_axis(dataset, axis, m, kmeans));
        }
    }
    return report;
}

/// Writes signatures_<axis>_<measure>.csv, ideal_distance_<axis>.csv,
/// clusters_<axis>_<measure>.csv and barycenters_<axis>.csv into `dir`.
inline void write_signature_report(const SignatureReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const std::string& name) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw Error("IoError", "cannot write " + (dir / name).string());
        return out;
    };
    for (SignatureAxis axis : {SignatureAxis::Function, SignatureAxis::User}) {
        const std::string ax(to_string(axis));
        std::map<std::string, std::map<UncertaintyMeasure, double>> table;
        std::vector<std::string> row_order;
        std::map<UncertaintyMeasure, double> bary_row;
        auto bary_out = open("barycenters_" + ax + ".csv");
        bary_out << "measure";
        for (std::size_t b = 1; b <= kDeciles; ++b) bary_out << ",w" << b;
        bary_out << '\n';

        for (const auto& a : report.analyses) {
            if (a.axis != axis) continue;
            const std::string ms(to_string(a.measure));
            auto sig_out = open("signatures_" + ax + "_" + ms + ".csv");
            sig_out << "id";
            for (std::size_t b = 1; b <= kDeciles; ++b) sig_out << ",c" << b;
            sig_out << '\n';
            auto cl_out = open("clusters_" + ax + "_" + ms + ".csv");
            cl_out << "id,cluster,ideal_distance\n";
            for (std::size_t i = 0; i < a.signatures.size(); ++i) {
                const auto& s = a.signatures[i];
                sig_out << s.subject;
                for (double c : s.counts) sig_out << ',' << format_double(c);
                sig_out << '\n';
                cl_out << s.subject << ',' << a.cluster_label[i] << ',' << format_double(a.ideal_distance[i]) << '\n';
                if (!table.contains(s.subject)) row_order.push_back(s.subject);
                table[s.subject][a.measure] = a.ideal_distance[i];
            }
            bary_row[a.measure] = a.barycenter_ideal_distance;
            bary_out << ms;
            for (double w : a.barycenter.weights()) bary_out << ',' << format_double(w);
            bary_out << '\n';
        }

        auto id_out = open("ideal_distance_" + ax + ".csv");
        id_out << "id,H,SD,Z\n";
        auto cell = [](const std::map<UncertaintyMeasure, double>& row, UncertaintyMeasure m) {
            auto it = row.find(m);
            return it == row.end() ? std::string() : format_double(it->second);
        };
        for (const auto& id : row_order) {
            const auto& row = table[id];
            id_out << id << ',' << cell(row, UncertaintyMeasure::H) << ',' << cell(row, UncertaintyMeasure::SD) << ','
                   << cell(row, UncertaintyMeasure::Z) << '\n';
        }
        id_out << "Barycenter," << cell(bary_row, UncertaintyMeasure::H) << ',' << cell(bary_row, UncertaintyMeasure::SD)
               << ',' << cell(bary_row, UncertaintyMeasure::Z) << '\n';
    }
}

}  // namespace humsearch
