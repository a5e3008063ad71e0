#pragma once

// The analysis dataset: one row per (decision, uncertainty measure), stored
// as CSV with header  tf,user,iter,uq,dst,cum.reward,class,acr.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "humsearch/errors.hpp"
#include "humsearch/rationality.hpp"

namespace humsearch {

struct RationalityRecord {
    std::string tf;
    std::string user;
    int iter = 0;  // index of the analysed decision, n + 1
    UncertaintyMeasure uq = UncertaintyMeasure::SD;
    double dst = 0.0;
    double cum_reward = 0.0;
    double acr = 0.0;
    DecisionClass cls = DecisionClass::NotPareto;

    [[nodiscard]] int history_size() const noexcept { return iter - 1; }

    friend bool operator==(const RationalityRecord&, const RationalityRecord&) = default;
};

/// Canonical order: user, problem, iter, measure.
inline bool record_less(const RationalityRecord& a, const RationalityRecord& b) {
    return std::tie(a.user, a.tf, a.iter, a.uq) < std::tie(b.user, b.tf, b.iter, b.uq);
}

inline constexpr std::array<std::string_view, 8> record_columns{"tf",  "user",      "iter",  "uq",
                                                                 "dst", "cum.reward", "class", "acr"};

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline double parse_double(const std::string& s, std::size_t line, std::string_view column) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw ParseError(line, "column '" + std::string(column) + "': not a number: '" + s + "'");
    }
    return v;
}

inline int parse_int(const std::string& s, std::size_t line, std::string_view column) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(line, "column '" + std::string(column) + "': not an integer: '" + s + "'");
    }
    return v;
}

}  // namespace detail

inline void write_records(std::ostream& out, std::span<const RationalityRecord> records) {
    out << "tf,user,iter,uq,dst,cum.reward,class,acr\n";
    for (const auto& r : records) {
        out << r.tf << ',' << r.user << ',' << r.iter << ',' << to_string(r.uq) << ',' << format_double(r.dst) << ','
            << format_double(r.cum_reward) << ',' << to_string(r.cls) << ',' << format_double(r.acr) << '\n';
    }
}

inline void save_records(const std::string& path, std::span<const RationalityRecord> records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoError", "cannot open '" + path + "' for writing");
    write_records(out, records);
}

/// Reads records. `aliases` maps a canonical column name to the name used in
/// the file header, for datasets with a different column vocabulary. A file
/// without an `acr` column gets acr = cum.reward / (iter - 1).
inline std::vector<RationalityRecord> read_records(std::istream& in,
                                                   const std::map<std::string, std::string>& aliases = {}) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("records file is empty (missing header)");
    const auto header = detail::split_csv_line(line);
    std::map<std::string, std::size_t> index;
    for (std::string_view col : record_columns) {
        const std::string wanted = aliases.contains(std::string(col)) ? aliases.at(std::string(col)) : std::string(col);
        auto it = std::find(header.begin(), header.end(), wanted);
        if (it == header.end()) {
            if (col == "acr") continue;
            throw SchemaError("records header lacks column '" + wanted + "'");
        }
        index[std::string(col)] = static_cast<std::size_t>(it - header.begin());
    }

    std::vector<RationalityRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != header.size()) {
            throw ParseError(lineno, "expected " + std::to_string(header.size()) + " fields, got " +
                                         std::to_string(f.size()));
        }
        RationalityRecord r;
        r.tf = f[index.at("tf")];
        r.user = f[index.at("user")];
        r.iter = detail::parse_int(f[index.at("iter")], lineno, "iter");
        try {
            r.uq = parse_measure(f[index.at("uq")]);
            r.cls = parse_class(f[index.at("class")]);
        } catch (const SchemaError& e) {
            throw ParseError(lineno, e.what());
        }
        r.dst = detail::parse_double(f[index.at("dst")], lineno, "dst");
        r.cum_reward = detail::parse_double(f[index.at("cum.reward")], lineno, "cum.reward");
        if (r.iter < 2) throw ParseError(lineno, "iter must be at least 2");
        r.acr = index.contains("acr") ? detail::parse_double(f[index.at("acr")], lineno, "acr")
                                      : r.cum_reward / static_cast<double>(r.iter - 1);
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<RationalityRecord> load_records(const std::string& path,
                                                   const std::map<std::string, std::string>& aliases = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open '" + path + "'");
    return read_records(in, aliases);
}

}  // namespace humsearch
