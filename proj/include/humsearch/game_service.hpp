#pragma once

// The search game: sessions with a 20-shot budget, scored by the testbed.
// Each session keeps an append-only JSONL event log (fsynced before a click is
// acknowledged); finished sessions are also compacted into one JSON document.
// Players address tasks by index and click in unit coordinates, so neither the
// problem name nor its domain is revealed until export.

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "humsearch/errors.hpp"
#include "humsearch/pipeline.hpp"
#include "humsearch/testbed.hpp"

namespace humsearch {

enum class SessionState { Active, Finished };

inline std::string_view to_string(SessionState s) { return s == SessionState::Active ? "active" : "finished"; }

struct ShotRecord {
    std::size_t index = 0;  // 1-based shot number
    Point2 u{};             // unit-square location as sent by the player
    Point2 x{};             // location in the problem domain
    double score = 0.0;
    std::int64_t t = 0;

    friend bool operator==(const ShotRecord&, const ShotRecord&) = default;
};

struct SessionSnapshot {
    std::string id;
    std::string user_id;
    std::size_t task_index = 0;
    std::string problem_id;
    std::vector<ShotRecord> shots;
    std::size_t budget = kShotBudget;
    SessionState state = SessionState::Active;
    std::int64_t created = 0;

    [[nodiscard]] std::size_t shots_remaining() const { return budget - shots.size(); }
    [[nodiscard]] std::optional<double> best_score() const {
        if (shots.empty()) return std::nullopt;
        double b = shots.front().score;
        for (const auto& s : shots) b = std::max(b, s.score);
        return b;
    }

    friend bool operator==(const SessionSnapshot&, const SessionSnapshot&) = default;
};

struct ClickResult {
    std::size_t index = 0;
    double score = 0.0;
    std::size_t shots_remaining = 0;
    double best_score = 0.0;
    SessionState state = SessionState::Active;
};

struct ServiceOptions {
    std::filesystem::path data_dir = "humsearch-data";
    std::size_t budget = kShotBudget;
    bool shuffle_tasks = false;  // randomize the task-index -> problem mapping
    std::uint64_t seed = 0;      // task shuffle; session ids use it only when deterministic_ids is set
    bool deterministic_ids = false;
};

/// Player-facing view: task index and unit coordinates only.
inline nlohmann::ordered_json player_view(const SessionSnapshot& s) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["user_id"] = s.user_id;
    j["task_index"] = s.task_index;
    j["budget"] = s.budget;
    j["shots_remaining"] = s.shots_remaining();
    const auto best = s.best_score();
    j["best_score"] = best ? nlohmann::ordered_json(*best) : nlohmann::ordered_json(nullptr);
    j["state"] = to_string(s.state);
    auto shots = nlohmann::ordered_json::array();
    for (const auto& k : s.shots) shots.push_back({{"index", k.index}, {"x", {k.u[0], k.u[1]}}, {"score", k.score}});
    j["clicks"] = std::move(shots);
    return j;
}

inline GameSessionRecord to_session_record(const SessionSnapshot& s) {
    GameSessionRecord r{s.user_id, s.problem_id, {}, s.state == SessionState::Finished && s.shots.size() == kShotBudget};
    for (const auto& k : s.shots) r.clicks.push_back({k.x, k.score, k.t});
    return r;
}

namespace detail {

inline std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

/// Appends one line and fsyncs before returning.
inline void durable_append(const std::filesystem::path& path, const std::string& line) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw Error("IoError", "cannot open event log " + path.string());
    const std::string data = line + "\n";
    std::size_t done = 0;
    while (done < data.size()) {
        const ssize_t w = ::write(fd, data.data() + done, data.size() - done);
        if (w < 0) {
            ::close(fd);
            throw Error("IoError", "write failed on " + path.string());
        }
        done += static_cast<std::size_t>(w);
    }
    const int rc = ::fsync(fd);
    ::close(fd);
    if (rc != 0) throw Error("IoError", "fsync failed on " + path.string());
}

/// Writes via a temporary file and rename so readers never see a partial document.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = path.string() + ".tmp";
    {
        const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
        if (fd < 0) throw Error("IoError", "cannot write " + tmp);
        std::size_t done = 0;
        while (done < content.size()) {
            const ssize_t w = ::write(fd, content.data() + done, content.size() - done);
            if (w < 0) {
                ::close(fd);
                throw Error("IoError", "write failed on " + tmp);
            }
            done += static_cast<std::size_t>(w);
        }
        ::fsync(fd);
        ::close(fd);
    }
    std::filesystem::rename(tmp, path);
}

inline nlohmann::ordered_json snapshot_json(const SessionSnapshot& s) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["user_id"] = s.user_id;
    j["task_index"] = s.task_index;
    j["problem_id"] = s.problem_id;
    j["budget"] = s.budget;
    j["state"] = to_string(s.state);
    j["created"] = s.created;
    auto shots = nlohmann::ordered_json::array();
    for (const auto& k : s.shots) {
        shots.push_back({{"index", k.index}, {"u", {k.u[0], k.u[1]}}, {"x", {k.x[0], k.x[1]}}, {"score", k.score},
                         {"t", k.t}});
    }
    j["shots"] = std::move(shots);
    return j;
}

inline ShotRecord shot_from_json(const nlohmann::json& j) {
    ShotRecord k;
    k.index = j.at("index").get<std::size_t>();
    k.u = {j.at("u")[0].get<double>(), j.at("u")[1].get<double>()};
    k.x = {j.at("x")[0].get<double>(), j.at("x")[1].get<double>()};
    k.score = j.at("score").get<double>();
    k.t = j.at("t").get<std::int64_t>();
    return k;
}

}  // namespace detail

class GameService {
public:
    explicit GameService(ServiceOptions options) : options_(std::move(options)), rng_(options_.seed) {
        if (options_.budget == 0 || options_.budget > kShotBudget) throw InvalidSpec("budget must be in 1..20");
        task_order_.resize(list_problems().size());
        std::iota(task_order_.begin(), task_order_.end(), std::size_t{0});
        if (options_.shuffle_tasks) {
            std::mt19937_64 shuffle_rng(options_.seed);
            std::shuffle(task_order_.begin(), task_order_.end(), shuffle_rng);
        }
        std::filesystem::create_directories(events_dir());
        std::filesystem::create_directories(store_dir());
        recover();
    }

    GameService(const GameService&) = delete;
    GameService& operator=(const GameService&) = delete;

    [[nodiscard]] std::size_t task_count() const { return task_order_.size(); }
    [[nodiscard]] std::size_t budget() const { return options_.budget; }

    /// Problem behind a 1-based task index.
    [[nodiscard]] const TestProblem& task_problem(std::size_t task_index) const {
        if (task_index < 1 || task_index > task_order_.size()) {
            throw UnknownProblem("task index " + std::to_string(task_index) + " is not in 1.." +
                                 std::to_string(task_order_.size()));
        }
        return list_problems()[task_order_[task_index - 1]];
    }

    SessionSnapshot create_session(const std::string& user_id, std::size_t task_index) {
        if (user_id.empty()) throw SchemaError("user_id must be a nonempty string");
        const TestProblem& problem = task_problem(task_index);
        auto live = std::make_shared<Live>();
        live->snap.user_id = user_id;
        live->snap.task_index = task_index;
        live->snap.problem_id = problem.id();
        live->snap.budget = options_.budget;
        live->snap.created = detail::now_ms();

        std::unique_lock lock(map_mutex_);
        do {
            live->snap.id = new_id();
        } while (sessions_.contains(live->snap.id));
        nlohmann::ordered_json ev{{"event", "create"},          {"id", live->snap.id},
                                  {"user_id", user_id},         {"task_index", task_index},
                                  {"problem_id", problem.id()}, {"budget", options_.budget},
                                  {"t", live->snap.created}};
        detail::durable_append(event_path(live->snap.id), ev.dump());
        sessions_.emplace(live->snap.id, live);
        return live->snap;
    }

    /// Scores a click given in unit coordinates. The shot is durable before this returns.
    ClickResult submit_click(const std::string& id, const Point2& u) {
        auto live = find(id);
        std::lock_guard guard(live->mutex);
        SessionSnapshot& s = live->snap;
        if (s.state == SessionState::Finished) throw SessionFinished("session " + id + " is finished");
        if (!(u[0] >= 0.0 && u[0] <= 1.0 && u[1] >= 0.0 && u[1] <= 1.0)) {
            throw OutOfBounds("click must lie in the unit square");
        }
        const TestProblem& problem = find_problem(s.problem_id);
        ShotRecord shot;
        shot.index = s.shots.size() + 1;
        shot.u = u;
        shot.x = from_unit(problem.bounds(), u);
        shot.score = problem.score(shot.x);
        shot.t = detail::now_ms();
        nlohmann::ordered_json ev{{"event", "click"}, {"index", shot.index},  {"u", {u[0], u[1]}},
                                  {"x", {shot.x[0], shot.x[1]}}, {"score", shot.score}, {"t", shot.t}};
        detail::durable_append(event_path(id), ev.dump());
        s.shots.push_back(shot);
        if (s.shots.size() >= s.budget) {
            s.state = SessionState::Finished;
            compact(s);
        }
        return {shot.index, shot.score, s.shots_remaining(), *s.best_score(), s.state};
    }

    /// Ends a session before its budget is spent.
    SessionSnapshot close_session(const std::string& id) {
        auto live = find(id);
        std::lock_guard guard(live->mutex);
        SessionSnapshot& s = live->snap;
        if (s.state == SessionState::Finished) return s;
        detail::durable_append(event_path(id), nlohmann::ordered_json{{"event", "close"}, {"t", detail::now_ms()}}.dump());
        s.state = SessionState::Finished;
        compact(s);
        return s;
    }

    [[nodiscard]] SessionSnapshot get(const std::string& id) const {
        auto live = find(id);
        std::lock_guard guard(live->mutex);
        return live->snap;
    }

    [[nodiscard]] std::vector<SessionSnapshot> all_sessions() const {
        std::vector<std::shared_ptr<Live>> lives;
        {
            std::shared_lock lock(map_mutex_);
            for (const auto& [id, l] : sessions_) lives.push_back(l);
        }
        std::vector<SessionSnapshot> out;
        for (const auto& l : lives) {
            std::lock_guard guard(l->mutex);
            out.push_back(l->snap);
        }
        std::sort(out.begin(), out.end(), [](const SessionSnapshot& a, const SessionSnapshot& b) {
            return std::tie(a.created, a.id) < std::tie(b.created, b.id);
        });
        return out;
    }

    /// Finished sessions in the analysis schema, one JSON document per line.
    [[nodiscard]] std::string export_jsonl(const std::optional<std::string>& user_id = std::nullopt) const {
        std::ostringstream out;
        for (const auto& s : all_sessions()) {
            if (s.state != SessionState::Finished || s.shots.empty()) continue;
            if (user_id && s.user_id != *user_id) continue;
            out << session_to_json(to_session_record(s)).dump() << '\n';
        }
        return out.str();
    }

    [[nodiscard]] const std::filesystem::path& data_dir() const { return options_.data_dir; }

private:
    struct Live {
        mutable std::mutex mutex;
        SessionSnapshot snap;
    };

    [[nodiscard]] std::filesystem::path events_dir() const { return options_.data_dir / "events"; }
    [[nodiscard]] std::filesystem::path store_dir() const { return options_.data_dir / "sessions"; }
    [[nodiscard]] std::filesystem::path event_path(const std::string& id) const {
        return events_dir() / (id + ".jsonl");
    }

    std::shared_ptr<Live> find(const std::string& id) const {
        std::shared_lock lock(map_mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw UnknownSession("no session '" + id + "'");
        return it->second;
    }

    std::string new_id() {
        std::uint64_t a = 0;
        std::uint64_t b = 0;
        if (options_.deterministic_ids) {
            a = rng_();
            b = rng_();
        } else {
            std::random_device rd;
            a = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
            b = (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^ static_cast<std::uint64_t>(detail::now_ms());
        }
        char buf[33];
        std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(a),
                      static_cast<unsigned long long>(b));
        return buf;
    }

    void compact(const SessionSnapshot& s) const {
        detail::atomic_write(store_dir() / (s.id + ".json"), detail::snapshot_json(s).dump(2) + "\n");
    }

    /// Rebuilds every session from its event log. A torn final line (a write
    /// that was never acknowledged) is ignored; stored scores are checked
    /// against the testbed.
    void recover() {
        if (!std::filesystem::exists(events_dir())) return;
        std::vector<std::filesystem::path> logs;
        for (const auto& e : std::filesystem::directory_iterator(events_dir()))
            if (e.path().extension() == ".jsonl") logs.push_back(e.path());
        std::sort(logs.begin(), logs.end());
        for (const auto& path : logs) {
            auto live = std::make_shared<Live>();
            SessionSnapshot& s = live->snap;
            std::ifstream in(path, std::ios::binary);
            std::vector<std::string> lines;
            for (std::string line; std::getline(in, line);)
                if (!line.empty()) lines.push_back(line);
            for (std::size_t i = 0; i < lines.size(); ++i) {
                nlohmann::json ev;
                try {
                    ev = nlohmann::json::parse(lines[i]);
                } catch (const nlohmann::json::parse_error&) {
                    if (i + 1 == lines.size()) break;
                    throw ParseError(i + 1, "corrupt event log " + path.string());
                }
                const std::string kind = ev.at("event").get<std::string>();
                if (kind == "create") {
                    s.id = ev.at("id").get<std::string>();
                    s.user_id = ev.at("user_id").get<std::string>();
                    s.task_index = ev.at("task_index").get<std::size_t>();
                    s.problem_id = ev.at("problem_id").get<std::string>();
                    s.budget = ev.at("budget").get<std::size_t>();
                    s.created = ev.at("t").get<std::int64_t>();
                } else if (kind == "click") {
                    ShotRecord k = detail::shot_from_json(ev);
                    if (k.index != s.shots.size() + 1) {
                        throw ParseError(i + 1, "event log " + path.string() + " skips a shot index");
                    }
                    const double expected = find_problem(s.problem_id).score(k.x);
                    if (std::abs(expected - k.score) > 1e-9 * std::max(1.0, std::abs(expected))) {
                        throw ParseError(i + 1, "stored score disagrees with the testbed in " + path.string());
                    }
                    s.shots.push_back(k);
                } else if (kind == "close") {
                    s.state = SessionState::Finished;
                }
            }
            if (s.id.empty()) continue;
            if (s.shots.size() >= s.budget) s.state = SessionState::Finished;
            if (s.state == SessionState::Finished && !std::filesystem::exists(store_dir() / (s.id + ".json"))) {
                compact(s);
            }
            sessions_.emplace(s.id, live);
        }
    }

    ServiceOptions options_;
    std::vector<std::size_t> task_order_;
    mutable std::shared_mutex map_mutex_;
    std::map<std::string, std::shared_ptr<Live>> sessions_;
    std::mt19937_64 rng_;
};

}  // namespace humsearch
