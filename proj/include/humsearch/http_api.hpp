#pragma once

// HTTP/JSON binding of GameService.

#include <filesystem>
#include <optional>
#include <string>

// Eigen-using headers must precede httplib: <resolv.h> defines a `_res` macro
// that collides with Eigen parameter names.
#include "humsearch/errors.hpp"
#include "humsearch/game_service.hpp"
#include "humsearch/humsearch.hpp"

#include <httplib.h>
#include <json.hpp>

namespace humsearch {

inline int http_status(const Error& e) {
    const std::string& c = e.code();
    if (c == "UnknownSession" || c == "UnknownProblem") return 404;
    if (c == "SessionFinished") return 409;
    if (c == "OutOfBounds") return 422;
    if (c == "SchemaError" || c == "ParseError") return 400;
    return 500;
}

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, {{"code", code}, {"message", message}});
}

inline nlohmann::json parse_body(const httplib::Request& req) {
    try {
        auto j = nlohmann::json::parse(req.body);
        if (!j.is_object()) throw SchemaError("request body must be a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("request body is not valid JSON: ") + e.what());
    }
}

template <class Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_error(res, http_status(e), e.code(), e.what());
        } catch (const nlohmann::json::exception& e) {
            send_error(res, 400, "SchemaError", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "InternalError", e.what());
        }
    };
}

}  // namespace detail

/// Installs the /api routes and, when `static_dir` exists, serves it at `/`.
inline void install_routes(httplib::Server& server, GameService& service,
                           const std::optional<std::filesystem::path>& static_dir = std::nullopt) {
    using detail::guarded;
    using detail::send_json;

    server.Get("/api/tasks", guarded([&service](const httplib::Request&, httplib::Response& res) {
                   auto tasks = nlohmann::ordered_json::array();
                   for (std::size_t i = 1; i <= service.task_count(); ++i) tasks.push_back({{"index", i}});
                   send_json(res, 200, {{"count", service.task_count()}, {"budget", service.budget()}, {"tasks", tasks}});
               }));

    server.Post("/api/sessions", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                    const auto body = detail::parse_body(req);
                    if (!body.contains("user_id") || !body["user_id"].is_string()) {
                        throw SchemaError("'user_id' must be a string");
                    }
                    if (!body.contains("task_index") || !body["task_index"].is_number_integer()) {
                        throw SchemaError("'task_index' must be an integer");
                    }
                    const auto idx = body["task_index"].get<long long>();
                    if (idx < 1) throw UnknownProblem("task index must be positive");
                    const auto s = service.create_session(body["user_id"].get<std::string>(),
                                                          static_cast<std::size_t>(idx));
                    send_json(res, 201, player_view(s));
                }));

    server.Post(R"(/api/sessions/([0-9a-f]+)/clicks)",
                guarded([&service](const httplib::Request& req, httplib::Response& res) {
                    const auto body = detail::parse_body(req);
                    if (!body.contains("x") || !body["x"].is_array() || body["x"].size() != 2 ||
                        !body["x"][0].is_number() || !body["x"][1].is_number()) {
                        throw SchemaError("'x' must be an array of two numbers");
                    }
                    const Point2 u{body["x"][0].get<double>(), body["x"][1].get<double>()};
                    const auto r = service.submit_click(req.matches[1], u);
                    send_json(res, 200,
                              {{"index", r.index},
                               {"score", r.score},
                               {"shots_remaining", r.shots_remaining},
                               {"best_score", r.best_score},
                               {"state", to_string(r.state)}});
                }));

    server.Post(R"(/api/sessions/([0-9a-f]+)/close)",
                guarded([&service](const httplib::Request& req, httplib::Response& res) {
                    send_json(res, 200, player_view(service.close_session(req.matches[1])));
                }));

    server.Get(R"(/api/sessions/([0-9a-f]+))", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                   send_json(res, 200, player_view(service.get(req.matches[1])));
               }));

    server.Get("/api/export", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                   std::optional<std::string> user;
                   if (req.has_param("user_id")) user = req.get_param_value("user_id");
                   res.status = 200;
                   res.set_content(service.export_jsonl(user), "application/x-ndjson");
               }));

    if (static_dir && std::filesystem::is_directory(*static_dir)) {
        server.set_mount_point("/", static_dir->string());
    }
}

}  // namespace humsearch
