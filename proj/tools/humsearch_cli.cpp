// humsearch: analyze recorded games, build reports, simulate players, serve the game.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "humsearch/humsearch.hpp"
#include "humsearch/http_api.hpp"

namespace fs = std::filesystem;
using namespace humsearch;

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server != nullptr) g_server->stop();
}

int run_analyze(const std::string& sessions_path, const fs::path& out_dir, const AnalysisOptions& options,
                std::uint64_t seed, bool quiet) {
    const auto sessions = load_sessions(sessions_path);
    const auto result = step1(sessions, options, [quiet](const GameSessionRecord& s, std::size_t i, std::size_t n) {
        if (!quiet) std::cerr << "[" << (i + 1) << "/" << n << "] " << s.user_id << " " << s.problem_id << '\n';
    });
    fs::create_directories(out_dir);
    save_records((out_dir / "records.csv").string(), result.records);
    {
        std::ofstream log(out_dir / "warnings.log", std::ios::binary);
        for (const auto& w : result.warnings) log << w << '\n';
    }
    nlohmann::ordered_json meta{{"sessions", sessions.size()},
                                {"records", result.records.size()},
                                {"warnings", result.warnings.size()},
                                {"threshold", options.threshold},
                                {"grid", options.grid_per_axis},
                                {"noise", options.gp.noise},
                                {"normalize_objectives", options.normalize_objectives},
                                {"seed", seed}};
    std::ofstream(out_dir / "analysis.json", std::ios::binary) << meta.dump(2) << '\n';
    std::cout << result.records.size() << " records from " << sessions.size() << " sessions -> "
              << (out_dir / "records.csv").string() << '\n';
    if (!result.warnings.empty()) std::cout << result.warnings.size() << " warnings (see warnings.log)\n";
    return 0;
}

int run_report(const std::string& records_path, const std::string& mapping, const fs::path& out_dir,
               const ReportOptions& options) {
    std::map<std::string, std::string> aliases;
    if (!mapping.empty()) {
        std::ifstream in(mapping);
        if (!in) throw Error("IoError", "cannot open mapping file '" + mapping + "'");
        try {
            aliases = nlohmann::json::parse(in).get<std::map<std::string, std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(std::string("mapping file must be a JSON object of strings: ") + e.what());
        }
    }
    const auto records = load_records(records_path, aliases);
    const auto bundle = step2(records, options);
    write_report(bundle, records, out_dir);
    for (const auto& [m, c] : bundle.by_measure) {
        std::cout << to_string(m) << ": " << c.pareto << "/" << c.total << " Pareto-rational\n";
    }
    for (const auto& t : bundle.trees) {
        std::cout << "tree " << t.name << ": size " << t.tree.node_count() << ", train " << t.train.accuracy
                  << ", validation " << t.validation.accuracy << '\n';
    }
    std::cout << "report -> " << out_dir.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"humsearch: Pareto rationality analysis of human search games"};
    app.require_subcommand(1);

    auto* analyze = app.add_subcommand("analyze", "Step 1: score each decision against the GP Pareto fronts");
    std::string sessions_path;
    std::string analyze_out;
    AnalysisOptions aopt;
    bool raw = false;
    bool quiet = false;
    std::uint64_t seed = 0;
    analyze->add_option("--sessions", sessions_path, "Sessions JSONL")->required()->check(CLI::ExistingFile);
    analyze->add_option("--out", analyze_out, "Output directory")->required();
    analyze->add_option("--threshold", aopt.threshold, "Pareto distance threshold")->capture_default_str();
    analyze->add_option("--grid", aopt.grid_per_axis, "Grid points per axis")->capture_default_str()->check(CLI::Range(2, 1000));
    analyze->add_option("--noise", aopt.gp.noise, "GP noise variance (standardized units)")->capture_default_str();
    analyze->add_flag("--raw-objectives", raw, "Measure distances without min-max normalization");
    analyze->add_option("--seed", seed, "Seed (the MLE search is deterministic)")->capture_default_str();
    analyze->add_flag("-q,--quiet", quiet, "No progress output");

    auto* report = app.add_subcommand("report", "Step 2: counts, signatures, clusters and decision trees");
    std::string records_path;
    std::string mapping;
    std::string report_out;
    ReportOptions ropt;
    std::string tree_measure;
    report->add_option("--records", records_path, "Records CSV")->required()->check(CLI::ExistingFile);
    report->add_option("--out", report_out, "Output directory")->required();
    report->add_option("--k", ropt.k, "Clusters for WST k-means")->capture_default_str();
    report->add_option("--cf", ropt.confidence_factor, "Second pruning confidence factor")->capture_default_str();
    report->add_option("--seed", ropt.seed, "Seed for k-means and the validation split")->capture_default_str();
    report->add_option("--tree-measure", tree_measure, "Measure for the tree dataset (default: most Pareto decisions)");
    report->add_option("--mapping", mapping, "JSON object mapping column names to the file's header names");

    auto* sim = app.add_subcommand("simulate", "Generate synthetic sessions as JSONL");
    std::string policy = "random";
    SimulationOptions sopt;
    std::string sim_out;
    sim->add_option("--policy", policy, "random or greedy")->capture_default_str();
    sim->add_option("--games", sopt.games, "Sessions per problem")->capture_default_str();
    sim->add_option("--seed", sopt.seed, "Seed")->capture_default_str();
    sim->add_option("--clicks", sopt.clicks, "Clicks per session (max 20)")->capture_default_str();
    sim->add_option("--out", sim_out, "Output file (default: stdout)");

    auto* serve = app.add_subcommand("serve", "Run the game service");
    std::string host = "127.0.0.1";
    int port = 8080;
    ServiceOptions svc;
    std::string data_dir = "humsearch-data";
    std::string static_dir;
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port)->capture_default_str();
    serve->add_option("--data", data_dir, "Session storage directory")->capture_default_str();
    serve->add_option("--static", static_dir, "UI bundle served at /");
    serve->add_flag("--shuffle-tasks", svc.shuffle_tasks, "Randomize which problem each task index shows");
    serve->add_option("--seed", svc.seed, "Seed for the task shuffle")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*analyze) {
            aopt.normalize_objectives = !raw;
            return run_analyze(sessions_path, analyze_out, aopt, seed, quiet);
        }
        if (*report) {
            if (!tree_measure.empty()) ropt.tree_measure = parse_measure(tree_measure);
            return run_report(records_path, mapping, report_out, ropt);
        }
        if (*sim) {
            sopt.policy = parse_policy(policy);
            const auto sessions = simulate(sopt);
            if (sim_out.empty()) {
                write_sessions(std::cout, sessions);
            } else {
                save_sessions(sim_out, sessions);
            }
            return 0;
        }
        if (*serve) {
            svc.data_dir = data_dir;
            GameService service(svc);
            httplib::Server server;
            install_routes(server, service, static_dir.empty() ? std::nullopt : std::optional<fs::path>(static_dir));
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "serving on http://" << host << ":" << port << '\n';
            if (!server.listen(host, port)) {
                std::cerr << "error: cannot listen on " << host << ":" << port << '\n';
                return 1;
            }
            return 0;
        }
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
