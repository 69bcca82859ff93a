#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <boost/asio/signal_set.hpp>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "flatpack/flatpack.hpp"

namespace fs = std::filesystem;
using namespace flatpack;

namespace {

// Exit codes shared by every subcommand.
constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

void print_json(const json& j) { std::cout << j.dump(2) << std::endl; }

json diagnostic_json(const Diagnostic& d) { return {{"code", d.code}, {"path", d.path}, {"message", d.message}}; }

int cmd_validate(const std::string& path, bool as_json) {
    if (!fs::exists(path)) {
        spdlog::error("no such file: {}", path);
        return kUsage;
    }
    json out = {{"path", path}};
    Diagnostics diag;
    try {
        const FurnitureModel m = parse_model(read_text_file(path));
        diag = validate_model(m);
        out["model"] = m.name;
    } catch (const Error& e) {
        diag.errors.push_back({std::string(to_string(e.code())), e.location(), e.detail()});
    }
    out["ok"] = diag.ok();
    out["errors"] = json::array();
    out["warnings"] = json::array();
    for (const auto& d : diag.errors) out["errors"].push_back(diagnostic_json(d));
    for (const auto& d : diag.warnings) out["warnings"].push_back(diagnostic_json(d));
    if (as_json) {
        print_json(out);
    } else {
        for (const auto& d : diag.errors) std::cout << "error " << d.code << " at " << d.path << ": " << d.message << "\n";
        for (const auto& d : diag.warnings)
            std::cout << "warning " << d.code << " at " << d.path << ": " << d.message << "\n";
        std::cout << path << ": " << (diag.ok() ? "ok" : "invalid") << " (" << diag.errors.size() << " errors, "
                  << diag.warnings.size() << " warnings)\n";
    }
    return diag.ok() ? kOk : kFailure;
}

struct RunArgs {
    std::string model = "block";
    std::string policy = "random";
    std::string mode = "continuous";
    std::string orientation = "yaw";
    int episodes = 1;
    std::uint64_t seed = 0;
    std::optional<int> max_steps;
    std::string record_dir;
    bool random_subset = false;
    bool collision_check = false;
    bool include_obs = false;
    bool as_json = false;
};

int cmd_run(const RunArgs& a) {
    EpisodeConfig cfg;
    cfg.model = a.model;
    cfg.mode = a.mode == "discrete" ? ActionMode::discrete : ActionMode::continuous;
    cfg.random_subset = a.random_subset;
    cfg.collision_check = a.collision_check;
    cfg.orientation_randomization = a.orientation == "none"   ? OrientationRandomization::none
                                    : a.orientation == "full" ? OrientationRandomization::full
                                                              : OrientationRandomization::yaw;
    std::shared_ptr<const FurnitureModel> model;
    try {
        model = find_model(a.model);
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return kUsage;
    }
    if (a.max_steps) {
        cfg.max_steps = *a.max_steps;
    } else if (a.policy == "oracle") {
        // The oracle's budget is 300 steps per connection; never cut it short.
        cfg.max_steps = std::max(cfg.max_steps, 300 * static_cast<int>(model->mate_pairs().size()));
    }
    std::optional<Env> env;
    try {
        env.emplace(model, cfg);
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return e.code() == Errc::invalid_model ? kFailure : kUsage;
    }
    if (!a.record_dir.empty()) {
        std::error_code ec;
        fs::create_directories(a.record_dir, ec);
        if (ec) {
            spdlog::error("cannot create record directory {}: {}", a.record_dir, ec.message());
            return kFailure;
        }
    }

    json episodes = json::array();
    int successes = 0;
    for (int i = 0; i < a.episodes; ++i) {
        const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(i);
        try {
            env->reset(seed);
            Policy policy;
            if (a.policy == "oracle")
                policy = OraclePolicy(*env);
            else
                policy = RandomPolicy(seed, cfg.mode);
            RecordSummary sum;
            json row = {{"seed", seed}};
            if (!a.record_dir.empty()) {
                const fs::path file = fs::path(a.record_dir) / (model->name + "_seed" + std::to_string(seed) + ".traj.jsonl");
                sum = record_episode(*env, seed, policy, file, {a.include_obs, -1});
                row["path"] = file.string();
            } else {
                Observation obs = env->observe();
                while (!env->done()) {
                    const StepResult r = env->step(policy(obs));
                    obs = r.observation;
                    ++sum.steps;
                    sum.episode_return += r.reward;
                    for (const auto& e : r.info.events) sum.connections += e.kind == "connected";
                }
                sum.success = env->success();
            }
            successes += sum.success;
            row["success"] = sum.success;
            row["steps"] = sum.steps;
            row["return"] = sum.episode_return;
            row["connections"] = sum.connections;
            if (!a.as_json)
                std::cout << "seed " << seed << "  success " << (sum.success ? "yes" : "no") << "  steps " << sum.steps
                          << "  return " << sum.episode_return << "\n";
            episodes.push_back(std::move(row));
        } catch (const Error& e) {
            spdlog::error("episode with seed {} failed: {}", seed, e.what());
            return kFailure;
        }
    }
    const double rate = static_cast<double>(successes) / a.episodes;
    if (a.as_json) {
        print_json({{"model", model->name},
                    {"policy", a.policy},
                    {"config", to_json(env->config())},
                    {"episodes", std::move(episodes)},
                    {"success_rate", rate}});
    } else {
        std::cout << "success rate " << rate << " (" << successes << "/" << a.episodes << ")\n";
    }
    return kOk;
}

int cmd_replay(const std::string& path, bool as_json) {
    if (!fs::exists(path)) {
        spdlog::error("no such file: {}", path);
        return kUsage;
    }
    json out = {{"path", path}};
    ReplayReport rep;
    try {
        rep = replay_check(path);
    } catch (const Error& e) {
        out["ok"] = false;
        out["error"] = {{"code", to_string(e.code())}, {"location", e.location()}, {"message", e.detail()}};
        if (as_json)
            print_json(out);
        else
            std::cout << path << ": " << e.what() << "\n";
        return kFailure;
    }
    for (const auto& w : rep.warnings) spdlog::warn("{}", w);
    out["ok"] = rep.ok;
    out["steps"] = rep.steps;
    out["warnings"] = rep.warnings;
    out["divergence"] = rep.divergence ? json(*rep.divergence) : json(nullptr);
    if (!rep.ok) out["reason"] = rep.reason;
    if (as_json) {
        print_json(out);
    } else if (rep.ok) {
        std::cout << path << ": ok (" << rep.steps << " steps)\n";
    } else {
        std::cout << path << ": diverged at step " << *rep.divergence << ": " << rep.reason << "\n";
    }
    return rep.ok ? kOk : kFailure;
}

struct ServeArgs {
    std::string host = "127.0.0.1";
    int port = 8765;
    std::string ui;
    std::string record_dir = "recordings";
    int idle_timeout_s = 600;
    int threads = 2;
    bool as_json = false;
};

int cmd_serve(const ServeArgs& a) {
    ServerOptions opts;
    opts.host = a.host;
    opts.port = static_cast<unsigned short>(a.port);
    if (!a.ui.empty()) opts.ui_dir = a.ui;
    opts.record_dir = a.record_dir;
    opts.idle_timeout = std::chrono::seconds(a.idle_timeout_s);
    opts.threads = a.threads;
    opts.log = [](const std::string& line) { spdlog::info("{}", line); };
    // Installed before binding so an early Ctrl-C still shuts down cleanly.
    boost::asio::io_context signals_ctx;
    boost::asio::signal_set signals(signals_ctx, SIGINT, SIGTERM);
    Server server(opts);
    try {
        server.start();
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return kFailure;
    }
    if (a.as_json)
        std::cout << json{{"host", a.host}, {"port", server.port()}}.dump() << std::endl;
    else
        std::cout << "listening on " << a.host << ":" << server.port() << std::endl;

    signals.async_wait([](const boost::system::error_code&, int sig) { spdlog::info("received signal {}", sig); });
    signals_ctx.run();
    server.stop();
    return kOk;
}

int cmd_models(bool as_json) {
    const auto models = list_bundled_models();
    if (as_json) {
        json arr = json::array();
        for (const auto& m : models) arr.push_back({{"name", m.name}, {"parts", m.part_count}, {"connectors", m.connector_count}});
        print_json({{"models", arr}});
    } else {
        for (const auto& m : models)
            std::cout << m.name << "  parts " << m.part_count << "  connectors " << m.connector_count << "\n";
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("flatpack");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%Y-%m-%d %H:%M:%S.%e] [%^%l%$] %v");

    CLI::App app{"flatpack: kinematic furniture-assembly simulator"};
    app.set_version_flag("--version", std::string(kEngineVersion));
    app.require_subcommand(1);
    bool as_json = false;
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a .furn.json model file");
    validate->add_option("path", validate_path, "Model file")->required();
    validate->add_flag("--json", as_json, "Machine-readable output on stdout");

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run headless episodes");
    run->add_option("--model", run_args.model, "Bundled model name or model in FLATPACK_MODEL_PATH")->capture_default_str();
    run->add_option("--policy", run_args.policy)->check(CLI::IsMember({"random", "oracle"}))->capture_default_str();
    run->add_option("--episodes", run_args.episodes)->check(CLI::PositiveNumber)->capture_default_str();
    run->add_option("--seed", run_args.seed, "Episode i uses seed S+i")->capture_default_str();
    run->add_option("--record", run_args.record_dir, "Write one .traj.jsonl per episode into this directory");
    run->add_option("--mode", run_args.mode)->check(CLI::IsMember({"continuous", "discrete"}))->capture_default_str();
    run->add_option("--orientation", run_args.orientation)
        ->check(CLI::IsMember({"none", "yaw", "full"}))
        ->capture_default_str();
    run->add_option("--max-steps", run_args.max_steps, "Episode step limit (oracle default: 300 per connection)")
        ->check(CLI::PositiveNumber);
    run->add_flag("--random-subset", run_args.random_subset, "Spawn a random connected subset of parts");
    run->add_flag("--collision-check", run_args.collision_check, "Reject moves that make parts overlap");
    run->add_flag("--include-obs", run_args.include_obs, "Store observations in recordings");
    run->add_flag("--json", as_json, "Machine-readable output on stdout");

    std::string replay_path;
    auto* replay = app.add_subcommand("replay", "Verify a recorded trajectory");
    replay->add_option("path", replay_path, "Trajectory file")->required();
    replay->add_flag("--json", as_json, "Machine-readable output on stdout");

    ServeArgs serve_args;
    auto* serve = app.add_subcommand("serve", "Run the WebSocket protocol server");
    serve->add_option("--host", serve_args.host)->capture_default_str();
    serve->add_option("--port", serve_args.port, "0 picks a free port")->check(CLI::Range(0, 65535))->capture_default_str();
    serve->add_option("--ui", serve_args.ui, "Directory of static client files served over HTTP")->check(CLI::ExistingDirectory);
    serve->add_option("--record-dir", serve_args.record_dir, "Root for session recordings")->capture_default_str();
    serve->add_option("--idle-timeout", serve_args.idle_timeout_s, "Seconds before idle sessions are dropped")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    serve->add_option("--threads", serve_args.threads)->check(CLI::Range(1, 256))->capture_default_str();
    serve->add_flag("--json", as_json, "Machine-readable output on stdout");

    auto* models = app.add_subcommand("models", "List bundled models");
    models->add_flag("--json", as_json, "Machine-readable output on stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*validate) return cmd_validate(validate_path, as_json);
        if (*run) {
            run_args.as_json = as_json;
            return cmd_run(run_args);
        }
        if (*replay) return cmd_replay(replay_path, as_json);
        if (*serve) {
            serve_args.as_json = as_json;
            return cmd_serve(serve_args);
        }
        if (*models) return cmd_models(as_json);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kFailure;
    }
    return kUsage;
}
