// Command-line entry point for the active-perception toolkit. Subcommands:
//   train       learn one policy per seed, writing checkpoints and curves
//   eval        deterministic benchmark of a method over the seed grid
//   icr         trajectory-optimization baseline (eval with method = icr)
//   trajectory  export a single-episode JSON log for plotting
//   selftest    fast oracle/invariant battery, PASS/FAIL per check
//
// Configuration starts from the scenario preset, then an optional JSON file
// (with include chains), then command-line flags; later layers win. Errors
// end with a single machine-readable JSON line on stderr and a nonzero exit.
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ap/common.hpp"
#include "ap/config.hpp"
#include "ap/experiment.hpp"

#include "selftest.hpp"

namespace {

struct CliArgs {
    std::string config_path;
    std::string scenario;
    std::string method;
    std::vector<uint64_t> seeds;
    int episodes = 0;
    int steps = 0;
    std::string out_dir;
    int workers = 0;
    std::string checkpoint;
    uint64_t episode_seed = 0;
};

void add_common_options(CLI::App* sub, CliArgs& args) {
    sub->add_option("-c,--config", args.config_path, "experiment JSON file (supports include)")
        ->check(CLI::ExistingFile);
    sub->add_option("--scenario", args.scenario, "scenario preset")
        ->check(CLI::IsMember(ap::scenario_names()));
    sub->add_option("--method", args.method, "method to run")
        ->check(CLI::IsMember(ap::method_names()));
    sub->add_option("--seed", args.seeds, "model seeds (repeat or comma-separate)")
        ->delimiter(',');
    sub->add_option("--episodes", args.episodes, "evaluation episodes per model");
    sub->add_option("--steps", args.steps, "training budget in environment steps");
    sub->add_option("--out-dir", args.out_dir, "artifact directory")->envname("APX_OUT_DIR");
    sub->add_option("--workers", args.workers, "planner worker threads (0 = automatic)")
        ->envname("APX_WORKERS");
    sub->add_flag("--motion-noise", "enable actuation noise (sigma 0.1)");
    sub->add_flag("--paper-scale", "use the full-scale 1M-step training budget");
}

ap::ExperimentConfig build_config(const CLI::App* sub, const CliArgs& args) {
    ap::Json doc = args.config_path.empty() ? ap::Json::object()
                                            : ap::load_experiment_json(args.config_path);
    ap::Json overlay = ap::Json::object();
    if (sub->count("--scenario") > 0) overlay["scenario"] = args.scenario;
    if (sub->count("--method") > 0) overlay["method"] = args.method;
    if (sub->count("--seed") > 0) overlay["seeds"] = args.seeds;
    if (sub->count("--episodes") > 0) overlay["episodes_per_model"] = args.episodes;
    if (sub->count("--out-dir") > 0) overlay["out_dir"] = args.out_dir;
    if (sub->count("--workers") > 0) overlay["workers"] = args.workers;
    if (sub->count("--motion-noise") > 0) overlay["motion_noise"] = true;
    if (sub->count("--paper-scale") > 0) overlay["paper_scale"] = true;
    if (sub->count("--steps") > 0) overlay["train"] = ap::Json{{"total_env_steps", args.steps}};
    ap::merge_json(doc, overlay);
    return ap::experiment_from_json(doc);
}

int fail_json(const char* kind, const std::string& message) {
    ap::Json j;
    j["error"] = kind;
    j["message"] = message;
    std::fprintf(stderr, "%s\n", j.dump().c_str());
    return kind == std::string("config") ? 2 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"active landmark localization and exploration toolkit"};
    app.require_subcommand(1);
    CliArgs args;

    CLI::App* train = app.add_subcommand("train", "train one policy per seed");
    CLI::App* eval = app.add_subcommand("eval", "evaluate the configured method");
    CLI::App* icr = app.add_subcommand("icr", "run the trajectory-optimization baseline");
    CLI::App* traj = app.add_subcommand("trajectory", "export one episode as JSON");
    CLI::App* self = app.add_subcommand("selftest", "run the built-in sanity battery");
    for (CLI::App* sub : {train, eval, icr, traj}) add_common_options(sub, args);
    traj->add_option("--checkpoint", args.checkpoint, "explicit checkpoint path");
    traj->add_option("--episode-seed", args.episode_seed, "seed of the exported episode");

    CLI11_PARSE(app, argc, argv);

    try {
        if (self->parsed()) {
            return run_selftest() == 0 ? 0 : 1;
        }
        if (train->parsed()) {
            const ap::TrainOutput out = ap::cmd_train(build_config(train, args));
            for (size_t i = 0; i < out.checkpoint_paths.size(); ++i) {
                std::printf("checkpoint %s\n", out.checkpoint_paths[i].c_str());
                std::printf("curve %s\n", out.curve_paths[i].c_str());
            }
            return 0;
        }
        if (eval->parsed() || icr->parsed()) {
            ap::ExperimentConfig config = build_config(eval->parsed() ? eval : icr, args);
            if (icr->parsed()) config.method = "icr";
            const ap::ResultRow row = ap::cmd_eval(config);
            std::printf("%s\n", ap::results_text(row).c_str());
            std::printf("results %s\n", ap::results_path(config).c_str());
            return 0;
        }
        const ap::ExperimentConfig config = build_config(traj, args);
        const std::string path = ap::cmd_trajectory(config, args.checkpoint, args.episode_seed);
        std::printf("trajectory %s\n", path.c_str());
        return 0;
    } catch (const ap::ConfigError& e) {
        return fail_json("config", e.what());
    } catch (const ap::ContractError& e) {
        return fail_json("contract", e.what());
    } catch (const std::exception& e) {
        return fail_json("internal", e.what());
    }
}
