#include "ap/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <vector>

#include "ap/checkpoint.hpp"
#include "ap/common.hpp"
#include "ap/icr.hpp"
#include "ap/ppo.hpp"
#include "ap/rng.hpp"
#include "ap/trajectory.hpp"

namespace ap {
namespace {

// Seed-stream tags so policy initialization, benchmark episodes, random-action
// draws, and planner restarts never share a generator stream.
constexpr uint64_t kInitStream = 0x17;
constexpr uint64_t kBenchStream = 0xB3;
constexpr uint64_t kRandStream = 0xAC;
constexpr uint64_t kPlanStream = 0x1C;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

PolicyArch arch_for_method(const std::string& method, const WorldConfig& world) {
    if (method == "ppo-att") {
        return world.map_enabled ? PolicyArch::attention_joint : PolicyArch::attention;
    }
    if (method == "ppo-mlp") return PolicyArch::mlp;
    throw ConfigError("method '" + method + "' does not train a policy");
}

bool is_ppo(const std::string& method) { return method == "ppo-att" || method == "ppo-mlp"; }

void require_matching_spec(const PolicySpec& loaded, const PolicySpec& expected,
                           const std::string& path) {
    const bool ok = loaded.arch == expected.arch && loaded.n_l == expected.n_l &&
                    loaded.map_enabled == expected.map_enabled && loaded.map_h == expected.map_h &&
                    loaded.map_w == expected.map_w;
    if (!ok) {
        throw ConfigError("checkpoint '" + path +
                          "' was trained for a different scenario or architecture");
    }
}

struct EpisodeRecord {
    double reward = 0.0;
    double mae = 0.0;
};

ResultRow pool_records(const ExperimentConfig& config, const std::vector<EpisodeRecord>& records) {
    AP_CHECK(!records.empty(), "cannot pool an empty evaluation");
    double mean = 0.0;
    double mae = 0.0;
    for (const EpisodeRecord& r : records) {
        mean += r.reward;
        mae += r.mae;
    }
    mean /= static_cast<double>(records.size());
    mae /= static_cast<double>(records.size());
    double var = 0.0;
    for (const EpisodeRecord& r : records) var += (r.reward - mean) * (r.reward - mean);
    var /= static_cast<double>(records.size());

    ResultRow row;
    row.scenario = config.scenario;
    row.method = config.method;
    row.noise = config.world.motion_noise_std > 0.0;
    row.reward_mean = mean;
    row.reward_std = std::sqrt(var);
    row.mae = mae;
    row.episodes = static_cast<int>(records.size());
    return row;
}

IcrConfig effective_icr(const ExperimentConfig& config) {
    IcrConfig cfg = config.icr;
    if (config.workers != 0) cfg.workers = config.workers;
    return cfg;
}

Json plan_to_json(uint64_t episode_seed, const IcrPlan& plan) {
    Json j;
    j["episode_seed"] = episode_seed;
    j["objective"] = plan.objective;
    j["iterations"] = plan.iterations;
    j["restart_index"] = plan.restart_index;
    Json controls = Json::array();
    for (const Eigen::Vector2d& u : plan.controls) controls.push_back({u.x(), u.y()});
    j["controls"] = std::move(controls);
    Json positions = Json::array();
    for (const Eigen::Vector2d& p : plan.positions) positions.push_back({p.x(), p.y()});
    j["positions"] = std::move(positions);
    return j;
}

// Evaluates one model seed: episodes_per_model deterministic episodes with
// seeds derive_seed(model_seed, {kBenchStream, episode}). For icr the plans
// are appended to plans_out when it is non-null.
std::vector<EpisodeRecord> run_model_episodes(const ExperimentConfig& config, uint64_t model_seed,
                                              Json* plans_out) {
    const WorldConfig& world = config.world;
    std::vector<EpisodeRecord> records;
    records.reserve(static_cast<size_t>(config.episodes_per_model));

    std::optional<ActorCritic> policy;
    std::mt19937_64 rand_rng(derive_seed(model_seed, {kRandStream}));
    std::uniform_real_distribution<double> rand_u(-world.control_bound, world.control_bound);
    if (is_ppo(config.method)) {
        const std::string path = artifact_stem(config, model_seed) + ".ckpt";
        if (!std::filesystem::exists(path)) {
            throw ConfigError("missing checkpoint '" + path + "'; run the train command first");
        }
        policy.emplace(load_checkpoint(path));
        require_matching_spec(policy->spec(),
                              PolicySpec::from_world(arch_for_method(config.method, world), world),
                              path);
    }

    for (int ep = 0; ep < config.episodes_per_model; ++ep) {
        const uint64_t episode_seed =
            derive_seed(model_seed, {kBenchStream, static_cast<uint64_t>(ep)});
        ControlFn act;
        IcrPlan plan;
        if (policy) {
            act = [&policy](const MdpObservation& obs, int) {
                return policy->mean_actions(std::span<const MdpObservation>(&obs, 1)).front();
            };
        } else if (config.method == "random") {
            act = [&rand_rng, &rand_u](const MdpObservation&, int) {
                const double ux = rand_u(rand_rng);
                const double uy = rand_u(rand_rng);
                return Eigen::Vector2d(ux, uy);
            };
        } else {  // icr: plan once against the episode's initial belief, run open loop
            IcrConfig cfg = effective_icr(config);
            cfg.seed = derive_seed(model_seed, {kPlanStream, static_cast<uint64_t>(ep)});
            const EpisodeState start = reset_episode(world, episode_seed);
            plan = plan_icr(start, world, cfg);
            if (plans_out != nullptr) plans_out->push_back(plan_to_json(episode_seed, plan));
            act = [&plan](const MdpObservation&, int k) {
                if (k < static_cast<int>(plan.controls.size())) return plan.controls[k];
                return Eigen::Vector2d(0.0, 0.0);
            };
        }
        const Trajectory traj = record_trajectory(world, episode_seed, act);
        records.push_back({traj.total_reward, traj.final_mae});
    }
    return records;
}

}  // namespace

std::string results_csv_header() {
    return "scenario,method,noise,reward_mean,reward_std,mae,episodes";
}

std::string results_csv_line(const ResultRow& row) {
    return row.scenario + "," + row.method + "," + (row.noise ? "true" : "false") + "," +
           fmt(row.reward_mean) + "," + fmt(row.reward_std) + "," + fmt(row.mae) + "," +
           std::to_string(row.episodes);
}

std::string results_text(const ResultRow& row) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "%s / %s (%s motion noise): reward %.3f +/- %.3f, landmark MAE %.3f over %d "
                  "episodes",
                  row.scenario.c_str(), row.method.c_str(), row.noise ? "with" : "without",
                  row.reward_mean, row.reward_std, row.mae, row.episodes);
    return buf;
}

std::string artifact_stem(const ExperimentConfig& config, uint64_t seed) {
    return config.out_dir + "/" + config.scenario + "_" + config.method + "_" +
           std::to_string(seed);
}

std::string results_path(const ExperimentConfig& config) {
    return config.out_dir + "/" + config.scenario + "_" + config.method + "_results.csv";
}

TrainOutput cmd_train(const ExperimentConfig& config) {
    config.validate();
    if (!is_ppo(config.method)) {
        throw ConfigError("method '" + config.method + "' has no training phase");
    }
    std::filesystem::create_directories(config.out_dir);

    const PolicySpec spec =
        PolicySpec::from_world(arch_for_method(config.method, config.world), config.world);
    TrainOutput out;
    for (uint64_t seed : config.seeds) {
        const std::string stem = artifact_stem(config, seed);
        const std::string curve_path = stem + "_curve.csv";
        const std::string ckpt_path = stem + ".ckpt";

        std::ofstream curve(curve_path, std::ios::trunc);
        if (!curve) throw ConfigError("cannot open '" + curve_path + "' for writing");
        curve << "env_steps,mean_reward,std_reward,mean_mae\n";

        ActorCritic policy(spec, derive_seed(seed, {kInitStream}));
        TrainConfig tc = config.train;
        tc.seed = seed;
        train_ppo(policy, config.world, tc,
                  [&curve](int env_steps, const EvalStats& stats, ActorCritic&) {
                      curve << env_steps << "," << fmt(stats.mean_reward) << ","
                            << fmt(stats.std_reward) << "," << fmt(stats.mean_mae) << "\n";
                      curve.flush();
                  });
        save_checkpoint(ckpt_path, policy);
        out.checkpoint_paths.push_back(ckpt_path);
        out.curve_paths.push_back(curve_path);
    }
    return out;
}

ResultRow cmd_eval(const ExperimentConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.out_dir);

    std::vector<EpisodeRecord> records;
    for (uint64_t seed : config.seeds) {
        Json plans = Json::array();
        Json* plans_out = config.method == "icr" ? &plans : nullptr;
        std::vector<EpisodeRecord> model = run_model_episodes(config, seed, plans_out);
        records.insert(records.end(), model.begin(), model.end());
        if (plans_out != nullptr) {
            const std::string path = artifact_stem(config, seed) + "_plans.json";
            std::ofstream file(path, std::ios::trunc);
            if (!file) throw ConfigError("cannot open '" + path + "' for writing");
            file << plans.dump(2) << "\n";
        }
    }

    const ResultRow row = pool_records(config, records);
    const std::string path = results_path(config);
    std::ofstream file(path, std::ios::trunc);
    if (!file) throw ConfigError("cannot open '" + path + "' for writing");
    file << results_csv_header() << "\n" << results_csv_line(row) << "\n";
    return row;
}

std::string cmd_trajectory(const ExperimentConfig& config, const std::string& checkpoint_path,
                           uint64_t episode_seed) {
    config.validate();
    std::filesystem::create_directories(config.out_dir);
    const WorldConfig& world = config.world;
    const uint64_t model_seed = config.seeds.front();

    std::optional<ActorCritic> policy;
    std::mt19937_64 rand_rng(derive_seed(model_seed, {kRandStream}));
    std::uniform_real_distribution<double> rand_u(-world.control_bound, world.control_bound);
    IcrPlan plan;
    ControlFn act;
    if (is_ppo(config.method)) {
        const std::string path =
            checkpoint_path.empty() ? artifact_stem(config, model_seed) + ".ckpt" : checkpoint_path;
        if (!std::filesystem::exists(path)) {
            throw ConfigError("missing checkpoint '" + path + "'; run the train command first");
        }
        policy.emplace(load_checkpoint(path));
        require_matching_spec(policy->spec(),
                              PolicySpec::from_world(arch_for_method(config.method, world), world),
                              path);
        act = [&policy](const MdpObservation& obs, int) {
            return policy->mean_actions(std::span<const MdpObservation>(&obs, 1)).front();
        };
    } else if (config.method == "random") {
        act = [&rand_rng, &rand_u](const MdpObservation&, int) {
            const double ux = rand_u(rand_rng);
            const double uy = rand_u(rand_rng);
            return Eigen::Vector2d(ux, uy);
        };
    } else {
        IcrConfig cfg = effective_icr(config);
        cfg.seed = derive_seed(model_seed, {kPlanStream, episode_seed});
        const EpisodeState start = reset_episode(world, episode_seed);
        plan = plan_icr(start, world, cfg);
        act = [&plan](const MdpObservation&, int k) {
            if (k < static_cast<int>(plan.controls.size())) return plan.controls[k];
            return Eigen::Vector2d(0.0, 0.0);
        };
    }

    const Trajectory traj = record_trajectory(world, episode_seed, act);
    const std::string path =
        artifact_stem(config, model_seed) + "_traj_" + std::to_string(episode_seed) + ".json";
    write_trajectory_json(path, traj);
    return path;
}

}  // namespace ap
