#pragma once

#include <string>
#include <vector>

#include "ap/config.hpp"

namespace ap {

// One line of the quantitative results table. The evaluation pools
// seeds.size() models x episodes_per_model episodes (10 episodes per model by
// default, 30 records for the standard three-seed grid).
struct ResultRow {
    std::string scenario;
    std::string method;
    bool noise = false;
    double reward_mean = 0.0;
    double reward_std = 0.0;
    double mae = 0.0;
    int episodes = 0;
};

std::string results_csv_header();
std::string results_csv_line(const ResultRow& row);
std::string results_text(const ResultRow& row);

// <out_dir>/<scenario>_<method>_<seed>; artifact files append their suffix
// (.ckpt, _curve.csv, _traj_<episode>.json).
std::string artifact_stem(const ExperimentConfig& config, uint64_t seed);
std::string results_path(const ExperimentConfig& config);

struct TrainOutput {
    std::vector<std::string> checkpoint_paths;
    std::vector<std::string> curve_paths;
};

// Trains one policy per seed (methods ppo-att / ppo-mlp), writing a
// checkpoint and a learning-curve CSV per seed.
TrainOutput cmd_train(const ExperimentConfig& config);

// Deterministic evaluation of the configured method over the seed grid.
// ppo-* methods load the checkpoints cmd_train wrote; random needs no
// artifacts; icr plans one open-loop control sequence per episode instance
// and additionally writes the plans as JSON. Writes the results CSV.
ResultRow cmd_eval(const ExperimentConfig& config);

// Records a single-episode trajectory JSON for external plotting. For ppo-*
// methods checkpoint_path may be empty to use the first seed's artifact.
// Returns the path written.
std::string cmd_trajectory(const ExperimentConfig& config, const std::string& checkpoint_path,
                           uint64_t episode_seed);

}  // namespace ap
