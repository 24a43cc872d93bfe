#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "ap/env.hpp"

namespace ap {

// One executed step: the clamped control that was applied, the state after
// the move, and the posterior after the measurement update. Storing the
// clamped control makes the log replayable: clamping is idempotent, so
// feeding the logged control back through the environment reproduces the
// exact same arithmetic.
struct TrajectoryStep {
    int k = 0;
    Eigen::Vector2d x{0.0, 0.0};
    Eigen::Vector2d u{0.0, 0.0};
    double reward = 0.0;
    Eigen::VectorXd mu;
    Eigen::VectorXd lambda_soft;
    std::vector<int> visible;
};

struct Trajectory {
    uint64_t seed = 0;
    WorldConfig world;
    Eigen::Vector2d x0{0.0, 0.0};  // initial state record
    Eigen::VectorXd mu0;
    Eigen::VectorXd lambda0;
    std::vector<TrajectoryStep> steps;
    std::vector<Eigen::Vector2d> y_true;
    Eigen::VectorXd info_hard_final;
    double total_reward = 0.0;
    double final_mae = 0.0;
};

using ControlFn = std::function<Eigen::Vector2d(const MdpObservation&, int k)>;

// Runs one seeded episode under the control law and records every step plus
// the initial state, for plotting or bit-exact replay.
Trajectory record_trajectory(const WorldConfig& world, uint64_t seed, const ControlFn& act);

void write_trajectory_json(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_json(const std::string& path);

}  // namespace ap
