#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "ap/env.hpp"
#include "ap/ppo.hpp"

namespace ap {

// Trajectory optimization baseline: projected gradient ascent on the soft
// information gain of an open-loop control sequence, planned once per episode
// against the prior landmark means. Restarts run in parallel and the best
// objective wins, ties resolved by the lowest restart index so results do not
// depend on thread scheduling.
struct IcrConfig {
    int horizon = -1;        // < 0 means use the episode length
    double step_size = 0.05;
    int max_iters = 500;
    double rel_tol = 1e-6;   // stop once the relative improvement drops below this
    int restarts = 10;       // restart 0 is the all-zero plan, the rest are random
    int workers = 0;         // 0 means hardware concurrency, capped at restarts
    uint64_t seed = 0;

    void validate() const;
};

struct IcrPlan {
    std::vector<Eigen::Vector2d> controls;
    std::vector<Eigen::Vector2d> positions;  // robot position after each control
    double objective = 0.0;
    int iterations = 0;      // accepted ascent steps of the winning restart
    int restart_index = 0;
    std::vector<double> history;  // objective after each accepted step, starting value first
};

// Soft information gain of a control sequence: the robot starts at x0, moves
// by each control in turn, and every position contributes a probit visibility
// weight per landmark. lambda0 holds per-coordinate prior information (2 n_l).
double icr_objective(const std::vector<Eigen::Vector2d>& controls, const Eigen::Vector2d& x0,
                     const std::vector<Eigen::Vector2d>& mu, const Eigen::VectorXd& lambda0,
                     const WorldConfig& world);

// Same objective plus its gradient with respect to every control, computed by
// the reverse-mode tape over the cumulative-sum position chain.
double icr_objective_grad(const std::vector<Eigen::Vector2d>& controls, const Eigen::Vector2d& x0,
                          const std::vector<Eigen::Vector2d>& mu, const Eigen::VectorXd& lambda0,
                          const WorldConfig& world, std::vector<Eigen::Vector2d>& grad_out);

// Plans from the episode's current robot position, prior means, and hard
// (estimator) information.
IcrPlan plan_icr(const EpisodeState& state, const WorldConfig& world, const IcrConfig& config);

// Episode protocol of evaluate_policy, with a fresh plan executed open loop in
// each episode.
EvalStats evaluate_icr(const WorldConfig& world, uint64_t seed_base, int episodes,
                       const IcrConfig& config);

}  // namespace ap
