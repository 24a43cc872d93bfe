#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

#include "ap/belief.hpp"
#include "ap/fov.hpp"

namespace ap {

// Scenario parameters for the landmark-localization world and the joint
// exploration world. Positions are world-frame; ranges are half-widths of
// the respective uniform sampling boxes around their centers.
struct WorldConfig {
    int n_l = 3;
    int episode_len = 8;
    double control_bound = 3.0;
    double landmark_range = 8.0;
    Eigen::Vector2d landmark_center{0.0, 0.0};
    double agent_init_range = 2.0;
    Eigen::Vector2d agent_center{0.0, 0.0};
    double sigma = 0.5;
    FieldOfView fov{2.0, 0.5};
    double motion_noise_std = 0.0;
    double gamma = 0.99;

    // Initial per-coordinate information. Empty means 1/sigma^2 everywhere;
    // n_l entries apply per landmark (both coordinates), 2*n_l per coordinate.
    std::vector<double> info_init;

    // Joint exploration task.
    bool map_enabled = false;
    int map_h = 15;
    int map_w = 15;
    double tile_size = 2.0;
    double obstacle_density = 0.15;
    double rho = 1.0;
    double alpha_land = 1.0;
    double alpha_map = -1.0;  // < 0 selects the default 2*n_l / n_m

    int num_tiles() const { return map_h * map_w; }
    int obs_dim() const { return 2 + 4 * n_l + (map_enabled ? 2 * num_tiles() : 0); }
    double map_reward_weight() const;
    Eigen::VectorXd initial_info() const;
    void validate() const;
};

struct EpisodeState {
    Eigen::Vector2d x{0.0, 0.0};
    std::vector<Eigen::Vector2d> y_true;
    LandmarkBelief belief;
    Eigen::VectorXi map_true;   // empty unless map_enabled
    MapBelief map_belief;       // empty unless map_enabled
    int k = 0;
    std::mt19937_64 rng;
};

// Flat MDP state [x; lambda_soft; mu] followed, when the map is enabled, by
// [xi; map info]. The concatenation order is a serialization contract.
using MdpObservation = std::vector<double>;

struct StepResult {
    MdpObservation obs;
    double reward = 0.0;
    double reward_land = 0.0;  // raw landmark channel, before weighting
    double reward_map = 0.0;   // raw map channel, before weighting
    bool done = false;
};

// Samples a fresh episode. Identical seeds produce bit-identical episodes.
EpisodeState reset_episode(const WorldConfig& config, uint64_t seed);

// Advances one step: clamps the control, moves the robot, senses landmarks in
// the hard FoV, runs the filter, applies the soft information updates, and
// returns the log-det information-gain reward.
StepResult step_episode(EpisodeState& state, const Eigen::Vector2d& u, const WorldConfig& config);

MdpObservation assemble_observation(const EpisodeState& state, const WorldConfig& config);

// rho * alpha_land * r_land + (1 - rho) * alpha_map * r_map.
double combined_reward(double r_land, double r_map, const WorldConfig& config);

// Mean absolute error over all 2*n_l scalar coordinates.
double mae(const Eigen::VectorXd& mu_final, const std::vector<Eigen::Vector2d>& y_true);

// Euclidean variant, averaged per landmark (secondary metric).
double mae_euclidean(const Eigen::VectorXd& mu_final, const std::vector<Eigen::Vector2d>& y_true);

// Random rectangular-obstacle layout on the map grid; +1 occupied, -1 free.
Eigen::VectorXi generate_map_ground_truth(const WorldConfig& config, std::mt19937_64& rng);

// Tile centers of the map grid, row-major, centered on landmark_center.
std::vector<Eigen::Vector2d> map_tile_positions(const WorldConfig& config);

}  // namespace ap
