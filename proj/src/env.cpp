#include "ap/env.hpp"

#include <algorithm>
#include <cmath>

#include "ap/common.hpp"

namespace ap {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double normal(std::mt19937_64& rng, double stddev) {
    return std::normal_distribution<double>(0.0, stddev)(rng);
}

Eigen::Vector2d normal2(std::mt19937_64& rng, double stddev) {
    const double a = normal(rng, stddev);
    const double b = normal(rng, stddev);
    return {a, b};
}

Eigen::VectorXd soft_landmark_weights(const Eigen::Vector2d& x, const LandmarkBelief& belief,
                                      const FieldOfView& fov) {
    const int n_l = belief.num_landmarks();
    Eigen::VectorXd w(n_l);
    for (int j = 0; j < n_l; ++j) {
        const Eigen::Vector2d mu_j = belief.mu.segment<2>(2 * j);
        w[j] = soft_visibility_weight(body_frame(x, mu_j), fov);
    }
    return w;
}

Eigen::VectorXd soft_tile_weights(const Eigen::Vector2d& x, const MapBelief& map,
                                  const FieldOfView& fov) {
    Eigen::VectorXd xi(map.num_tiles());
    for (int j = 0; j < map.num_tiles(); ++j) {
        xi[j] = soft_visibility_weight(body_frame(x, map.tile_positions[j]), fov);
    }
    return xi;
}

}  // namespace

double WorldConfig::map_reward_weight() const {
    if (alpha_map >= 0.0) {
        return alpha_map;
    }
    return 2.0 * static_cast<double>(n_l) / static_cast<double>(num_tiles());
}

Eigen::VectorXd WorldConfig::initial_info() const {
    Eigen::VectorXd info(2 * n_l);
    if (info_init.empty()) {
        info.setConstant(1.0 / (sigma * sigma));
    } else if (static_cast<int>(info_init.size()) == n_l) {
        for (int j = 0; j < n_l; ++j) {
            info[2 * j] = info_init[j];
            info[2 * j + 1] = info_init[j];
        }
    } else {
        for (int i = 0; i < 2 * n_l; ++i) {
            info[i] = info_init[i];
        }
    }
    return info;
}

void WorldConfig::validate() const {
    if (n_l < 1) throw ConfigError("n_l must be at least 1");
    if (episode_len < 1) throw ConfigError("episode_len must be at least 1");
    if (control_bound <= 0.0) throw ConfigError("control_bound must be positive");
    if (landmark_range <= 0.0) throw ConfigError("landmark_range must be positive");
    if (agent_init_range <= 0.0) throw ConfigError("agent_init_range must be positive");
    if (sigma <= 0.0) throw ConfigError("sigma must be positive");
    if (fov.radius <= 0.0 || fov.kappa <= 0.0) throw ConfigError("invalid field of view");
    if (motion_noise_std < 0.0) throw ConfigError("motion_noise_std must be nonnegative");
    if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("gamma must lie in [0, 1)");
    if (rho < 0.0 || rho > 1.0) throw ConfigError("rho must lie in [0, 1]");
    if (!info_init.empty() && static_cast<int>(info_init.size()) != n_l &&
        static_cast<int>(info_init.size()) != 2 * n_l) {
        throw ConfigError("info_init must be empty, n_l, or 2*n_l entries");
    }
    for (double v : info_init) {
        if (v <= 0.0) throw ConfigError("info_init entries must be positive");
    }
    if (map_enabled) {
        if (map_h < 1 || map_w < 1) throw ConfigError("map dimensions must be positive");
        if (tile_size <= 0.0) throw ConfigError("tile_size must be positive");
        if (obstacle_density < 0.0 || obstacle_density > 1.0) {
            throw ConfigError("obstacle_density must lie in [0, 1]");
        }
    }
}

std::vector<Eigen::Vector2d> map_tile_positions(const WorldConfig& config) {
    std::vector<Eigen::Vector2d> positions;
    positions.reserve(config.num_tiles());
    const Eigen::Vector2d origin =
        config.landmark_center - 0.5 * config.tile_size *
                                     Eigen::Vector2d(config.map_w, config.map_h);
    for (int r = 0; r < config.map_h; ++r) {
        for (int c = 0; c < config.map_w; ++c) {
            positions.push_back(origin + config.tile_size *
                                             Eigen::Vector2d(c + 0.5, r + 0.5));
        }
    }
    return positions;
}

Eigen::VectorXi generate_map_ground_truth(const WorldConfig& config, std::mt19937_64& rng) {
    const int n_m = config.num_tiles();
    Eigen::VectorXi occ = Eigen::VectorXi::Constant(n_m, -1);
    if (config.obstacle_density <= 0.0) {
        return occ;
    }
    if (config.obstacle_density >= 1.0) {
        occ.setConstant(1);
        return occ;
    }
    const int target = std::max(1, static_cast<int>(std::lround(config.obstacle_density * n_m)));
    int occupied = 0;
    std::uniform_int_distribution<int> row_dist(0, config.map_h - 1);
    std::uniform_int_distribution<int> col_dist(0, config.map_w - 1);
    std::uniform_int_distribution<int> size_dist(1, std::max(2, config.map_h / 4));
    for (int attempt = 0; attempt < 1000 && occupied < target; ++attempt) {
        const int r0 = row_dist(rng);
        const int c0 = col_dist(rng);
        const int rh = size_dist(rng);
        const int cw = size_dist(rng);
        for (int r = r0; r < std::min(config.map_h, r0 + rh); ++r) {
            for (int c = c0; c < std::min(config.map_w, c0 + cw); ++c) {
                const int j = r * config.map_w + c;
                if (occ[j] < 0) {
                    occ[j] = 1;
                    ++occupied;
                }
            }
        }
    }
    return occ;
}

EpisodeState reset_episode(const WorldConfig& config, uint64_t seed) {
    config.validate();
    EpisodeState state;
    state.rng.seed(seed);
    state.k = 0;

    // Draw order is part of the determinism contract: agent position, then
    // landmark positions, then initial mean estimates, then the map layout.
    state.x = config.agent_center +
              Eigen::Vector2d(uniform(state.rng, -config.agent_init_range, config.agent_init_range),
                              uniform(state.rng, -config.agent_init_range, config.agent_init_range));

    state.y_true.resize(config.n_l);
    for (int j = 0; j < config.n_l; ++j) {
        state.y_true[j] =
            config.landmark_center +
            Eigen::Vector2d(uniform(state.rng, -config.landmark_range, config.landmark_range),
                            uniform(state.rng, -config.landmark_range, config.landmark_range));
    }

    state.belief.mu.resize(2 * config.n_l);
    for (int j = 0; j < config.n_l; ++j) {
        state.belief.mu.segment<2>(2 * j) = state.y_true[j] + normal2(state.rng, config.sigma);
    }
    state.belief.info_hard = config.initial_info();
    state.belief.info_soft = state.belief.info_hard;

    if (config.map_enabled) {
        state.map_true = generate_map_ground_truth(config, state.rng);
        state.map_belief.info = Eigen::VectorXd::Ones(config.num_tiles());
        state.map_belief.occ_mean = Eigen::VectorXd::Zero(config.num_tiles());
        state.map_belief.tile_positions = map_tile_positions(config);
    }
    return state;
}

MdpObservation assemble_observation(const EpisodeState& state, const WorldConfig& config) {
    MdpObservation obs;
    obs.reserve(config.obs_dim());
    obs.push_back(state.x[0]);
    obs.push_back(state.x[1]);
    for (Eigen::Index i = 0; i < state.belief.info_soft.size(); ++i) {
        obs.push_back(state.belief.info_soft[i]);
    }
    for (Eigen::Index i = 0; i < state.belief.mu.size(); ++i) {
        obs.push_back(state.belief.mu[i]);
    }
    if (config.map_enabled) {
        const Eigen::VectorXd xi = soft_tile_weights(state.x, state.map_belief, config.fov);
        for (Eigen::Index j = 0; j < xi.size(); ++j) {
            obs.push_back(xi[j]);
        }
        for (Eigen::Index j = 0; j < state.map_belief.info.size(); ++j) {
            obs.push_back(state.map_belief.info[j]);
        }
    }
    return obs;
}

double combined_reward(double r_land, double r_map, const WorldConfig& config) {
    AP_CHECK(config.rho >= 0.0 && config.rho <= 1.0, "rho must lie in [0, 1]");
    return config.rho * config.alpha_land * r_land +
           (1.0 - config.rho) * config.map_reward_weight() * r_map;
}

StepResult step_episode(EpisodeState& state, const Eigen::Vector2d& u, const WorldConfig& config) {
    AP_CHECK(state.k < config.episode_len, "stepping a terminated episode");
    const SensorModel sensor{config.sigma};
    const double m = info_rate(sensor);

    const Eigen::Vector2d u_clamped = u.cwiseMax(-config.control_bound).cwiseMin(config.control_bound);
    state.x += u_clamped;
    if (config.motion_noise_std > 0.0) {
        state.x += normal2(state.rng, config.motion_noise_std);
    }

    // Hard track: sense landmarks whose true positions fall in the FoV, then
    // run the filter (mean update first, with the pre-update information).
    const std::vector<int> visible = hard_visible_set(state.x, state.y_true, config.fov);
    std::vector<Eigen::Vector2d> z;
    z.reserve(visible.size());
    for (int j : visible) {
        z.push_back(state.y_true[j] + normal2(state.rng, config.sigma));
    }
    state.belief = mean_update(state.belief, z, visible, sensor);
    state.belief = hard_info_update(state.belief, visible, m);

    // Soft track: probit visibility weights at the posterior means drive the
    // reward-shaping information update for every landmark.
    const Eigen::VectorXd prev_soft = state.belief.info_soft;
    const Eigen::VectorXd w = soft_landmark_weights(state.x, state.belief, config.fov);
    state.belief = soft_info_update(state.belief, w, m);
    const double r_land = logdet_gain(state.belief.info_soft, prev_soft);

    double r_map = 0.0;
    if (config.map_enabled) {
        const std::vector<int> visible_tiles =
            hard_visible_set(state.x, state.map_belief.tile_positions, config.fov);
        std::vector<double> z_map;
        z_map.reserve(visible_tiles.size());
        for (int j : visible_tiles) {
            z_map.push_back(static_cast<double>(state.map_true[j]) +
                            normal(state.rng, config.sigma));
        }
        state.map_belief = map_occupancy_update(state.map_belief, z_map, visible_tiles,
                                                config.sigma);
        const Eigen::VectorXd prev_info = state.map_belief.info;
        const Eigen::VectorXd xi = soft_tile_weights(state.x, state.map_belief, config.fov);
        state.map_belief = map_info_update(state.map_belief, xi, config.sigma);
        r_map = logdet_gain(state.map_belief.info, prev_info);
    }

    state.k += 1;

    StepResult result;
    result.reward_land = r_land;
    result.reward_map = r_map;
    result.reward = config.map_enabled ? combined_reward(r_land, r_map, config) : r_land;
    result.done = state.k == config.episode_len;
    result.obs = assemble_observation(state, config);
    return result;
}

double mae(const Eigen::VectorXd& mu_final, const std::vector<Eigen::Vector2d>& y_true) {
    AP_CHECK(mu_final.size() == static_cast<Eigen::Index>(2 * y_true.size()),
             "dimension mismatch between means and landmarks");
    double total = 0.0;
    for (size_t j = 0; j < y_true.size(); ++j) {
        total += std::abs(mu_final[2 * j] - y_true[j][0]);
        total += std::abs(mu_final[2 * j + 1] - y_true[j][1]);
    }
    return total / static_cast<double>(mu_final.size());
}

double mae_euclidean(const Eigen::VectorXd& mu_final, const std::vector<Eigen::Vector2d>& y_true) {
    AP_CHECK(mu_final.size() == static_cast<Eigen::Index>(2 * y_true.size()),
             "dimension mismatch between means and landmarks");
    double total = 0.0;
    for (size_t j = 0; j < y_true.size(); ++j) {
        total += (mu_final.segment<2>(2 * j) - y_true[j]).norm();
    }
    return total / static_cast<double>(y_true.size());
}

}  // namespace ap
