#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

namespace ap {

// Isotropic landmark sensor: H = I2, V = sigma^2 I2.
struct SensorModel {
    double sigma = 0.5;
};

// H^T V^-1 H = (1/sigma^2) I2.
Eigen::Matrix2d sensor_info_matrix(const SensorModel& model);

// Scalar per-coordinate information rate 1/sigma^2 (the diagonal of the
// sensor information matrix under the identity observation model).
double info_rate(const SensorModel& model);

// Posterior over landmark positions. Two diagonal information tracks are kept
// side by side: info_hard is the real estimator (updated on the hard visible
// set and used for the means and MAE), info_soft is the reward-shaping track
// updated with probit visibility weights for every landmark.
struct LandmarkBelief {
    Eigen::VectorXd mu;         // 2*n_l posterior means, world frame
    Eigen::VectorXd info_hard;  // 2*n_l, diagonal information, hard FoV
    Eigen::VectorXd info_soft;  // 2*n_l, diagonal information, soft FoV

    int num_landmarks() const { return static_cast<int>(mu.size()) / 2; }
    void validate() const;
};

// Adds m to both coordinates of each visible landmark in info_hard.
LandmarkBelief hard_info_update(const LandmarkBelief& belief, std::span<const int> visible,
                                double m);

// Adds weights[j] * m to both coordinates of landmark j in info_soft, for
// every j. Weights live in [0, 1] and are evaluated at the posterior means.
LandmarkBelief soft_info_update(const LandmarkBelief& belief, const Eigen::VectorXd& weights,
                                double m);

// Scalar information-filter mean update for the observed landmarks, using
// info_hard before its own update: mu' = (lambda*mu + z/sigma^2) / (lambda +
// 1/sigma^2) per coordinate. Measurements are world-frame, one per visible
// index, in the same order.
LandmarkBelief mean_update(const LandmarkBelief& belief, std::span<const Eigen::Vector2d> z,
                           std::span<const int> visible, const SensorModel& model);

// sum_i log(next_i) - log(prev_i) for diagonal information vectors.
double logdet_gain(const Eigen::VectorXd& info_next, const Eigen::VectorXd& info_prev);

// Per-tile belief over a volumetric occupancy map.
struct MapBelief {
    Eigen::VectorXd info;                        // n_m, diagonal information per tile
    Eigen::VectorXd occ_mean;                    // n_m, running occupancy estimate
    std::vector<Eigen::Vector2d> tile_positions; // n_m tile centers, world frame

    int num_tiles() const { return static_cast<int>(info.size()); }
};

// info'_j = info_j + xi_j / sigma^2 with soft tile visibilities xi in [0, 1].
MapBelief map_info_update(const MapBelief& map, const Eigen::VectorXd& xi, double sigma);

// Occupancy mean update for tiles measured in the hard FoV, by the same
// scalar information-filter rule as mean_update (weighted by the tile's
// current information).
MapBelief map_occupancy_update(const MapBelief& map, std::span<const double> z,
                               std::span<const int> visible, double sigma);

// Thresholded occupancy estimate: +1 for positive occ_mean, -1 otherwise
// (exact zero maps to -1, free).
Eigen::VectorXi threshold_occupancy(const MapBelief& map);

}  // namespace ap
