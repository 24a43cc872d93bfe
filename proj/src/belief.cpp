#include "ap/belief.hpp"

#include <cmath>

#include "ap/common.hpp"

namespace ap {

Eigen::Matrix2d sensor_info_matrix(const SensorModel& model) {
    return info_rate(model) * Eigen::Matrix2d::Identity();
}

double info_rate(const SensorModel& model) {
    AP_CHECK(model.sigma > 0.0, "sensor noise sigma must be positive");
    return 1.0 / (model.sigma * model.sigma);
}

void LandmarkBelief::validate() const {
    AP_CHECK(mu.size() == info_hard.size() && mu.size() == info_soft.size(),
             "belief vectors must have matching sizes");
    AP_CHECK(mu.size() % 2 == 0, "belief vectors hold 2 coordinates per landmark");
    AP_CHECK((info_hard.array() > 0.0).all(), "info_hard entries must be positive");
    AP_CHECK((info_soft.array() > 0.0).all(), "info_soft entries must be positive");
}

LandmarkBelief hard_info_update(const LandmarkBelief& belief, std::span<const int> visible,
                                double m) {
    AP_CHECK(m > 0.0, "information rate must be positive");
    LandmarkBelief out = belief;
    const int n_l = belief.num_landmarks();
    for (int j : visible) {
        AP_CHECK(j >= 0 && j < n_l, "visible index out of range");
        out.info_hard[2 * j] += m;
        out.info_hard[2 * j + 1] += m;
    }
    return out;
}

LandmarkBelief soft_info_update(const LandmarkBelief& belief, const Eigen::VectorXd& weights,
                                double m) {
    const int n_l = belief.num_landmarks();
    AP_CHECK(static_cast<int>(weights.size()) == n_l, "one weight per landmark");
    LandmarkBelief out = belief;
    for (int j = 0; j < n_l; ++j) {
        const double w = weights[j];
        AP_CHECK(w >= 0.0 && w <= 1.0, "soft visibility weight outside [0, 1]");
        out.info_soft[2 * j] += w * m;
        out.info_soft[2 * j + 1] += w * m;
    }
    return out;
}

LandmarkBelief mean_update(const LandmarkBelief& belief, std::span<const Eigen::Vector2d> z,
                           std::span<const int> visible, const SensorModel& model) {
    AP_CHECK(z.size() == visible.size(), "one measurement per visible index");
    const double m = info_rate(model);
    LandmarkBelief out = belief;
    const int n_l = belief.num_landmarks();
    for (size_t i = 0; i < visible.size(); ++i) {
        const int j = visible[i];
        AP_CHECK(j >= 0 && j < n_l, "visible index out of range");
        for (int c = 0; c < 2; ++c) {
            const double lambda = belief.info_hard[2 * j + c];
            out.mu[2 * j + c] = (lambda * belief.mu[2 * j + c] + m * z[i][c]) / (lambda + m);
        }
    }
    return out;
}

double logdet_gain(const Eigen::VectorXd& info_next, const Eigen::VectorXd& info_prev) {
    AP_CHECK(info_next.size() == info_prev.size(), "information vectors must match in length");
    double gain = 0.0;
    for (Eigen::Index i = 0; i < info_next.size(); ++i) {
        AP_CHECK(info_next[i] > 0.0 && info_prev[i] > 0.0,
                 "information entries must be positive");
        gain += std::log(info_next[i]) - std::log(info_prev[i]);
    }
    return gain;
}

MapBelief map_info_update(const MapBelief& map, const Eigen::VectorXd& xi, double sigma) {
    AP_CHECK(sigma > 0.0, "sensor noise sigma must be positive");
    AP_CHECK(xi.size() == map.info.size(), "one visibility weight per tile");
    MapBelief out = map;
    const double m = 1.0 / (sigma * sigma);
    for (Eigen::Index j = 0; j < xi.size(); ++j) {
        AP_CHECK(xi[j] >= 0.0 && xi[j] <= 1.0, "tile visibility weight outside [0, 1]");
        out.info[j] += xi[j] * m;
    }
    return out;
}

MapBelief map_occupancy_update(const MapBelief& map, std::span<const double> z,
                               std::span<const int> visible, double sigma) {
    AP_CHECK(z.size() == visible.size(), "one measurement per visible tile");
    AP_CHECK(sigma > 0.0, "sensor noise sigma must be positive");
    MapBelief out = map;
    const double m = 1.0 / (sigma * sigma);
    for (size_t i = 0; i < visible.size(); ++i) {
        const int j = visible[i];
        AP_CHECK(j >= 0 && j < map.num_tiles(), "tile index out of range");
        const double lambda = map.info[j];
        out.occ_mean[j] = (lambda * map.occ_mean[j] + m * z[i]) / (lambda + m);
    }
    return out;
}

Eigen::VectorXi threshold_occupancy(const MapBelief& map) {
    Eigen::VectorXi out(map.occ_mean.size());
    for (Eigen::Index j = 0; j < map.occ_mean.size(); ++j) {
        out[j] = map.occ_mean[j] > 0.0 ? 1 : -1;
    }
    return out;
}

}  // namespace ap
