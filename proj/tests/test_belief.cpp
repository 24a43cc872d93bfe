#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "ap/belief.hpp"
#include "ap/common.hpp"

namespace {

ap::LandmarkBelief random_belief(std::mt19937_64& rng, int n_l) {
    std::uniform_real_distribution<double> pos(-10.0, 10.0);
    std::uniform_real_distribution<double> info(0.1, 10.0);
    ap::LandmarkBelief b;
    b.mu.resize(2 * n_l);
    b.info_hard.resize(2 * n_l);
    b.info_soft.resize(2 * n_l);
    for (int i = 0; i < 2 * n_l; ++i) {
        b.mu[i] = pos(rng);
        b.info_hard[i] = info(rng);
        b.info_soft[i] = info(rng);
    }
    return b;
}

// Independent reference: the textbook covariance-form Kalman measurement
// update with H = I2 and R = sigma^2 I2, run per landmark on full 2x2
// matrices. K = P (P + R)^-1, mu' = mu + K (z - mu), P' = (I - K) P.
struct KalmanRef {
    Eigen::Vector2d mu;
    Eigen::Matrix2d P;
};

KalmanRef covariance_update(const KalmanRef& prior, const Eigen::Vector2d& z, double sigma) {
    const Eigen::Matrix2d R = sigma * sigma * Eigen::Matrix2d::Identity();
    const Eigen::Matrix2d K = prior.P * (prior.P + R).inverse();
    KalmanRef post;
    post.mu = prior.mu + K * (z - prior.mu);
    post.P = (Eigen::Matrix2d::Identity() - K) * prior.P;
    return post;
}

}  // namespace

TEST_CASE("information filter matches the covariance-form Kalman filter") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> meas(-12.0, 12.0);
    std::uniform_real_distribution<double> sig(0.2, 2.0);
    std::bernoulli_distribution coin(0.6);
    const ap::SensorModel unit_sigma{0.5};
    (void)unit_sigma;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n_l = 1 + static_cast<int>(rng() % 5);
        ap::LandmarkBelief belief = random_belief(rng, n_l);
        const double sigma = sig(rng);
        const ap::SensorModel model{sigma};

        std::vector<int> visible;
        std::vector<Eigen::Vector2d> z;
        for (int j = 0; j < n_l; ++j) {
            if (coin(rng)) {
                visible.push_back(j);
                z.push_back({meas(rng), meas(rng)});
            }
        }

        std::vector<KalmanRef> ref(n_l);
        for (int j = 0; j < n_l; ++j) {
            ref[j].mu = belief.mu.segment<2>(2 * j);
            ref[j].P = Eigen::Vector2d(1.0 / belief.info_hard[2 * j],
                                       1.0 / belief.info_hard[2 * j + 1])
                           .asDiagonal();
        }
        for (size_t i = 0; i < visible.size(); ++i) {
            ref[visible[i]] = covariance_update(ref[visible[i]], z[i], sigma);
        }

        belief = ap::mean_update(belief, z, visible, model);
        belief = ap::hard_info_update(belief, visible, ap::info_rate(model));

        for (int j = 0; j < n_l; ++j) {
            CHECK(std::abs(belief.mu[2 * j] - ref[j].mu[0]) < 1e-10);
            CHECK(std::abs(belief.mu[2 * j + 1] - ref[j].mu[1]) < 1e-10);
            CHECK(std::abs(1.0 / belief.info_hard[2 * j] - ref[j].P(0, 0)) < 1e-10);
            CHECK(std::abs(1.0 / belief.info_hard[2 * j + 1] - ref[j].P(1, 1)) < 1e-10);
            CHECK(std::abs(ref[j].P(0, 1)) < 1e-12);
        }
    }
}

TEST_CASE("mean update matches a hand-computed value and skips hidden landmarks") {
    ap::LandmarkBelief b;
    b.mu.resize(4);
    b.mu << 1.3, 1.3, -5.0, 6.0;
    b.info_hard = Eigen::VectorXd::Constant(4, 4.0);
    b.info_soft = b.info_hard;

    const ap::SensorModel model{0.5};
    const std::vector<int> visible = {0};
    const std::vector<Eigen::Vector2d> z = {{2.1, 2.1}};
    const ap::LandmarkBelief out = ap::mean_update(b, z, visible, model);
    // (4 * 1.3 + 4 * 2.1) / (4 + 4) = 1.7
    CHECK(out.mu[0] == doctest::Approx(1.7).epsilon(1e-15));
    CHECK(out.mu[1] == doctest::Approx(1.7).epsilon(1e-15));
    CHECK(out.mu[2] == -5.0);
    CHECK(out.mu[3] == 6.0);
    CHECK(out.info_hard == b.info_hard);  // mean update leaves information alone

    const ap::LandmarkBelief same = ap::mean_update(b, {}, {}, model);
    CHECK(same.mu == b.mu);
}

TEST_CASE("log-det gains telescope across an episode") {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> weight(0.0, 1.0);
    const int n_l = 4;
    ap::LandmarkBelief belief = random_belief(rng, n_l);
    const Eigen::VectorXd initial = belief.info_soft;
    const double m = 4.0;

    double total = 0.0;
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd w(n_l);
        for (int j = 0; j < n_l; ++j) w[j] = weight(rng);
        const ap::LandmarkBelief next = ap::soft_info_update(belief, w, m);
        total += ap::logdet_gain(next.info_soft, belief.info_soft);
        belief = next;
    }
    CHECK(std::abs(total - ap::logdet_gain(belief.info_soft, initial)) < 1e-10);
}

TEST_CASE("information never decreases and gains are nonnegative") {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> weight(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n_l = 1 + static_cast<int>(rng() % 6);
        ap::LandmarkBelief belief = random_belief(rng, n_l);
        Eigen::VectorXd w(n_l);
        for (int j = 0; j < n_l; ++j) w[j] = weight(rng);
        const ap::LandmarkBelief next = ap::soft_info_update(belief, w, 4.0);
        CHECK((next.info_soft.array() >= belief.info_soft.array()).all());
        CHECK(ap::logdet_gain(next.info_soft, belief.info_soft) >= 0.0);

        std::vector<int> visible;
        for (int j = 0; j < n_l; ++j) {
            if (rng() % 2 == 0) visible.push_back(j);
        }
        const ap::LandmarkBelief hard = ap::hard_info_update(belief, visible, 4.0);
        CHECK((hard.info_hard.array() >= belief.info_hard.array()).all());
    }
}

TEST_CASE("soft update with binary weights reproduces the hard update") {
    std::mt19937_64 rng(404);
    for (int trial = 0; trial < 100; ++trial) {
        const int n_l = 1 + static_cast<int>(rng() % 6);
        ap::LandmarkBelief belief = random_belief(rng, n_l);
        belief.info_soft = belief.info_hard;  // align the two tracks

        Eigen::VectorXd w(n_l);
        std::vector<int> visible;
        for (int j = 0; j < n_l; ++j) {
            if (rng() % 2 == 0) {
                w[j] = 1.0;
                visible.push_back(j);
            } else {
                w[j] = 0.0;
            }
        }
        const ap::LandmarkBelief soft = ap::soft_info_update(belief, w, 4.0);
        const ap::LandmarkBelief hard = ap::hard_info_update(belief, visible, 4.0);
        CHECK(soft.info_soft == hard.info_hard);
    }
}

TEST_CASE("logdet_gain matches frozen values") {
    Eigen::VectorXd prev(2), next(2);
    prev << 4.0, 4.0;
    next << 8.0, 4.0;
    CHECK(std::abs(ap::logdet_gain(next, prev) - 0.69314718055994530942) < 1e-15);
    next << 8.0, 8.0;
    CHECK(std::abs(ap::logdet_gain(next, prev) - 1.3862943611198906188) < 1e-15);
    next << 5.0, 4.0;  // 4 + 4 * 0.25
    CHECK(std::abs(ap::logdet_gain(next, prev) - 0.22314355131420975577) < 1e-15);
    CHECK(ap::logdet_gain(prev, prev) == 0.0);
}

TEST_CASE("sensor info matrix is isotropic 1/sigma^2") {
    const ap::SensorModel model{0.5};
    CHECK(ap::info_rate(model) == 4.0);
    const Eigen::Matrix2d M = ap::sensor_info_matrix(model);
    CHECK(M(0, 0) == 4.0);
    CHECK(M(1, 1) == 4.0);
    CHECK(M(0, 1) == 0.0);
    CHECK(M(1, 0) == 0.0);
    CHECK_THROWS_AS(ap::info_rate(ap::SensorModel{0.0}), ap::ContractError);
}

TEST_CASE("belief contract violations throw") {
    std::mt19937_64 rng(505);
    ap::LandmarkBelief belief = random_belief(rng, 3);

    const std::vector<int> bad_index = {3};
    CHECK_THROWS_AS(ap::hard_info_update(belief, bad_index, 4.0), ap::ContractError);
    const std::vector<int> negative = {-1};
    CHECK_THROWS_AS(ap::hard_info_update(belief, negative, 4.0), ap::ContractError);

    Eigen::VectorXd w = Eigen::VectorXd::Constant(3, 0.5);
    w[1] = 1.5;
    CHECK_THROWS_AS(ap::soft_info_update(belief, w, 4.0), ap::ContractError);
    w[1] = -0.1;
    CHECK_THROWS_AS(ap::soft_info_update(belief, w, 4.0), ap::ContractError);
    CHECK_THROWS_AS(ap::soft_info_update(belief, Eigen::VectorXd::Constant(2, 0.5), 4.0),
                    ap::ContractError);

    const std::vector<int> visible = {0, 1};
    const std::vector<Eigen::Vector2d> z = {{0.0, 0.0}};
    CHECK_THROWS_AS(ap::mean_update(belief, z, visible, ap::SensorModel{0.5}),
                    ap::ContractError);

    Eigen::VectorXd nonpos(2);
    nonpos << 1.0, 0.0;
    CHECK_THROWS_AS(ap::logdet_gain(nonpos, Eigen::VectorXd::Ones(2)), ap::ContractError);

    belief.info_hard[0] = -1.0;
    CHECK_THROWS_AS(belief.validate(), ap::ContractError);
}

TEST_CASE("map updates mirror the landmark rules per tile") {
    ap::MapBelief map;
    map.info = Eigen::VectorXd::Ones(4);
    map.occ_mean = Eigen::VectorXd::Zero(4);
    map.tile_positions = {{0.0, 0.0}, {2.0, 0.0}, {0.0, 2.0}, {2.0, 2.0}};
    const double sigma = 0.5;

    Eigen::VectorXd xi(4);
    xi << 1.0, 0.5, 0.0, 0.25;
    const ap::MapBelief after_info = ap::map_info_update(map, xi, sigma);
    CHECK(after_info.info[0] == 5.0);
    CHECK(after_info.info[1] == 3.0);
    CHECK(after_info.info[2] == 1.0);
    CHECK(after_info.info[3] == 2.0);
    CHECK(after_info.occ_mean == map.occ_mean);

    const std::vector<int> visible = {0, 3};
    const std::vector<double> z = {1.0, -1.0};
    const ap::MapBelief after_occ = ap::map_occupancy_update(map, z, visible, sigma);
    // (1 * 0 + 4 * 1) / (1 + 4) = 0.8, and symmetrically -0.8.
    CHECK(after_occ.occ_mean[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(after_occ.occ_mean[1] == 0.0);
    CHECK(after_occ.occ_mean[2] == 0.0);
    CHECK(after_occ.occ_mean[3] == doctest::Approx(-0.8).epsilon(1e-15));
    CHECK(after_occ.info == map.info);

    const Eigen::VectorXi labels = ap::threshold_occupancy(after_occ);
    CHECK(labels[0] == 1);
    CHECK(labels[1] == -1);  // exact zero counts as free
    CHECK(labels[3] == -1);

    Eigen::VectorXd bad = xi;
    bad[0] = 1.2;
    CHECK_THROWS_AS(ap::map_info_update(map, bad, sigma), ap::ContractError);
    const std::vector<int> out_of_range = {4};
    const std::vector<double> z1 = {0.0};
    CHECK_THROWS_AS(ap::map_occupancy_update(map, z1, out_of_range, sigma),
                    ap::ContractError);
}
