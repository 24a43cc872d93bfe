#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "ap/common.hpp"
#include "ap/env.hpp"
#include "ap/nn.hpp"
#include "ap/policy.hpp"

namespace ad = ap::ad;
namespace nn = ap::nn;

namespace {

ap::PolicySpec landmark_spec(ap::PolicyArch arch, int n_l = 3) {
    ap::WorldConfig config;
    config.n_l = n_l;
    return ap::PolicySpec::from_world(arch, config);
}

// Observation [x; info; mu] with the landmark blocks permuted by perm.
ap::MdpObservation make_obs(const std::vector<int>& perm) {
    const int n = static_cast<int>(perm.size());
    ap::MdpObservation obs(2 + 4 * n);
    obs[0] = 0.7;
    obs[1] = -0.3;
    for (int slot = 0; slot < n; ++slot) {
        const int j = perm[slot];
        obs[2 + 2 * slot] = 4.0 + 3.0 * j;        // info x
        obs[2 + 2 * slot + 1] = 4.0 + 3.0 * j + 1.0;  // info y
        obs[2 + 2 * n + 2 * slot] = -5.0 + 2.5 * j;   // mu x
        obs[2 + 2 * n + 2 * slot + 1] = 3.0 - 1.5 * j;  // mu y
    }
    return obs;
}

int scalar_count(const std::vector<nn::Param*>& params) {
    int total = 0;
    for (const nn::Param* p : params) total += p->value.numel();
    return total;
}

}  // namespace

TEST_CASE("attention output is exactly invariant to landmark order") {
    const ap::PolicySpec spec = landmark_spec(ap::PolicyArch::attention);
    auto net = ap::make_net(spec, 2, "actor");
    std::mt19937_64 rng(3);
    net->init(rng, 1.0);

    const std::vector<std::vector<int>> perms = {{0, 1, 2}, {2, 0, 1}, {1, 2, 0}, {2, 1, 0}};
    std::vector<std::array<double, 2>> outputs;
    for (const auto& perm : perms) {
        ad::Graph g;
        nn::Binder ctx(g, false);
        const std::vector<ap::MdpObservation> batch = {make_obs(perm)};
        const ad::Value out = net->forward(ctx, batch);
        outputs.push_back({out.tensor()(0, 0), out.tensor()(0, 1)});
    }
    for (size_t i = 1; i < outputs.size(); ++i) {
        // Bitwise equality: entity reductions sum in sorted order, so the
        // landmark order cannot leak into the action even at the ulp level.
        CHECK(outputs[i][0] == outputs[0][0]);
        CHECK(outputs[i][1] == outputs[0][1]);
    }
}

TEST_CASE("the flat baseline is order sensitive where attention is not") {
    const ap::PolicySpec spec = landmark_spec(ap::PolicyArch::mlp);
    auto net = ap::make_net(spec, 2, "actor");
    std::mt19937_64 rng(4);
    net->init(rng, 1.0);

    ad::Graph g;
    nn::Binder ctx(g, false);
    const std::vector<ap::MdpObservation> batch = {make_obs({0, 1, 2}), make_obs({2, 0, 1})};
    const ad::Value out = net->forward(ctx, batch);
    const double diff = std::abs(out.tensor()(0, 0) - out.tensor()(1, 0)) +
                        std::abs(out.tensor()(0, 1) - out.tensor()(1, 1));
    CHECK(diff > 1e-6);
}

TEST_CASE("zero-weight networks emit exactly zero") {
    for (ap::PolicyArch arch : {ap::PolicyArch::attention, ap::PolicyArch::mlp}) {
        const ap::PolicySpec spec = landmark_spec(arch);
        auto net = ap::make_net(spec, 2, "actor");  // never initialized: all zeros
        ad::Graph g;
        nn::Binder ctx(g, false);
        const std::vector<ap::MdpObservation> batch = {make_obs({0, 1, 2})};
        const ad::Value out = net->forward(ctx, batch);
        CHECK(out.tensor()(0, 0) == 0.0);
        CHECK(out.tensor()(0, 1) == 0.0);
    }
}

TEST_CASE("parameter counts are stable") {
    const ap::PolicySpec att = landmark_spec(ap::PolicyArch::attention);
    auto att_net = ap::make_net(att, 2, "actor");
    std::vector<nn::Param*> att_params;
    att_net->collect(att_params);
    CHECK(att_params.size() == 20);
    CHECK(scalar_count(att_params) == 15170);

    const ap::PolicySpec mlp = landmark_spec(ap::PolicyArch::mlp);
    auto mlp_net = ap::make_net(mlp, 2, "actor");
    std::vector<nn::Param*> mlp_params;
    mlp_net->collect(mlp_params);
    CHECK(scalar_count(mlp_params) == 12514);

    // The attention trunk's size is independent of the landmark count.
    const ap::PolicySpec att8 = landmark_spec(ap::PolicyArch::attention, 8);
    auto att8_net = ap::make_net(att8, 2, "actor");
    std::vector<nn::Param*> att8_params;
    att8_net->collect(att8_params);
    CHECK(scalar_count(att8_params) == 15170);

    ap::ActorCritic policy(att, 11);
    CHECK(policy.params().size() == 41);  // actor 20, log_std, critic 20
}

TEST_CASE("sampled actions agree with the evaluated log density") {
    const ap::PolicySpec spec = landmark_spec(ap::PolicyArch::attention);
    ap::ActorCritic policy(spec, 21);
    std::mt19937_64 rng(22);

    const ap::WorldConfig config;
    std::vector<ap::MdpObservation> batch;
    for (uint64_t seed = 0; seed < 6; ++seed) {
        batch.push_back(ap::assemble_observation(ap::reset_episode(config, seed), config));
    }
    const ap::ActorCritic::ActResult roll = policy.act(batch, rng);
    REQUIRE(roll.action.size() == batch.size());

    ad::Tensor actions({static_cast<int>(batch.size()), 2});
    for (size_t b = 0; b < batch.size(); ++b) {
        actions.data[2 * b] = roll.action[b][0];
        actions.data[2 * b + 1] = roll.action[b][1];
    }
    ad::Graph g;
    nn::Binder ctx(g, true);
    const ap::ActorCritic::Evaluation eval = policy.evaluate(ctx, batch, actions);
    for (size_t b = 0; b < batch.size(); ++b) {
        CHECK(std::abs(eval.logp.tensor()(static_cast<int>(b), 0) - roll.logp[b]) < 1e-12);
    }
    // Values from the rollout helper match the critic head.
    const std::vector<double> values = policy.values(batch);
    for (size_t b = 0; b < batch.size(); ++b) {
        CHECK(values[b] == roll.value[b]);
        CHECK(eval.value.tensor()(static_cast<int>(b), 0) ==
              doctest::Approx(values[b]).epsilon(1e-14));
    }
    // Fresh log_std is 0.5 per axis, so the entropy is 1 + d/2 (1 + log(2 pi)).
    CHECK(eval.entropy.tensor().data[0] ==
          doctest::Approx(3.8378770664093454836).epsilon(1e-14));
}

TEST_CASE("evaluate propagates gradients into every parameter group") {
    const ap::PolicySpec spec = landmark_spec(ap::PolicyArch::attention);
    ap::ActorCritic policy(spec, 31);
    std::mt19937_64 rng(32);

    const ap::WorldConfig config;
    std::vector<ap::MdpObservation> batch;
    for (uint64_t seed = 0; seed < 4; ++seed) {
        batch.push_back(ap::assemble_observation(ap::reset_episode(config, seed), config));
    }
    const ap::ActorCritic::ActResult roll = policy.act(batch, rng);
    ad::Tensor actions({4, 2});
    for (int b = 0; b < 4; ++b) {
        actions.data[2 * b] = roll.action[b][0];
        actions.data[2 * b + 1] = roll.action[b][1];
    }

    ad::Graph g;
    nn::Binder ctx(g, true);
    const ap::ActorCritic::Evaluation eval = policy.evaluate(ctx, batch, actions);
    const ad::Value loss =
        ad::add(ad::reduce_mean(eval.logp), ad::reduce_mean(ad::mul(eval.value, eval.value)));
    g.backward(loss);
    ctx.flush_grads();

    double actor_norm = 0.0, critic_norm = 0.0;
    for (nn::Param* p : policy.params()) {
        double norm = 0.0;
        for (double v : p->grad.data) norm += v * v;
        if (p->name.rfind("actor", 0) == 0) {
            actor_norm += norm;
        } else {
            critic_norm += norm;
        }
    }
    CHECK(actor_norm > 0.0);
    CHECK(critic_norm > 0.0);
}

TEST_CASE("same seed builds identical policies") {
    const ap::PolicySpec spec = landmark_spec(ap::PolicyArch::attention);
    ap::ActorCritic a(spec, 77), b(spec, 77), c(spec, 78);
    auto pa = a.params();
    auto pb = b.params();
    auto pc = c.params();
    bool all_equal = true, any_diff = false;
    for (size_t i = 0; i < pa.size(); ++i) {
        if (pa[i]->value.data != pb[i]->value.data) all_equal = false;
        if (pa[i]->value.data != pc[i]->value.data) any_diff = true;
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("log_std clamps into the configured interval") {
    const ap::PolicySpec spec = landmark_spec(ap::PolicyArch::attention);
    ap::ActorCritic policy(spec, 5);
    nn::Param* log_std = nullptr;
    for (nn::Param* p : policy.params()) {
        if (p->name == "actor.log_std") log_std = p;
    }
    REQUIRE(log_std != nullptr);
    log_std->value.data = {-9.0, 4.0};
    policy.clamp_log_std();
    CHECK(log_std->value.data[0] == -5.0);
    CHECK(log_std->value.data[1] == 2.0);
    CHECK(policy.log_std_values() == Eigen::Vector2d{-5.0, 2.0});
}

TEST_CASE("joint architecture consumes map observations") {
    ap::WorldConfig config;
    config.n_l = 5;
    config.episode_len = 15;
    config.landmark_range = 10.0;
    config.landmark_center = {15.0, 15.0};
    config.agent_center = {15.0, 15.0};
    config.map_enabled = true;
    config.rho = 0.2;
    const ap::PolicySpec spec =
        ap::PolicySpec::from_world(ap::PolicyArch::attention_joint, config);
    ap::ActorCritic policy(spec, 41);

    std::vector<ap::MdpObservation> batch;
    for (uint64_t seed = 0; seed < 3; ++seed) {
        batch.push_back(ap::assemble_observation(ap::reset_episode(config, seed), config));
    }
    const auto means = policy.mean_actions(batch);
    const auto values = policy.values(batch);
    REQUIRE(means.size() == 3);
    REQUIRE(values.size() == 3);
    for (const auto& m : means) {
        CHECK(std::isfinite(m[0]));
        CHECK(std::isfinite(m[1]));
    }
    std::mt19937_64 rng(42);
    const auto roll = policy.act(batch, rng);
    CHECK(std::isfinite(roll.logp[0]));
}

TEST_CASE("architecture names round-trip and misuse is rejected") {
    for (ap::PolicyArch arch : {ap::PolicyArch::attention, ap::PolicyArch::mlp,
                                ap::PolicyArch::attention_joint}) {
        CHECK(ap::parse_arch(ap::arch_name(arch)) == arch);
    }
    CHECK_THROWS_AS(ap::parse_arch("transformer"), ap::ConfigError);

    ap::WorldConfig landmark_world;
    CHECK_THROWS_AS(
        ap::PolicySpec::from_world(ap::PolicyArch::attention_joint, landmark_world),
        ap::ConfigError);
    ap::WorldConfig joint_world;
    joint_world.map_enabled = true;
    CHECK_THROWS_AS(ap::PolicySpec::from_world(ap::PolicyArch::attention, joint_world),
                    ap::ConfigError);
}
