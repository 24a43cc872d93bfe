#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "ap/env.hpp"
#include "ap/nn.hpp"
#include "ap/policy.hpp"

namespace ap {

// Experience collected from a batch of synchronized environments. Entries are
// stored time-major: index t * n_envs + e holds step t of environment e.
struct RolloutBuffer {
    int n_envs = 0;
    int horizon = 0;
    std::vector<MdpObservation> obs;
    std::vector<Eigen::Vector2d> actions;
    std::vector<double> logp;
    std::vector<double> values;
    std::vector<double> rewards;
    std::vector<uint8_t> dones;
    std::vector<double> bootstrap_values;  // critic value of each env's state after step horizon-1

    void init(int envs, int steps);
    int size() const { return n_envs * horizon; }
    int at(int t, int e) const { return t * n_envs + e; }
};

// Generalized advantage estimation over a time-major buffer layout. A done
// flag at step t cuts both the bootstrap and the recursion, so episodes never
// leak value across resets. Returns are advantages + values.
void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                 const std::vector<uint8_t>& dones, const std::vector<double>& bootstrap_values,
                 int n_envs, double gamma, double lam, std::vector<double>& advantages,
                 std::vector<double>& returns);

struct TrainConfig {
    int total_env_steps = 200000;
    int n_envs = 16;
    int epochs = 10;
    int minibatch = 64;
    double gamma = 0.99;
    double lam = 0.95;
    double clip_eps = 0.2;
    double learning_rate = 3e-4;
    bool anneal_lr = true;  // linear decay of the learning rate to zero
    double value_coef = 0.5;
    double entropy_coef = 0.0;
    double max_grad_norm = 0.5;
    int eval_every = 10000;  // env steps between deterministic evaluations
    int eval_episodes = 30;
    uint64_t seed = 0;

    void validate() const;
};

struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
    int minibatches = 0;
};

// One PPO update over the buffer: advantages are normalized once across the
// whole batch, then `epochs` shuffled passes of clipped-surrogate minibatch
// steps run through the shared optimizer. Throws ContractError if the loss
// ever turns non-finite.
UpdateStats ppo_update(ActorCritic& policy, nn::Adam& optimizer, const RolloutBuffer& buffer,
                       const std::vector<double>& advantages, const std::vector<double>& returns,
                       const TrainConfig& config, std::mt19937_64& shuffle_rng);

struct EvalStats {
    double mean_reward = 0.0;
    double std_reward = 0.0;
    double mean_mae = 0.0;
};

// Deterministic evaluation: mean actions, episodes seeded derive_seed(seed_base, {i})
// so successive evaluations of a training run see identical initial states.
EvalStats evaluate_policy(ActorCritic& policy, const WorldConfig& world, uint64_t seed_base,
                          int episodes);

// Uniform-random actions in the control box, on the same episode seeds as
// evaluate_policy for a paired comparison.
EvalStats evaluate_random(const WorldConfig& world, uint64_t seed_base, int episodes);

struct CurvePoint {
    int env_steps = 0;
    EvalStats stats;
};

struct TrainResult {
    std::vector<CurvePoint> curve;
    EvalStats final_eval;
    int env_steps = 0;
    int updates = 0;
};

using EvalCallback = std::function<void(int env_steps, const EvalStats&, ActorCritic&)>;

// On-policy training: each rollout runs every environment for one full episode
// (the horizon equals the episode length), then one ppo_update consumes it.
// Episode seeds follow derive_seed(config.seed, {kEnvStream, env, episode}),
// so runs are bit-reproducible for a fixed configuration.
TrainResult train_ppo(ActorCritic& policy, const WorldConfig& world, const TrainConfig& config,
                      const EvalCallback& on_eval = {});

}  // namespace ap
