#include "ap/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ap/common.hpp"
#include "ap/rng.hpp"
#include "ap/tensor.hpp"

namespace ap {

namespace {

// Seed-stream tags, hashed together with the run seed so the action noise,
// minibatch shuffling, environment episodes, and evaluation episodes each draw
// from independent deterministic streams.
constexpr uint64_t kActStream = 0xAC;
constexpr uint64_t kShuffleStream = 0x5F;
constexpr uint64_t kEnvStream = 0xEE;
constexpr uint64_t kEvalStream = 0xEA;

struct Moments {
    double mean = 0.0;
    double stddev = 0.0;  // population convention
};

Moments moments(const std::vector<double>& xs) {
    Moments m;
    if (xs.empty()) return m;
    m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - m.mean) * (x - m.mean);
    m.stddev = std::sqrt(var / static_cast<double>(xs.size()));
    return m;
}

EvalStats run_eval_episodes(const WorldConfig& world, uint64_t seed_base, int episodes,
                            const std::function<void(const std::vector<MdpObservation>&,
                                                     std::vector<Eigen::Vector2d>&)>& act) {
    AP_CHECK(episodes > 0, "evaluation needs at least one episode");
    std::vector<EpisodeState> states;
    states.reserve(static_cast<size_t>(episodes));
    for (int i = 0; i < episodes; ++i) {
        states.push_back(reset_episode(world, derive_seed(seed_base, {static_cast<uint64_t>(i)})));
    }
    std::vector<double> totals(static_cast<size_t>(episodes), 0.0);
    std::vector<MdpObservation> batch(static_cast<size_t>(episodes));
    std::vector<Eigen::Vector2d> actions(static_cast<size_t>(episodes));
    for (int t = 0; t < world.episode_len; ++t) {
        for (int i = 0; i < episodes; ++i) batch[i] = assemble_observation(states[i], world);
        act(batch, actions);
        for (int i = 0; i < episodes; ++i) {
            totals[static_cast<size_t>(i)] += step_episode(states[i], actions[i], world).reward;
        }
    }
    std::vector<double> maes(static_cast<size_t>(episodes), 0.0);
    for (int i = 0; i < episodes; ++i) {
        maes[static_cast<size_t>(i)] = mae(states[i].belief.mu, states[i].y_true);
    }
    const Moments reward = moments(totals);
    const Moments err = moments(maes);
    return EvalStats{reward.mean, reward.stddev, err.mean};
}

}  // namespace

void RolloutBuffer::init(int envs, int steps) {
    AP_CHECK(envs > 0 && steps > 0, "rollout buffer needs positive dimensions");
    n_envs = envs;
    horizon = steps;
    const size_t n = static_cast<size_t>(envs) * static_cast<size_t>(steps);
    obs.assign(n, {});
    actions.assign(n, Eigen::Vector2d::Zero());
    logp.assign(n, 0.0);
    values.assign(n, 0.0);
    rewards.assign(n, 0.0);
    dones.assign(n, 0);
    bootstrap_values.assign(static_cast<size_t>(envs), 0.0);
}

void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                 const std::vector<uint8_t>& dones, const std::vector<double>& bootstrap_values,
                 int n_envs, double gamma, double lam, std::vector<double>& advantages,
                 std::vector<double>& returns) {
    AP_CHECK(n_envs > 0, "compute_gae needs a positive environment count");
    AP_CHECK(!rewards.empty() && rewards.size() % static_cast<size_t>(n_envs) == 0,
             "reward count must be a positive multiple of n_envs");
    AP_CHECK(values.size() == rewards.size() && dones.size() == rewards.size(),
             "values and dones must match the reward layout");
    AP_CHECK(bootstrap_values.size() == static_cast<size_t>(n_envs),
             "one bootstrap value per environment");
    AP_CHECK(gamma >= 0.0 && gamma <= 1.0 && lam >= 0.0 && lam <= 1.0,
             "gamma and lambda must lie in [0, 1]");

    const int horizon = static_cast<int>(rewards.size()) / n_envs;
    advantages.assign(rewards.size(), 0.0);
    returns.assign(rewards.size(), 0.0);
    std::vector<double> last_adv(static_cast<size_t>(n_envs), 0.0);
    for (int t = horizon - 1; t >= 0; --t) {
        for (int e = 0; e < n_envs; ++e) {
            const size_t idx = static_cast<size_t>(t) * n_envs + e;
            const double next_value = (t == horizon - 1)
                                          ? bootstrap_values[static_cast<size_t>(e)]
                                          : values[idx + static_cast<size_t>(n_envs)];
            const double not_done = dones[idx] ? 0.0 : 1.0;
            const double delta = rewards[idx] + gamma * next_value * not_done - values[idx];
            last_adv[static_cast<size_t>(e)] =
                delta + gamma * lam * not_done * last_adv[static_cast<size_t>(e)];
            advantages[idx] = last_adv[static_cast<size_t>(e)];
            returns[idx] = advantages[idx] + values[idx];
        }
    }
}

void TrainConfig::validate() const {
    if (total_env_steps < 0) throw ConfigError("total_env_steps must be nonnegative");
    if (n_envs < 1) throw ConfigError("n_envs must be positive");
    if (epochs < 1) throw ConfigError("epochs must be positive");
    if (minibatch < 1) throw ConfigError("minibatch must be positive");
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0, 1]");
    if (lam < 0.0 || lam > 1.0) throw ConfigError("lambda must lie in [0, 1]");
    if (clip_eps <= 0.0) throw ConfigError("clip_eps must be positive");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (value_coef < 0.0) throw ConfigError("value_coef must be nonnegative");
    if (entropy_coef < 0.0) throw ConfigError("entropy_coef must be nonnegative");
    if (max_grad_norm <= 0.0) throw ConfigError("max_grad_norm must be positive");
    if (eval_every < 1) throw ConfigError("eval_every must be positive");
    if (eval_episodes < 1) throw ConfigError("eval_episodes must be positive");
}

UpdateStats ppo_update(ActorCritic& policy, nn::Adam& optimizer, const RolloutBuffer& buffer,
                       const std::vector<double>& advantages, const std::vector<double>& returns,
                       const TrainConfig& config, std::mt19937_64& shuffle_rng) {
    config.validate();
    const int n = buffer.size();
    AP_CHECK(n > 0, "ppo_update needs a non-empty rollout");
    AP_CHECK(advantages.size() == static_cast<size_t>(n) &&
                 returns.size() == static_cast<size_t>(n),
             "advantages and returns must match the buffer size");

    // Normalize advantages once across the whole batch; every epoch reuses the
    // same normalized targets.
    const Moments adv_m = moments(advantages);
    std::vector<double> adv_norm(advantages.size());
    for (size_t i = 0; i < advantages.size(); ++i) {
        adv_norm[i] = (advantages[i] - adv_m.mean) / (adv_m.stddev + 1e-8);
    }

    const std::vector<nn::Param*> params = policy.params();
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    UpdateStats stats;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (int start = 0; start < n; start += config.minibatch) {
            const int b = std::min(config.minibatch, n - start);
            std::vector<MdpObservation> mb_obs(static_cast<size_t>(b));
            ad::Tensor mb_actions({b, 2});
            ad::Tensor mb_logp_old({b, 1});
            ad::Tensor mb_adv({b, 1});
            ad::Tensor mb_ret({b, 1});
            for (int i = 0; i < b; ++i) {
                const size_t src = static_cast<size_t>(order[static_cast<size_t>(start + i)]);
                mb_obs[static_cast<size_t>(i)] = buffer.obs[src];
                mb_actions.data[static_cast<size_t>(2 * i)] = buffer.actions[src][0];
                mb_actions.data[static_cast<size_t>(2 * i + 1)] = buffer.actions[src][1];
                mb_logp_old.data[static_cast<size_t>(i)] = buffer.logp[src];
                mb_adv.data[static_cast<size_t>(i)] = adv_norm[src];
                mb_ret.data[static_cast<size_t>(i)] = returns[src];
            }

            ad::Graph g;
            nn::Binder ctx(g, true);
            const ActorCritic::Evaluation eval = policy.evaluate(ctx, mb_obs, mb_actions);
            const ad::Value logp_old = g.constant(mb_logp_old);
            const ad::Value ratio = ad::exp(ad::sub(eval.logp, logp_old));
            const ad::Value adv = g.constant(mb_adv);
            const ad::Value lo = g.constant(ad::Tensor::constant({b, 1}, 1.0 - config.clip_eps));
            const ad::Value hi = g.constant(ad::Tensor::constant({b, 1}, 1.0 + config.clip_eps));
            const ad::Value surr1 = ad::mul(ratio, adv);
            const ad::Value surr2 = ad::mul(ad::min(ad::max(ratio, lo), hi), adv);
            const ad::Value policy_loss =
                ad::mul_scalar(ad::reduce_mean(ad::min(surr1, surr2)), -1.0);
            const ad::Value verr = ad::sub(eval.value, g.constant(mb_ret));
            const ad::Value value_loss = ad::reduce_mean(ad::mul(verr, verr));
            ad::Value total = ad::add(policy_loss, ad::mul_scalar(value_loss, config.value_coef));
            if (config.entropy_coef != 0.0) {
                total = ad::sub(total, ad::mul_scalar(eval.entropy, config.entropy_coef));
            }

            const double loss_value = total.tensor().data[0];
            if (!std::isfinite(loss_value)) {
                std::ostringstream msg;
                msg << "non-finite PPO loss (policy=" << policy_loss.tensor().data[0]
                    << ", value=" << value_loss.tensor().data[0] << ", epoch=" << epoch
                    << ", optimizer step=" << optimizer.steps_taken()
                    << "); check rewards and learning rate";
                throw ContractError(msg.str());
            }

            g.backward(total);
            ctx.flush_grads();
            nn::clip_grad_norm(params, config.max_grad_norm);
            optimizer.step(params);
            policy.clamp_log_std();

            stats.policy_loss += policy_loss.tensor().data[0];
            stats.value_loss += value_loss.tensor().data[0];
            stats.entropy += eval.entropy.tensor().data[0];
            int clipped_count = 0;
            double kl = 0.0;
            for (int i = 0; i < b; ++i) {
                const double r = ratio.tensor()(i, 0);
                if (std::abs(r - 1.0) > config.clip_eps) ++clipped_count;
                kl += mb_logp_old.data[static_cast<size_t>(i)] - eval.logp.tensor()(i, 0);
            }
            stats.clip_fraction += static_cast<double>(clipped_count) / b;
            stats.approx_kl += kl / b;
            stats.minibatches += 1;
        }
    }
    if (stats.minibatches > 0) {
        stats.policy_loss /= stats.minibatches;
        stats.value_loss /= stats.minibatches;
        stats.entropy /= stats.minibatches;
        stats.clip_fraction /= stats.minibatches;
        stats.approx_kl /= stats.minibatches;
    }
    return stats;
}

EvalStats evaluate_policy(ActorCritic& policy, const WorldConfig& world, uint64_t seed_base,
                          int episodes) {
    return run_eval_episodes(world, seed_base, episodes,
                             [&policy](const std::vector<MdpObservation>& batch,
                                       std::vector<Eigen::Vector2d>& actions) {
                                 actions = policy.mean_actions(batch);
                             });
}

EvalStats evaluate_random(const WorldConfig& world, uint64_t seed_base, int episodes) {
    std::mt19937_64 rng(derive_seed(seed_base, {kActStream}));
    const double bound = world.control_bound;
    return run_eval_episodes(world, seed_base, episodes,
                             [&rng, bound](const std::vector<MdpObservation>& batch,
                                           std::vector<Eigen::Vector2d>& actions) {
                                 for (size_t i = 0; i < batch.size(); ++i) {
                                     std::uniform_real_distribution<double> u(-bound, bound);
                                     const double ux = u(rng);
                                     const double uy = u(rng);
                                     actions[i] = Eigen::Vector2d{ux, uy};
                                 }
                             });
}

TrainResult train_ppo(ActorCritic& policy, const WorldConfig& world, const TrainConfig& config,
                      const EvalCallback& on_eval) {
    config.validate();
    world.validate();
    AP_CHECK(policy.spec().obs_dim() == world.obs_dim(),
             "policy observation layout must match the world");

    const int horizon = world.episode_len;
    const int steps_per_rollout = config.n_envs * horizon;

    std::mt19937_64 act_rng(derive_seed(config.seed, {kActStream}));
    std::mt19937_64 shuffle_rng(derive_seed(config.seed, {kShuffleStream}));
    const uint64_t eval_base = derive_seed(config.seed, {kEvalStream});

    std::vector<EpisodeState> states;
    std::vector<uint64_t> episode_index(static_cast<size_t>(config.n_envs), 0);
    states.reserve(static_cast<size_t>(config.n_envs));
    for (int e = 0; e < config.n_envs; ++e) {
        states.push_back(reset_episode(
            world, derive_seed(config.seed, {kEnvStream, static_cast<uint64_t>(e), 0})));
    }
    std::vector<MdpObservation> current_obs(static_cast<size_t>(config.n_envs));
    for (int e = 0; e < config.n_envs; ++e) {
        current_obs[static_cast<size_t>(e)] = assemble_observation(states[e], world);
    }

    nn::Adam optimizer(config.learning_rate);
    RolloutBuffer buffer;
    std::vector<double> advantages, returns;

    TrainResult result;
    auto run_eval = [&]() {
        const EvalStats stats = evaluate_policy(policy, world, eval_base, config.eval_episodes);
        result.curve.push_back(CurvePoint{result.env_steps, stats});
        result.final_eval = stats;
        if (on_eval) on_eval(result.env_steps, stats, policy);
    };

    int next_eval = 0;
    while (result.env_steps < config.total_env_steps) {
        if (result.env_steps >= next_eval) {
            run_eval();
            next_eval += config.eval_every;
        }

        buffer.init(config.n_envs, horizon);
        for (int t = 0; t < horizon; ++t) {
            const ActorCritic::ActResult roll = policy.act(current_obs, act_rng);
            for (int e = 0; e < config.n_envs; ++e) {
                const int idx = buffer.at(t, e);
                buffer.obs[static_cast<size_t>(idx)] = current_obs[static_cast<size_t>(e)];
                buffer.actions[static_cast<size_t>(idx)] = roll.action[static_cast<size_t>(e)];
                buffer.logp[static_cast<size_t>(idx)] = roll.logp[static_cast<size_t>(e)];
                buffer.values[static_cast<size_t>(idx)] = roll.value[static_cast<size_t>(e)];
                const StepResult step = step_episode(states[e], roll.action[static_cast<size_t>(e)], world);
                buffer.rewards[static_cast<size_t>(idx)] = step.reward;
                buffer.dones[static_cast<size_t>(idx)] = step.done ? 1 : 0;
                if (step.done) {
                    episode_index[static_cast<size_t>(e)] += 1;
                    states[e] = reset_episode(
                        world, derive_seed(config.seed, {kEnvStream, static_cast<uint64_t>(e),
                                                         episode_index[static_cast<size_t>(e)]}));
                    current_obs[static_cast<size_t>(e)] = assemble_observation(states[e], world);
                } else {
                    current_obs[static_cast<size_t>(e)] = step.obs;
                }
            }
        }
        buffer.bootstrap_values = policy.values(current_obs);

        compute_gae(buffer.rewards, buffer.values, buffer.dones, buffer.bootstrap_values,
                    config.n_envs, config.gamma, config.lam, advantages, returns);
        if (config.anneal_lr) {
            const double remaining =
                1.0 - static_cast<double>(result.env_steps) / config.total_env_steps;
            optimizer.set_learning_rate(config.learning_rate * remaining);
        }
        ppo_update(policy, optimizer, buffer, advantages, returns, config, shuffle_rng);
        result.updates += 1;
        result.env_steps += steps_per_rollout;
    }

    run_eval();
    return result;
}

}  // namespace ap
