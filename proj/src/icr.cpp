#include "ap/icr.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "ap/common.hpp"
#include "ap/rng.hpp"
#include "ap/tensor.hpp"

namespace ap {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kDistEps = 1e-12;  // keeps sqrt differentiable at coincident points

struct Problem {
    Eigen::Vector2d x0;
    std::vector<Eigen::Vector2d> mu;
    Eigen::VectorXd lambda0;
    double radius = 0.0;
    double kappa = 0.0;
    double m = 0.0;  // per-coordinate information rate 1/sigma^2
    double bound = 0.0;
    double log_lambda_offset = 0.0;  // sum of log lambda0, subtracted from the raw graph value
};

Problem make_problem(const Eigen::Vector2d& x0, const std::vector<Eigen::Vector2d>& mu,
                     const Eigen::VectorXd& lambda0, const WorldConfig& world) {
    AP_CHECK(!mu.empty(), "the planner needs at least one landmark");
    AP_CHECK(lambda0.size() == static_cast<Eigen::Index>(2 * mu.size()),
             "two prior information entries per landmark");
    AP_CHECK((lambda0.array() > 0.0).all(), "prior information must be positive");
    Problem p;
    p.x0 = x0;
    p.mu = mu;
    p.lambda0 = lambda0;
    p.radius = world.fov.radius;
    p.kappa = world.fov.kappa;
    p.m = 1.0 / (world.sigma * world.sigma);
    p.bound = world.control_bound;
    p.log_lambda_offset = lambda0.array().log().sum();
    return p;
}

// Builds the objective graph over a (T, 2) control leaf and returns the
// objective value; when grad_out is non-null the tape also runs backward.
double eval_objective(const Problem& p, const std::vector<Eigen::Vector2d>& controls,
                      std::vector<Eigen::Vector2d>* grad_out) {
    const int T = static_cast<int>(controls.size());
    if (T == 0) {
        if (grad_out) grad_out->clear();
        return 0.0;
    }

    ad::Graph g;
    ad::Tensor u({T, 2});
    for (int t = 0; t < T; ++t) {
        u(t, 0) = controls[static_cast<size_t>(t)][0];
        u(t, 1) = controls[static_cast<size_t>(t)][1];
    }
    const ad::Value u_leaf = g.leaf(u);

    ad::Tensor x0_rows({T, 2});
    for (int t = 0; t < T; ++t) {
        x0_rows(t, 0) = p.x0[0];
        x0_rows(t, 1) = p.x0[1];
    }
    const ad::Value positions = ad::add(ad::cumsum_rows(u_leaf), g.constant(x0_rows));
    const ad::Value ones2 = g.constant(ad::Tensor::constant({2, 1}, 1.0));

    ad::Value obj;
    for (size_t j = 0; j < p.mu.size(); ++j) {
        ad::Tensor mu_rows({T, 2});
        for (int t = 0; t < T; ++t) {
            mu_rows(t, 0) = p.mu[j][0];
            mu_rows(t, 1) = p.mu[j][1];
        }
        const ad::Value q = ad::sub(positions, g.constant(mu_rows));
        const ad::Value dist = ad::sqrt(ad::add_scalar(ad::matmul(ad::mul(q, q), ones2), kDistEps));
        // w = 0.5 (1 - erf((dist - r) / (sqrt(2) kappa) - 2)), the soft FoV weight
        const ad::Value s =
            ad::add_scalar(ad::mul_scalar(ad::add_scalar(dist, -p.radius), 1.0 / (kSqrt2 * p.kappa)),
                           -2.0);
        const ad::Value w = ad::mul_scalar(ad::add_scalar(ad::mul_scalar(ad::erf(s), -1.0), 1.0), 0.5);
        const ad::Value weight_sum = ad::reduce_sum(w);
        for (int c = 0; c < 2; ++c) {
            const double lam = p.lambda0[static_cast<Eigen::Index>(2 * j + c)];
            const ad::Value term = ad::log(ad::add_scalar(ad::mul_scalar(weight_sum, p.m), lam));
            obj = obj.valid() ? ad::add(obj, term) : term;
        }
    }

    const double value = obj.tensor().data[0] - p.log_lambda_offset;
    if (grad_out) {
        g.backward(obj);
        const ad::Tensor& du = u_leaf.grad();
        grad_out->assign(static_cast<size_t>(T), Eigen::Vector2d::Zero());
        for (int t = 0; t < T; ++t) {
            (*grad_out)[static_cast<size_t>(t)] = Eigen::Vector2d{du(t, 0), du(t, 1)};
        }
    }
    return value;
}

void project(std::vector<Eigen::Vector2d>& controls, double bound) {
    for (Eigen::Vector2d& c : controls) {
        c[0] = std::clamp(c[0], -bound, bound);
        c[1] = std::clamp(c[1], -bound, bound);
    }
}

struct RestartResult {
    std::vector<Eigen::Vector2d> controls;
    double objective = 0.0;
    int iterations = 0;
    std::vector<double> history;
};

RestartResult optimize_restart(const Problem& p, std::vector<Eigen::Vector2d> u,
                               const IcrConfig& config) {
    project(u, p.bound);
    std::vector<Eigen::Vector2d> grad;
    double obj = eval_objective(p, u, &grad);
    RestartResult result{u, obj, 0, {obj}};

    for (int it = 0; it < config.max_iters; ++it) {
        double step = config.step_size;
        std::vector<Eigen::Vector2d> candidate;
        double cand_obj = obj;
        bool improved = false;
        while (step >= 1e-10) {
            candidate = result.controls;
            for (size_t t = 0; t < candidate.size(); ++t) {
                candidate[t] += step * grad[t];
            }
            project(candidate, p.bound);
            cand_obj = eval_objective(p, candidate, nullptr);
            if (cand_obj > obj) {
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;

        const double rel_gain = (cand_obj - obj) / std::max(1.0, std::abs(obj));
        result.controls = std::move(candidate);
        obj = cand_obj;
        result.objective = obj;
        result.iterations = it + 1;
        result.history.push_back(obj);
        if (rel_gain < config.rel_tol) break;
        eval_objective(p, result.controls, &grad);
    }
    return result;
}

}  // namespace

void IcrConfig::validate() const {
    if (step_size <= 0.0) throw ConfigError("planner step_size must be positive");
    if (max_iters < 0) throw ConfigError("planner max_iters must be nonnegative");
    if (rel_tol < 0.0) throw ConfigError("planner rel_tol must be nonnegative");
    if (restarts < 1) throw ConfigError("planner needs at least one restart");
    if (workers < 0) throw ConfigError("planner workers must be nonnegative");
}

double icr_objective(const std::vector<Eigen::Vector2d>& controls, const Eigen::Vector2d& x0,
                     const std::vector<Eigen::Vector2d>& mu, const Eigen::VectorXd& lambda0,
                     const WorldConfig& world) {
    return eval_objective(make_problem(x0, mu, lambda0, world), controls, nullptr);
}

double icr_objective_grad(const std::vector<Eigen::Vector2d>& controls, const Eigen::Vector2d& x0,
                          const std::vector<Eigen::Vector2d>& mu, const Eigen::VectorXd& lambda0,
                          const WorldConfig& world, std::vector<Eigen::Vector2d>& grad_out) {
    return eval_objective(make_problem(x0, mu, lambda0, world), controls, &grad_out);
}

IcrPlan plan_icr(const EpisodeState& state, const WorldConfig& world, const IcrConfig& config) {
    config.validate();
    world.validate();
    const int T = config.horizon < 0 ? world.episode_len : config.horizon;

    IcrPlan plan;
    if (T == 0) return plan;

    std::vector<Eigen::Vector2d> mu(static_cast<size_t>(state.belief.num_landmarks()));
    for (size_t j = 0; j < mu.size(); ++j) {
        mu[j] = Eigen::Vector2d{state.belief.mu[static_cast<Eigen::Index>(2 * j)],
                                state.belief.mu[static_cast<Eigen::Index>(2 * j + 1)]};
    }
    const Problem p = make_problem(state.x, mu, state.belief.info_hard, world);

    // Restart 0 stays put; the others start from uniform controls in the box.
    std::vector<std::vector<Eigen::Vector2d>> starts(static_cast<size_t>(config.restarts));
    starts[0].assign(static_cast<size_t>(T), Eigen::Vector2d::Zero());
    for (int r = 1; r < config.restarts; ++r) {
        std::mt19937_64 rng(derive_seed(config.seed, {static_cast<uint64_t>(r)}));
        std::uniform_real_distribution<double> box(-p.bound, p.bound);
        auto& s = starts[static_cast<size_t>(r)];
        s.resize(static_cast<size_t>(T));
        for (int t = 0; t < T; ++t) {
            const double ux = box(rng);
            const double uy = box(rng);
            s[static_cast<size_t>(t)] = Eigen::Vector2d{ux, uy};
        }
    }

    std::vector<RestartResult> results(static_cast<size_t>(config.restarts));
    unsigned int workers = config.workers > 0 ? static_cast<unsigned int>(config.workers)
                                              : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, static_cast<unsigned int>(config.restarts));
    std::atomic<int> next{0};
    auto run = [&]() {
        for (int r = next.fetch_add(1); r < config.restarts; r = next.fetch_add(1)) {
            results[static_cast<size_t>(r)] = optimize_restart(p, starts[static_cast<size_t>(r)], config);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (std::thread& t : pool) t.join();

    int best = 0;
    for (int r = 1; r < config.restarts; ++r) {
        if (results[static_cast<size_t>(r)].objective > results[static_cast<size_t>(best)].objective) {
            best = r;
        }
    }
    plan.controls = results[static_cast<size_t>(best)].controls;
    plan.objective = results[static_cast<size_t>(best)].objective;
    plan.iterations = results[static_cast<size_t>(best)].iterations;
    plan.restart_index = best;
    plan.history = results[static_cast<size_t>(best)].history;
    plan.positions.resize(plan.controls.size());
    Eigen::Vector2d x = state.x;
    for (size_t t = 0; t < plan.controls.size(); ++t) {
        x += plan.controls[t];
        plan.positions[t] = x;
    }
    return plan;
}

EvalStats evaluate_icr(const WorldConfig& world, uint64_t seed_base, int episodes,
                       const IcrConfig& config) {
    AP_CHECK(episodes > 0, "evaluation needs at least one episode");
    std::vector<double> totals, maes;
    totals.reserve(static_cast<size_t>(episodes));
    for (int i = 0; i < episodes; ++i) {
        EpisodeState state =
            reset_episode(world, derive_seed(seed_base, {static_cast<uint64_t>(i)}));
        const IcrPlan plan = plan_icr(state, world, config);
        double total = 0.0;
        for (int t = 0; t < world.episode_len; ++t) {
            const Eigen::Vector2d u = t < static_cast<int>(plan.controls.size())
                                          ? plan.controls[static_cast<size_t>(t)]
                                          : Eigen::Vector2d::Zero();
            total += step_episode(state, u, world).reward;
        }
        totals.push_back(total);
        maes.push_back(mae(state.belief.mu, state.y_true));
    }
    EvalStats stats;
    const double n = static_cast<double>(episodes);
    for (double t : totals) stats.mean_reward += t;
    stats.mean_reward /= n;
    double var = 0.0;
    for (double t : totals) var += (t - stats.mean_reward) * (t - stats.mean_reward);
    stats.std_reward = std::sqrt(var / n);
    for (double m : maes) stats.mean_mae += m;
    stats.mean_mae /= n;
    return stats;
}

}  // namespace ap
