#pragma once

#include <Eigen/Core>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ap/env.hpp"
#include "ap/nn.hpp"
#include "ap/tensor.hpp"

namespace ap {

enum class PolicyArch {
    attention,        // permutation-invariant landmark pooling
    mlp,              // flat landmark block baseline
    attention_joint,  // attention trunk plus a conv branch over the map planes
};

PolicyArch parse_arch(const std::string& name);
std::string arch_name(PolicyArch arch);

// Fixed input standardization so every network input is order one: positions
// are centered and divided by the scene range, information values enter on a
// log scale relative to their initial level.
struct ObsNorm {
    Eigen::Vector2d center{0.0, 0.0};
    double range = 8.0;
    double sigma = 0.5;
};

struct PolicySpec {
    PolicyArch arch = PolicyArch::attention;
    int n_l = 3;
    bool map_enabled = false;
    int map_h = 15;
    int map_w = 15;
    ObsNorm norm;

    static PolicySpec from_world(PolicyArch arch, const WorldConfig& config);
    int obs_dim() const;
    void validate() const;
};

// One network with a single output head (action mean or state value).
class Net {
  public:
    virtual ~Net() = default;
    virtual ad::Value forward(nn::Binder& ctx, std::span<const MdpObservation> obs) = 0;
    virtual void collect(std::vector<nn::Param*>& out) = 0;
    virtual void init(std::mt19937_64& rng, double out_gain) = 0;
};

std::unique_ptr<Net> make_net(const PolicySpec& spec, int out_dim, const std::string& name);

// Diagonal-Gaussian actor plus a value critic over the same observations.
// The log standard deviation is a free state-independent parameter, clamped
// to [-5, 2] after every optimizer step.
class ActorCritic {
  public:
    ActorCritic(const PolicySpec& spec, uint64_t seed);

    struct ActResult {
        std::vector<Eigen::Vector2d> action;
        std::vector<double> logp;
        std::vector<double> value;
    };

    // Rollout-path helpers; no gradients are recorded.
    ActResult act(std::span<const MdpObservation> obs, std::mt19937_64& rng);
    std::vector<Eigen::Vector2d> mean_actions(std::span<const MdpObservation> obs);
    std::vector<double> values(std::span<const MdpObservation> obs);

    // Training path: log probabilities of the given actions, state values,
    // and the (state-independent) per-sample entropy, on one graph.
    struct Evaluation {
        ad::Value logp;     // (B, 1)
        ad::Value value;    // (B, 1)
        ad::Value entropy;  // (1, 1)
    };
    Evaluation evaluate(nn::Binder& ctx, std::span<const MdpObservation> obs,
                        const ad::Tensor& actions);

    void clamp_log_std(double lo = -5.0, double hi = 2.0);

    std::vector<nn::Param*> params();       // actor + log_std + critic
    const PolicySpec& spec() const { return spec_; }
    Eigen::Vector2d log_std_values() const;

  private:
    PolicySpec spec_;
    std::unique_ptr<Net> actor_;
    std::unique_ptr<Net> critic_;
    nn::Param log_std_;
};

}  // namespace ap
