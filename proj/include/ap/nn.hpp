#pragma once

#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ap/tensor.hpp"

namespace ap::nn {

// A trainable tensor with its accumulated gradient and Adam state.
struct Param {
    std::string name;
    ad::Tensor value;
    ad::Tensor grad;
    ad::Tensor adam_m;
    ad::Tensor adam_v;

    Param() = default;
    Param(std::string name_in, std::vector<int> shape);
    void zero_grad();
};

// Ties parameters to one graph for one forward/backward pass: leaves when
// training, constants when only the values are needed. After backward,
// flush_grads() adds the graph gradients into each Param::grad.
class Binder {
  public:
    Binder(ad::Graph& graph, bool trainable);

    ad::Value bind(Param& p);
    void flush_grads();
    bool trainable() const { return trainable_; }
    ad::Graph& graph() { return *graph_; }

  private:
    ad::Graph* graph_;
    bool trainable_;
    std::vector<std::pair<Param*, ad::Value>> bound_;
};

// Fully connected layer, weights (in, out), bias (1, out).
struct Linear {
    Param w;
    Param b;

    Linear(const std::string& name, int in, int out);
    ad::Value forward(Binder& ctx, ad::Value x);
    void init(std::mt19937_64& rng, double gain = 1.0);
    void collect(std::vector<Param*>& out);
};

// Valid-padding stride-1 square convolution, weights (out_ch, in_ch, k, k).
struct Conv {
    Param w;
    Param b;
    int in_ch, out_ch, k;

    Conv(const std::string& name, int in_ch, int out_ch, int k);
    ad::Value forward(Binder& ctx, ad::Value x);
    void init(std::mt19937_64& rng, double gain = 1.0);
    void collect(std::vector<Param*>& out);
};

// Uniform init on [-bound, bound] with bound = gain * sqrt(6 / (fan_in +
// fan_out)).
void scaled_uniform_init(ad::Tensor& t, std::mt19937_64& rng, double gain, int fan_in,
                         int fan_out);

// sqrt of the sum of squared gradient entries across all parameters.
double global_grad_norm(std::span<Param* const> params);

// Rescales all gradients when their global norm exceeds max_norm.
void clip_grad_norm(std::span<Param* const> params, double max_norm);

class Adam {
  public:
    explicit Adam(double lr = 3e-4, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    // One update from the accumulated gradients; increments the shared step
    // counter and clears the gradients.
    void step(std::span<Param* const> params);
    int steps_taken() const { return t_; }
    double learning_rate() const { return lr_; }
    // Supports schedules (e.g. linear annealing); moment state is kept.
    void set_learning_rate(double lr) { lr_ = lr; }

  private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
};

}  // namespace ap::nn
