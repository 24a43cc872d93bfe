#include "ap/nn.hpp"

#include <cmath>

#include "ap/common.hpp"

namespace ap::nn {

Param::Param(std::string name_in, std::vector<int> shape) : name(std::move(name_in)) {
    value = ad::Tensor::zeros(shape);
    grad = ad::Tensor::zeros(shape);
    adam_m = ad::Tensor::zeros(shape);
    adam_v = ad::Tensor::zeros(std::move(shape));
}

void Param::zero_grad() {
    for (double& v : grad.data) v = 0.0;
}

Binder::Binder(ad::Graph& graph, bool trainable) : graph_(&graph), trainable_(trainable) {}

ad::Value Binder::bind(Param& p) {
    const ad::Value v =
        trainable_ ? graph_->leaf(p.value) : graph_->constant(p.value);
    if (trainable_) {
        bound_.emplace_back(&p, v);
    }
    return v;
}

void Binder::flush_grads() {
    AP_CHECK(trainable_, "flush_grads on a non-trainable binder");
    for (auto& [param, value] : bound_) {
        const ad::Tensor& g = graph_->grad_buffer(value.index);
        AP_CHECK(g.numel() == param->grad.numel(), "gradient shape mismatch");
        for (int i = 0; i < g.numel(); ++i) {
            param->grad.data[i] += g.data[i];
        }
    }
}

Linear::Linear(const std::string& name, int in, int out)
    : w(name + ".w", {in, out}), b(name + ".b", {1, out}) {}

ad::Value Linear::forward(Binder& ctx, ad::Value x) {
    return ad::affine(x, ctx.bind(w), ctx.bind(b));
}

void Linear::init(std::mt19937_64& rng, double gain) {
    scaled_uniform_init(w.value, rng, gain, w.value.shape[0], w.value.shape[1]);
    for (double& v : b.value.data) v = 0.0;
}

void Linear::collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&b);
}

Conv::Conv(const std::string& name, int in_ch_in, int out_ch_in, int k_in)
    : w(name + ".w", {out_ch_in, in_ch_in, k_in, k_in}),
      b(name + ".b", {1, out_ch_in}),
      in_ch(in_ch_in),
      out_ch(out_ch_in),
      k(k_in) {}

ad::Value Conv::forward(Binder& ctx, ad::Value x) {
    return ad::conv2d(x, ctx.bind(w), ctx.bind(b));
}

void Conv::init(std::mt19937_64& rng, double gain) {
    const int fan_in = in_ch * k * k;
    const int fan_out = out_ch * k * k;
    scaled_uniform_init(w.value, rng, gain, fan_in, fan_out);
    for (double& v : b.value.data) v = 0.0;
}

void Conv::collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&b);
}

void scaled_uniform_init(ad::Tensor& t, std::mt19937_64& rng, double gain, int fan_in,
                         int fan_out) {
    AP_CHECK(fan_in > 0 && fan_out > 0, "fan sizes must be positive");
    const double bound = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.data) v = dist(rng);
}

double global_grad_norm(std::span<Param* const> params) {
    double total = 0.0;
    for (const Param* p : params) {
        for (double v : p->grad.data) total += v * v;
    }
    return std::sqrt(total);
}

void clip_grad_norm(std::span<Param* const> params, double max_norm) {
    AP_CHECK(max_norm > 0.0, "gradient clip norm must be positive");
    const double norm = global_grad_norm(params);
    if (norm <= max_norm) {
        return;
    }
    const double scale = max_norm / norm;
    for (Param* p : params) {
        for (double& v : p->grad.data) v *= scale;
    }
}

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    AP_CHECK(lr > 0.0, "learning rate must be positive");
    AP_CHECK(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
             "Adam betas must lie in [0, 1)");
}

void Adam::step(std::span<Param* const> params) {
    t_ += 1;
    const double bias1 = 1.0 - std::pow(beta1_, t_);
    const double bias2 = 1.0 - std::pow(beta2_, t_);
    for (Param* p : params) {
        AP_CHECK(p->grad.numel() == p->value.numel(), "gradient shape mismatch");
        for (int i = 0; i < p->value.numel(); ++i) {
            const double g = p->grad.data[i];
            p->adam_m.data[i] = beta1_ * p->adam_m.data[i] + (1.0 - beta1_) * g;
            p->adam_v.data[i] = beta2_ * p->adam_v.data[i] + (1.0 - beta2_) * g * g;
            const double m_hat = p->adam_m.data[i] / bias1;
            const double v_hat = p->adam_v.data[i] / bias2;
            p->value.data[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
        }
        p->zero_grad();
    }
}

}  // namespace ap::nn
