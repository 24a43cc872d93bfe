#include "ap/policy.hpp"

#include <cmath>
#include <utility>

#include "ap/common.hpp"
#include "ap/rng.hpp"

namespace ap {

namespace {

constexpr int kEmbedWidth = 32;
constexpr int kLandmarkHidden = 64;
constexpr int kHeadWidth = 64;
constexpr int kActionDim = 2;
constexpr double kLog2Pi = 1.8378770664093454836;

// Entropy of a diagonal Gaussian: sum(log_std) + d/2 (1 + log(2 pi)).
constexpr double kEntropyConstPerDim = 0.5 * (1.0 + kLog2Pi);

struct NetInputs {
    ad::Value agent;      // (B, 2)
    ad::Value landmarks;  // (B * n_l, 4)
    ad::Value map;        // (B, 2, H, W) when the map is enabled
};

NetInputs build_inputs(nn::Binder& ctx, std::span<const MdpObservation> obs,
                       const PolicySpec& spec) {
    AP_CHECK(!obs.empty(), "empty observation batch");
    const int B = static_cast<int>(obs.size());
    const int n = spec.n_l;
    const double inv_range = 1.0 / spec.norm.range;
    const double sigma_sq = spec.norm.sigma * spec.norm.sigma;

    ad::Tensor agent({B, 2});
    ad::Tensor landmarks({B * n, 4});
    for (int b = 0; b < B; ++b) {
        const MdpObservation& o = obs[b];
        AP_CHECK(static_cast<int>(o.size()) == spec.obs_dim(),
                 "observation length does not match the policy spec");
        agent.data[b * 2 + 0] = (o[0] - spec.norm.center[0]) * inv_range;
        agent.data[b * 2 + 1] = (o[1] - spec.norm.center[1]) * inv_range;
        for (int j = 0; j < n; ++j) {
            double* row = &landmarks.data[(b * n + j) * 4];
            const double info_x = o[2 + 2 * j];
            const double info_y = o[2 + 2 * j + 1];
            AP_CHECK(info_x > 0.0 && info_y > 0.0, "information inputs must be positive");
            row[0] = std::log(sigma_sq * info_x);
            row[1] = std::log(sigma_sq * info_y);
            row[2] = (o[2 + 2 * n + 2 * j] - spec.norm.center[0]) * inv_range;
            row[3] = (o[2 + 2 * n + 2 * j + 1] - spec.norm.center[1]) * inv_range;
        }
    }

    NetInputs inputs;
    inputs.agent = ctx.graph().constant(std::move(agent));
    inputs.landmarks = ctx.graph().constant(std::move(landmarks));

    if (spec.map_enabled) {
        const int n_m = spec.map_h * spec.map_w;
        const int base = 2 + 4 * n;
        ad::Tensor map({B, 2, spec.map_h, spec.map_w});
        for (int b = 0; b < B; ++b) {
            const MdpObservation& o = obs[b];
            for (int t = 0; t < n_m; ++t) {
                const double info = o[base + n_m + t];
                AP_CHECK(info > 0.0, "map information inputs must be positive");
                map.data[(b * 2 + 0) * n_m + t] = o[base + t];
                map.data[(b * 2 + 1) * n_m + t] = std::log(info);
            }
        }
        inputs.map = ctx.graph().constant(std::move(map));
    }
    return inputs;
}

// Shared agent-plus-landmark encoder with scaled dot-product attention
// pooled over the landmarks; emits a (B, 64) feature row.
struct AttentionTrunk {
    nn::Linear agent1, agent2;
    nn::Linear land1, land2;
    nn::Linear query, key, value;

    explicit AttentionTrunk(const std::string& name)
        : agent1(name + ".agent1", 2, kEmbedWidth),
          agent2(name + ".agent2", kEmbedWidth, kEmbedWidth),
          land1(name + ".land1", 4, kLandmarkHidden),
          land2(name + ".land2", kLandmarkHidden, kEmbedWidth),
          query(name + ".query", kEmbedWidth, kEmbedWidth),
          key(name + ".key", kEmbedWidth, kEmbedWidth),
          value(name + ".value", kEmbedWidth, kEmbedWidth) {}

    ad::Value forward(nn::Binder& ctx, const NetInputs& in, int n) {
        const ad::Value emb_a = ad::tanh(agent2.forward(ctx, ad::tanh(agent1.forward(ctx, in.agent))));
        const ad::Value emb_l =
            ad::tanh(land2.forward(ctx, ad::tanh(land1.forward(ctx, in.landmarks))));
        const ad::Value q = query.forward(ctx, emb_a);
        const ad::Value k = key.forward(ctx, emb_l);
        const ad::Value v = value.forward(ctx, emb_l);
        const ad::Value scores = ad::mul_scalar(
            ad::attn_scores(q, k, n), 1.0 / std::sqrt(static_cast<double>(kEmbedWidth)));
        const ad::Value pooled = ad::attn_mix(ad::softmax_rows(scores), v);
        return ad::concat_cols({emb_a, pooled});
    }

    void init(std::mt19937_64& rng) {
        agent1.init(rng);
        agent2.init(rng);
        land1.init(rng);
        land2.init(rng);
        query.init(rng);
        key.init(rng);
        value.init(rng);
    }

    void collect(std::vector<nn::Param*>& out) {
        agent1.collect(out);
        agent2.collect(out);
        land1.collect(out);
        land2.collect(out);
        query.collect(out);
        key.collect(out);
        value.collect(out);
    }
};

struct OutputHead {
    nn::Linear hidden1, hidden2, out;

    OutputHead(const std::string& name, int in, int out_dim)
        : hidden1(name + ".head1", in, kHeadWidth),
          hidden2(name + ".head2", kHeadWidth, kHeadWidth),
          out(name + ".out", kHeadWidth, out_dim) {}

    ad::Value forward(nn::Binder& ctx, ad::Value feat) {
        const ad::Value h1 = ad::tanh(hidden1.forward(ctx, feat));
        const ad::Value h2 = ad::tanh(hidden2.forward(ctx, h1));
        return out.forward(ctx, h2);
    }

    void init(std::mt19937_64& rng, double out_gain) {
        hidden1.init(rng);
        hidden2.init(rng);
        out.init(rng, out_gain);
    }

    void collect(std::vector<nn::Param*>& params) {
        hidden1.collect(params);
        hidden2.collect(params);
        out.collect(params);
    }
};

class AttentionNet final : public Net {
  public:
    AttentionNet(const PolicySpec& spec, int out_dim, const std::string& name)
        : spec_(spec), trunk_(name), head_(name, 2 * kEmbedWidth, out_dim) {}

    ad::Value forward(nn::Binder& ctx, std::span<const MdpObservation> obs) override {
        const NetInputs in = build_inputs(ctx, obs, spec_);
        return head_.forward(ctx, trunk_.forward(ctx, in, spec_.n_l));
    }

    void collect(std::vector<nn::Param*>& out) override {
        trunk_.collect(out);
        head_.collect(out);
    }

    void init(std::mt19937_64& rng, double out_gain) override {
        trunk_.init(rng);
        head_.init(rng, out_gain);
    }

  private:
    PolicySpec spec_;
    AttentionTrunk trunk_;
    OutputHead head_;
};

class MlpNet final : public Net {
  public:
    MlpNet(const PolicySpec& spec, int out_dim, const std::string& name)
        : spec_(spec),
          agent1_(name + ".agent1", 2, kEmbedWidth),
          agent2_(name + ".agent2", kEmbedWidth, kEmbedWidth),
          flat1_(name + ".flat1", 4 * spec.n_l, kLandmarkHidden),
          flat2_(name + ".flat2", kLandmarkHidden, kEmbedWidth),
          head_(name, 2 * kEmbedWidth, out_dim) {}

    ad::Value forward(nn::Binder& ctx, std::span<const MdpObservation> obs) override {
        const NetInputs in = build_inputs(ctx, obs, spec_);
        const int B = static_cast<int>(obs.size());
        const ad::Value emb_a =
            ad::tanh(agent2_.forward(ctx, ad::tanh(agent1_.forward(ctx, in.agent))));
        // (B * n, 4) rows are already laid out landmark-major per sample.
        const ad::Value flat = ad::reshape(in.landmarks, {B, 4 * spec_.n_l});
        const ad::Value emb_l =
            ad::tanh(flat2_.forward(ctx, ad::tanh(flat1_.forward(ctx, flat))));
        return head_.forward(ctx, ad::concat_cols({emb_a, emb_l}));
    }

    void collect(std::vector<nn::Param*>& out) override {
        agent1_.collect(out);
        agent2_.collect(out);
        flat1_.collect(out);
        flat2_.collect(out);
        head_.collect(out);
    }

    void init(std::mt19937_64& rng, double out_gain) override {
        agent1_.init(rng);
        agent2_.init(rng);
        flat1_.init(rng);
        flat2_.init(rng);
        head_.init(rng, out_gain);
    }

  private:
    PolicySpec spec_;
    nn::Linear agent1_, agent2_, flat1_, flat2_;
    OutputHead head_;
};

class JointNet final : public Net {
  public:
    JointNet(const PolicySpec& spec, int out_dim, const std::string& name)
        : spec_(spec),
          trunk_(name),
          conv1_(name + ".conv1", 2, 8, 3),
          conv2_(name + ".conv2", 8, 16, 3),
          fuse_(name + ".fuse", 2 * kEmbedWidth + conv_flat_dim(spec), kHeadWidth),
          out_(name + ".out", kHeadWidth, out_dim) {}

    static int conv_flat_dim(const PolicySpec& spec) {
        return 16 * (spec.map_h - 4) * (spec.map_w - 4);
    }

    ad::Value forward(nn::Binder& ctx, std::span<const MdpObservation> obs) override {
        const NetInputs in = build_inputs(ctx, obs, spec_);
        const int B = static_cast<int>(obs.size());
        const ad::Value feat = trunk_.forward(ctx, in, spec_.n_l);
        const ad::Value c1 = ad::relu(conv1_.forward(ctx, in.map));
        const ad::Value c2 = ad::relu(conv2_.forward(ctx, c1));
        const ad::Value flat = ad::reshape(c2, {B, conv_flat_dim(spec_)});
        const ad::Value fused = ad::tanh(fuse_.forward(ctx, ad::concat_cols({feat, flat})));
        return out_.forward(ctx, fused);
    }

    void collect(std::vector<nn::Param*>& out) override {
        trunk_.collect(out);
        conv1_.collect(out);
        conv2_.collect(out);
        fuse_.collect(out);
        out_.collect(out);
    }

    void init(std::mt19937_64& rng, double out_gain) override {
        trunk_.init(rng);
        conv1_.init(rng);
        conv2_.init(rng);
        fuse_.init(rng);
        out_.init(rng, out_gain);
    }

  private:
    PolicySpec spec_;
    AttentionTrunk trunk_;
    nn::Conv conv1_, conv2_;
    nn::Linear fuse_;
    nn::Linear out_;
};

}  // namespace

PolicyArch parse_arch(const std::string& name) {
    if (name == "attention") return PolicyArch::attention;
    if (name == "mlp") return PolicyArch::mlp;
    if (name == "attention-joint") return PolicyArch::attention_joint;
    throw ConfigError("unknown policy architecture: " + name);
}

std::string arch_name(PolicyArch arch) {
    switch (arch) {
        case PolicyArch::attention: return "attention";
        case PolicyArch::mlp: return "mlp";
        case PolicyArch::attention_joint: return "attention-joint";
    }
    throw ConfigError("unknown policy architecture value");
}

PolicySpec PolicySpec::from_world(PolicyArch arch, const WorldConfig& config) {
    PolicySpec spec;
    spec.arch = arch;
    spec.n_l = config.n_l;
    spec.map_enabled = config.map_enabled;
    spec.map_h = config.map_h;
    spec.map_w = config.map_w;
    spec.norm.center = config.landmark_center;
    spec.norm.range = config.landmark_range;
    spec.norm.sigma = config.sigma;
    spec.validate();
    return spec;
}

int PolicySpec::obs_dim() const {
    return 2 + 4 * n_l + (map_enabled ? 2 * map_h * map_w : 0);
}

void PolicySpec::validate() const {
    if (n_l < 1) throw ConfigError("policy needs at least one landmark");
    if (norm.range <= 0.0) throw ConfigError("normalization range must be positive");
    if (norm.sigma <= 0.0) throw ConfigError("normalization sigma must be positive");
    const bool wants_map = arch == PolicyArch::attention_joint;
    if (wants_map != map_enabled) {
        throw ConfigError("the joint architecture and the map observation go together");
    }
    if (map_enabled && (map_h < 5 || map_w < 5)) {
        throw ConfigError("map planes must be at least 5x5 for the conv branch");
    }
}

std::unique_ptr<Net> make_net(const PolicySpec& spec, int out_dim, const std::string& name) {
    spec.validate();
    switch (spec.arch) {
        case PolicyArch::attention:
            return std::make_unique<AttentionNet>(spec, out_dim, name);
        case PolicyArch::mlp:
            return std::make_unique<MlpNet>(spec, out_dim, name);
        case PolicyArch::attention_joint:
            return std::make_unique<JointNet>(spec, out_dim, name);
    }
    throw ConfigError("unknown policy architecture value");
}

ActorCritic::ActorCritic(const PolicySpec& spec, uint64_t seed)
    : spec_(spec),
      actor_(make_net(spec, kActionDim, "actor")),
      critic_(make_net(spec, 1, "critic")),
      log_std_("actor.log_std", {1, kActionDim}) {
    std::mt19937_64 actor_rng(derive_seed(seed, {1}));
    std::mt19937_64 critic_rng(derive_seed(seed, {2}));
    actor_->init(actor_rng, 0.01);  // near-zero initial action means
    critic_->init(critic_rng, 1.0);
    // Start with a wide exploration distribution (std ~ 1.65); training
    // narrows it as the return improves.
    for (double& v : log_std_.value.data) v = 0.5;
}

ActorCritic::ActResult ActorCritic::act(std::span<const MdpObservation> obs,
                                        std::mt19937_64& rng) {
    ad::Graph graph;
    nn::Binder ctx(graph, /*trainable=*/false);
    const ad::Value mean = actor_->forward(ctx, obs);
    const ad::Value value = critic_->forward(ctx, obs);

    const int B = static_cast<int>(obs.size());
    ActResult result;
    result.action.resize(B);
    result.logp.resize(B);
    result.value.resize(B);
    // Draw order contract: two standard normals per batch row, in row order.
    for (int b = 0; b < B; ++b) {
        std::normal_distribution<double> n01(0.0, 1.0);
        double logp = 0.0;
        for (int j = 0; j < kActionDim; ++j) {
            const double s = log_std_.value.data[j];
            const double eps = n01(rng);
            result.action[b][j] = mean.tensor()(b, j) + std::exp(s) * eps;
            logp += -0.5 * eps * eps - s - 0.5 * kLog2Pi;
        }
        result.logp[b] = logp;
        result.value[b] = value.tensor()(b, 0);
    }
    return result;
}

std::vector<Eigen::Vector2d> ActorCritic::mean_actions(std::span<const MdpObservation> obs) {
    ad::Graph graph;
    nn::Binder ctx(graph, /*trainable=*/false);
    const ad::Value mean = actor_->forward(ctx, obs);
    std::vector<Eigen::Vector2d> out(obs.size());
    for (size_t b = 0; b < obs.size(); ++b) {
        out[b] = {mean.tensor()(static_cast<int>(b), 0), mean.tensor()(static_cast<int>(b), 1)};
    }
    return out;
}

std::vector<double> ActorCritic::values(std::span<const MdpObservation> obs) {
    ad::Graph graph;
    nn::Binder ctx(graph, /*trainable=*/false);
    const ad::Value value = critic_->forward(ctx, obs);
    std::vector<double> out(obs.size());
    for (size_t b = 0; b < obs.size(); ++b) {
        out[b] = value.tensor()(static_cast<int>(b), 0);
    }
    return out;
}

ActorCritic::Evaluation ActorCritic::evaluate(nn::Binder& ctx,
                                              std::span<const MdpObservation> obs,
                                              const ad::Tensor& actions) {
    AP_CHECK(actions.rank() == 2 && actions.shape[0] == static_cast<int>(obs.size()) &&
                 actions.shape[1] == kActionDim,
             "actions must be (batch, 2)");
    const ad::Value mean = actor_->forward(ctx, obs);
    const ad::Value log_std = ctx.bind(log_std_);
    Evaluation eval;
    eval.logp = ad::gaussian_log_prob(mean, log_std, ctx.graph().constant(actions));
    eval.value = critic_->forward(ctx, obs);
    eval.entropy = ad::add_scalar(ad::reduce_sum(log_std), kActionDim * kEntropyConstPerDim);
    return eval;
}

void ActorCritic::clamp_log_std(double lo, double hi) {
    AP_CHECK(lo <= hi, "invalid log_std clamp range");
    for (double& v : log_std_.value.data) {
        v = std::min(hi, std::max(lo, v));
    }
}

std::vector<nn::Param*> ActorCritic::params() {
    std::vector<nn::Param*> out;
    actor_->collect(out);
    out.push_back(&log_std_);
    critic_->collect(out);
    return out;
}

Eigen::Vector2d ActorCritic::log_std_values() const {
    return {log_std_.value.data[0], log_std_.value.data[1]};
}

}  // namespace ap
