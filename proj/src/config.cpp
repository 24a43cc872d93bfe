#include "ap/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "ap/common.hpp"

namespace ap {

namespace {

// Wraps a JSON object for strict field extraction: absent keys leave the
// target untouched, and any key never asked for is reported as a typo.
class StrictObject {
  public:
    StrictObject(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("bad value for '" + std::string(key) + "' in " + where_ + ": " +
                              e.what());
        }
    }

    // For keys handled outside this helper; only suppresses the typo check.
    void mark(const char* key) { seen_.insert(key); }

    void get_vec2(const char* key, Eigen::Vector2d& out) {
        std::vector<double> v{out[0], out[1]};
        get(key, v);
        if (v.size() != 2) {
            throw ConfigError("'" + std::string(key) + "' in " + where_ +
                              " must be a [x, y] pair");
        }
        out = Eigen::Vector2d{v[0], v[1]};
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!seen_.contains(item.key())) {
                throw ConfigError("unknown key '" + item.key() + "' in " + where_);
            }
        }
    }

  private:
    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};


Json load_json_with_includes(const std::filesystem::path& path, int depth) {
    if (depth > 8) throw ConfigError("include chain too deep at " + path.string());
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object: " + path.string());
    if (j.contains("include")) {
        if (!j.at("include").is_string()) {
            throw ConfigError("'include' must be a file path string in " + path.string());
        }
        std::filesystem::path inc = j.at("include").get<std::string>();
        if (inc.is_relative()) inc = path.parent_path() / inc;
        Json base = load_json_with_includes(inc, depth + 1);
        j.erase("include");
        merge_json(base, j);
        return base;
    }
    return j;
}

}  // namespace

WorldConfig scenario_world(const std::string& scenario) {
    WorldConfig world;  // the 3-landmark defaults
    if (scenario == "landmarks3") {
        return world;
    }
    if (scenario == "landmarks5") {
        world.n_l = 5;
        world.episode_len = 15;
        world.landmark_range = 10.0;
        return world;
    }
    if (scenario == "landmarks8") {
        world.n_l = 8;
        world.episode_len = 18;
        world.landmark_range = 12.0;
        return world;
    }
    if (scenario == "nonuniform") {
        world.info_init = {200.0, 4.0, 4.0};  // landmark 0 at 50x the default prior
        return world;
    }
    if (scenario == "joint") {
        world.n_l = 5;
        world.episode_len = 15;
        world.landmark_range = 10.0;
        world.landmark_center = {15.0, 15.0};
        world.agent_center = {15.0, 15.0};
        world.map_enabled = true;
        world.map_h = 15;
        world.map_w = 15;
        world.tile_size = 2.0;  // tiles cover [0, 30]^2
        world.rho = 0.2;
        return world;
    }
    throw ConfigError("unknown scenario '" + scenario + "'");
}

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names = {"landmarks3", "landmarks5", "landmarks8",
                                                   "nonuniform", "joint"};
    return names;
}

const std::vector<std::string>& method_names() {
    static const std::vector<std::string> names = {"ppo-att", "ppo-mlp", "icr", "random"};
    return names;
}

Json world_to_json(const WorldConfig& world) {
    Json j;
    j["n_l"] = world.n_l;
    j["episode_len"] = world.episode_len;
    j["control_bound"] = world.control_bound;
    j["landmark_range"] = world.landmark_range;
    j["landmark_center"] = {world.landmark_center[0], world.landmark_center[1]};
    j["agent_init_range"] = world.agent_init_range;
    j["agent_center"] = {world.agent_center[0], world.agent_center[1]};
    j["sigma"] = world.sigma;
    j["fov_radius"] = world.fov.radius;
    j["fov_kappa"] = world.fov.kappa;
    j["motion_noise_std"] = world.motion_noise_std;
    j["gamma"] = world.gamma;
    j["info_init"] = world.info_init;
    j["map_enabled"] = world.map_enabled;
    j["map_h"] = world.map_h;
    j["map_w"] = world.map_w;
    j["tile_size"] = world.tile_size;
    j["obstacle_density"] = world.obstacle_density;
    j["rho"] = world.rho;
    j["alpha_land"] = world.alpha_land;
    j["alpha_map"] = world.alpha_map;
    return j;
}

void world_apply_json(WorldConfig& world, const Json& j) {
    StrictObject o(j, "world");
    o.get("n_l", world.n_l);
    o.get("episode_len", world.episode_len);
    o.get("control_bound", world.control_bound);
    o.get("landmark_range", world.landmark_range);
    o.get_vec2("landmark_center", world.landmark_center);
    o.get("agent_init_range", world.agent_init_range);
    o.get_vec2("agent_center", world.agent_center);
    o.get("sigma", world.sigma);
    o.get("fov_radius", world.fov.radius);
    o.get("fov_kappa", world.fov.kappa);
    o.get("motion_noise_std", world.motion_noise_std);
    o.get("gamma", world.gamma);
    o.get("info_init", world.info_init);
    o.get("map_enabled", world.map_enabled);
    o.get("map_h", world.map_h);
    o.get("map_w", world.map_w);
    o.get("tile_size", world.tile_size);
    o.get("obstacle_density", world.obstacle_density);
    o.get("rho", world.rho);
    o.get("alpha_land", world.alpha_land);
    o.get("alpha_map", world.alpha_map);
    o.finish();
}

Json train_to_json(const TrainConfig& train) {
    Json j;
    j["total_env_steps"] = train.total_env_steps;
    j["n_envs"] = train.n_envs;
    j["epochs"] = train.epochs;
    j["minibatch"] = train.minibatch;
    j["gamma"] = train.gamma;
    j["lam"] = train.lam;
    j["clip_eps"] = train.clip_eps;
    j["learning_rate"] = train.learning_rate;
    j["anneal_lr"] = train.anneal_lr;
    j["value_coef"] = train.value_coef;
    j["entropy_coef"] = train.entropy_coef;
    j["max_grad_norm"] = train.max_grad_norm;
    j["eval_every"] = train.eval_every;
    j["eval_episodes"] = train.eval_episodes;
    j["seed"] = train.seed;
    return j;
}

void train_apply_json(TrainConfig& train, const Json& j) {
    StrictObject o(j, "train");
    o.get("total_env_steps", train.total_env_steps);
    o.get("n_envs", train.n_envs);
    o.get("epochs", train.epochs);
    o.get("minibatch", train.minibatch);
    o.get("gamma", train.gamma);
    o.get("lam", train.lam);
    o.get("clip_eps", train.clip_eps);
    o.get("learning_rate", train.learning_rate);
    o.get("anneal_lr", train.anneal_lr);
    o.get("value_coef", train.value_coef);
    o.get("entropy_coef", train.entropy_coef);
    o.get("max_grad_norm", train.max_grad_norm);
    o.get("eval_every", train.eval_every);
    o.get("eval_episodes", train.eval_episodes);
    o.get("seed", train.seed);
    o.finish();
}

Json icr_to_json(const IcrConfig& icr) {
    Json j;
    j["horizon"] = icr.horizon;
    j["step_size"] = icr.step_size;
    j["max_iters"] = icr.max_iters;
    j["rel_tol"] = icr.rel_tol;
    j["restarts"] = icr.restarts;
    j["workers"] = icr.workers;
    j["seed"] = icr.seed;
    return j;
}

void icr_apply_json(IcrConfig& icr, const Json& j) {
    StrictObject o(j, "icr");
    o.get("horizon", icr.horizon);
    o.get("step_size", icr.step_size);
    o.get("max_iters", icr.max_iters);
    o.get("rel_tol", icr.rel_tol);
    o.get("restarts", icr.restarts);
    o.get("workers", icr.workers);
    o.get("seed", icr.seed);
    o.finish();
}

Json experiment_to_json(const ExperimentConfig& config) {
    Json j;
    j["scenario"] = config.scenario;
    j["method"] = config.method;
    j["seeds"] = config.seeds;
    j["motion_noise"] = config.motion_noise;
    j["episodes_per_model"] = config.episodes_per_model;
    j["out_dir"] = config.out_dir;
    j["workers"] = config.workers;
    j["paper_scale"] = config.paper_scale;
    j["world"] = world_to_json(config.world);
    j["train"] = train_to_json(config.train);
    j["icr"] = icr_to_json(config.icr);
    return j;
}

ExperimentConfig experiment_from_json(const Json& j) {
    StrictObject o(j, "experiment");
    ExperimentConfig config;
    o.get("scenario", config.scenario);
    config.world = scenario_world(config.scenario);

    o.get("method", config.method);
    o.get("seeds", config.seeds);
    o.get("motion_noise", config.motion_noise);
    if (config.motion_noise) config.world.motion_noise_std = 0.1;
    o.get("episodes_per_model", config.episodes_per_model);
    o.get("out_dir", config.out_dir);
    o.get("workers", config.workers);
    o.get("paper_scale", config.paper_scale);
    if (config.paper_scale) config.train.total_env_steps = 1000000;

    // Explicit blocks override the scenario preset and the flags above.
    o.mark("world");
    o.mark("train");
    o.mark("icr");
    if (j.contains("world")) world_apply_json(config.world, j.at("world"));
    if (j.contains("train")) train_apply_json(config.train, j.at("train"));
    if (j.contains("icr")) icr_apply_json(config.icr, j.at("icr"));
    o.finish();
    config.validate();
    return config;
}

void ExperimentConfig::validate() const {
    const auto& scenarios = scenario_names();
    if (std::find(scenarios.begin(), scenarios.end(), scenario) == scenarios.end()) {
        throw ConfigError("unknown scenario '" + scenario + "'");
    }
    const auto& methods = method_names();
    if (std::find(methods.begin(), methods.end(), method) == methods.end()) {
        throw ConfigError("unknown method '" + method + "'");
    }
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (episodes_per_model < 1) throw ConfigError("episodes_per_model must be positive");
    if (workers < 0) throw ConfigError("workers must be nonnegative");
    if (method == "icr" && world.map_enabled) {
        throw ConfigError("the trajectory planner only handles landmark scenarios");
    }
    world.validate();
    train.validate();
    icr.validate();
}

void merge_json(Json& base, const Json& overlay) {
    if (!base.is_object() || !overlay.is_object()) {
        base = overlay;
        return;
    }
    for (const auto& item : overlay.items()) {
        if (base.contains(item.key())) {
            merge_json(base[item.key()], item.value());
        } else {
            base[item.key()] = item.value();
        }
    }
}

Json load_experiment_json(const std::string& path) {
    return load_json_with_includes(std::filesystem::path(path), 0);
}

ExperimentConfig load_experiment_file(const std::string& path) {
    return experiment_from_json(load_experiment_json(path));
}

}  // namespace ap
