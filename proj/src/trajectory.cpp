#include "ap/trajectory.hpp"

#include <algorithm>
#include <fstream>

#include "ap/common.hpp"
#include "ap/config.hpp"
#include "ap/fov.hpp"

namespace ap {

namespace {

Json vec2_json(const Eigen::Vector2d& v) { return Json::array({v[0], v[1]}); }

Json vecx_json(const Eigen::VectorXd& v) {
    Json j = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

Eigen::Vector2d vec2_from(const Json& j, const char* what) {
    if (!j.is_array() || j.size() != 2) {
        throw ConfigError(std::string(what) + " must be a [x, y] pair");
    }
    return Eigen::Vector2d{j[0].get<double>(), j[1].get<double>()};
}

Eigen::VectorXd vecx_from(const Json& j, const char* what) {
    if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

}  // namespace

Trajectory record_trajectory(const WorldConfig& world, uint64_t seed, const ControlFn& act) {
    AP_CHECK(static_cast<bool>(act), "record_trajectory needs a control law");
    world.validate();

    Trajectory traj;
    traj.seed = seed;
    traj.world = world;

    EpisodeState state = reset_episode(world, seed);
    traj.x0 = state.x;
    traj.mu0 = state.belief.mu;
    traj.lambda0 = state.belief.info_soft;

    MdpObservation obs = assemble_observation(state, world);
    for (int k = 0; k < world.episode_len; ++k) {
        const Eigen::Vector2d raw = act(obs, k);
        const Eigen::Vector2d u{std::clamp(raw[0], -world.control_bound, world.control_bound),
                                std::clamp(raw[1], -world.control_bound, world.control_bound)};
        const StepResult step = step_episode(state, u, world);
        TrajectoryStep rec;
        rec.k = k;
        rec.x = state.x;
        rec.u = u;
        rec.reward = step.reward;
        rec.mu = state.belief.mu;
        rec.lambda_soft = state.belief.info_soft;
        rec.visible = hard_visible_set(state.x, state.y_true, world.fov);
        traj.steps.push_back(std::move(rec));
        traj.total_reward += step.reward;
        obs = step.obs;
    }
    traj.y_true = state.y_true;
    traj.info_hard_final = state.belief.info_hard;
    traj.final_mae = mae(state.belief.mu, state.y_true);
    return traj;
}

void write_trajectory_json(const std::string& path, const Trajectory& traj) {
    Json j;
    j["seed"] = traj.seed;
    j["world"] = world_to_json(traj.world);
    j["initial"] = Json{{"x", vec2_json(traj.x0)},
                        {"mu", vecx_json(traj.mu0)},
                        {"lambda_soft", vecx_json(traj.lambda0)}};
    Json steps = Json::array();
    for (const TrajectoryStep& s : traj.steps) {
        steps.push_back(Json{{"k", s.k},
                             {"x", vec2_json(s.x)},
                             {"u", vec2_json(s.u)},
                             {"reward", s.reward},
                             {"mu", vecx_json(s.mu)},
                             {"lambda_soft", vecx_json(s.lambda_soft)},
                             {"visible", s.visible}});
    }
    j["steps"] = std::move(steps);
    Json y = Json::array();
    for (const Eigen::Vector2d& p : traj.y_true) y.push_back(vec2_json(p));
    j["final"] = Json{{"y_true", std::move(y)},
                      {"info_hard", vecx_json(traj.info_hard_final)},
                      {"total_reward", traj.total_reward},
                      {"mae", traj.final_mae}};

    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open trajectory file for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw ConfigError("failed to write trajectory file: " + path);
}

Trajectory read_trajectory_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trajectory file: " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed trajectory JSON in " + path + ": " + e.what());
    }

    try {
        Trajectory traj;
        traj.seed = j.at("seed").get<uint64_t>();
        world_apply_json(traj.world, j.at("world"));
        const Json& init = j.at("initial");
        traj.x0 = vec2_from(init.at("x"), "initial.x");
        traj.mu0 = vecx_from(init.at("mu"), "initial.mu");
        traj.lambda0 = vecx_from(init.at("lambda_soft"), "initial.lambda_soft");
        for (const Json& s : j.at("steps")) {
            TrajectoryStep rec;
            rec.k = s.at("k").get<int>();
            rec.x = vec2_from(s.at("x"), "step.x");
            rec.u = vec2_from(s.at("u"), "step.u");
            rec.reward = s.at("reward").get<double>();
            rec.mu = vecx_from(s.at("mu"), "step.mu");
            rec.lambda_soft = vecx_from(s.at("lambda_soft"), "step.lambda_soft");
            rec.visible = s.at("visible").get<std::vector<int>>();
            traj.steps.push_back(std::move(rec));
        }
        const Json& fin = j.at("final");
        for (const Json& p : fin.at("y_true")) {
            traj.y_true.push_back(vec2_from(p, "final.y_true"));
        }
        traj.info_hard_final = vecx_from(fin.at("info_hard"), "final.info_hard");
        traj.total_reward = fin.at("total_reward").get<double>();
        traj.final_mae = fin.at("mae").get<double>();
        return traj;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("trajectory JSON missing fields in " + path + ": " + e.what());
    }
}

}  // namespace ap
