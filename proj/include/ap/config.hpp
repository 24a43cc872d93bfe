#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "ap/env.hpp"
#include "ap/icr.hpp"
#include "ap/ppo.hpp"

namespace ap {

// Insertion-ordered JSON so serialized configs read in declaration order.
using Json = nlohmann::ordered_json;

// A full experiment: which scenario and method to run, the seeds of the
// model grid, and the world/training/planner settings after scenario presets
// and file overrides have been applied.
struct ExperimentConfig {
    std::string scenario = "landmarks3";
    std::string method = "ppo-att";  // ppo-att | ppo-mlp | icr | random
    std::vector<uint64_t> seeds = {0, 1, 2};
    bool motion_noise = false;       // adds N(0, 0.1^2 I) to each robot move
    int episodes_per_model = 10;     // evaluation episodes per trained model
    std::string out_dir = "runs";
    int workers = 0;                 // 0 = automatic; 1 = fully deterministic mode
    bool paper_scale = false;        // raises the training budget to 1M env steps
    WorldConfig world;
    TrainConfig train;
    IcrConfig icr;

    void validate() const;
};

// Scenario presets fixing the landmark count, horizon, and scene half-width:
//   landmarks3: 3 landmarks, 8 steps, box +/-8
//   landmarks5: 5 landmarks, 15 steps, box +/-10
//   landmarks8: 8 landmarks, 18 steps, box +/-12
//   nonuniform: landmarks3 with landmark 0 starting at 50x prior information
//   joint:      landmarks5 centered at (15, 15) plus a 15x15 occupancy map of
//               2-unit tiles covering [0, 30]^2, reward mix rho = 0.2
WorldConfig scenario_world(const std::string& scenario);
const std::vector<std::string>& scenario_names();
const std::vector<std::string>& method_names();

// Strict (de)serialization: every field is written, unknown keys are
// rejected, and absent keys keep the values already in the target, so a JSON
// object acts as a partial override of whatever it is applied to.
Json world_to_json(const WorldConfig& world);
void world_apply_json(WorldConfig& world, const Json& j);
Json train_to_json(const TrainConfig& train);
void train_apply_json(TrainConfig& train, const Json& j);
Json icr_to_json(const IcrConfig& icr);
void icr_apply_json(IcrConfig& icr, const Json& j);

Json experiment_to_json(const ExperimentConfig& config);
ExperimentConfig experiment_from_json(const Json& j);

// Deep merge: overlay keys win, nested objects merge recursively. This is the
// combination rule used both for file includes and for CLI flag overrides.
void merge_json(Json& base, const Json& overlay);

// Raw experiment document with any include chain already resolved, before
// parsing. Lets callers overlay further overrides with merge_json.
Json load_experiment_json(const std::string& path);

// Loads an experiment document. A top-level "include" key names another file
// (relative paths resolve against the including file) that is loaded first;
// the including document's keys then override it, recursively.
ExperimentConfig load_experiment_file(const std::string& path);

}  // namespace ap
