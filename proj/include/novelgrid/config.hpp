#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "novelgrid/detectors.hpp"
#include "novelgrid/world_model.hpp"

namespace novelgrid {

struct Budgets {
    std::int64_t collect_scripted_steps = 10000;
    std::int64_t collect_random_steps = 40000;
    std::int64_t eval_steps_per_variant = 50000;
    int episode_cap = 200;
};

struct RunConfig {
    std::uint64_t root_seed = 7;
    std::string out_dir = "out";
    std::vector<std::string> envs = {
        "nominal-doorkey-6x6", "broken-door", "teleport", "action-flip", "fake-goal",
        "lava-gap",            "empty",       "fetch",    "door-gone",
    };
    int novelty_onset_step = 0;
    std::string eval_policy = "scripted";  // scripted | random | both (nominal always runs both)
    Budgets budgets;
    int tile_size = 8;
    model::ModelParams model;
    detect::DetectorConfig detectors;
    std::vector<std::string> methods;  // empty = all
    int snapshots = 0;                 // >0 emits training-curve snapshots

    std::vector<detect::Method> method_list() const;
};

RunConfig default_config();

RunConfig config_from_json(const std::string& text);
std::string config_to_json(const RunConfig& config);

RunConfig load_config(const std::string& path);
void save_config(const RunConfig& config, const std::string& path);

// FNV-1a digest of the canonical serialized form; recorded in traces and
// reports so recomputations can be matched to their configuration.
std::uint64_t config_digest(const RunConfig& config);

}  // namespace novelgrid
