#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "novelgrid/detectors.hpp"
#include "novelgrid/gridworld.hpp"
#include "novelgrid/observation.hpp"

namespace novelgrid::harness {

struct StepRecord {
    int step = 0;
    int action = -1;  // -1 on the final record of an episode
    double reward = 0.0;
    bool done = false;
    int code = -1;  // sampled posterior code; -1 when collected without a model
    std::vector<detect::DetectorVerdict> verdicts;
};

// Full log of one episode. Observations are carried in memory and are not
// written to disk: the simulator is deterministic, so (variant, seed,
// actions) reproduces them bit-for-bit on load.
struct EpisodeTrace {
    grid::Variant variant = grid::Variant::Nominal;
    std::uint64_t seed = 0;
    std::string policy = "scripted";
    int novelty_onset_setting = 0;  // activation step requested of the environment
    int tile_size = 8;
    std::uint64_t config_digest = 0;
    std::vector<StepRecord> steps;
    std::vector<Observation> observations;  // parallel to steps
    std::vector<int> rule_fire_steps;
    std::optional<int> onset;

    int transition_count() const { return steps.empty() ? 0 : static_cast<int>(steps.size()) - 1; }
    const detect::DetectorVerdict* verdict_at(int step, detect::Method m) const;
};

// Ground-truth novelty onset. Visual variants: first frame that differs
// from the nominal twin run under the same seed and actions. Functional
// variants: the observation index produced by the first altered transition
// (ActionFlip counts as active from its activation step, since every
// action is remapped). Nominal: none.
std::optional<int> novelty_onset(const EpisodeTrace& trace);

std::string trace_to_json(const EpisodeTrace& trace);
EpisodeTrace trace_from_json(const std::string& text);

void save_trace(const EpisodeTrace& trace, const std::string& path);
EpisodeTrace load_trace(const std::string& path);

}  // namespace novelgrid::harness
