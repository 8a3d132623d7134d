#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "novelgrid/observation.hpp"
#include "novelgrid/rng.hpp"

namespace novelgrid::grid {

enum class Action : int {
    TurnLeft = 0,
    TurnRight = 1,
    Forward = 2,
    Pickup = 3,
    Drop = 4,
    Toggle = 5,
    Done = 6,
};
inline constexpr int kNumActions = 7;

enum class Color : int { Yellow = 0, Purple = 1, Red = 2, Blue = 3, Green = 4 };

enum class CellKind : int { Empty = 0, Wall = 1, Door = 2, Key = 3, Goal = 4, Lava = 5, Item = 6 };

struct Cell {
    CellKind kind = CellKind::Empty;
    Color color = Color::Yellow;
    bool open = false;    // doors only
    bool locked = false;  // doors only

    friend bool operator==(const Cell&, const Cell&) = default;
};

struct CarriedItem {
    CellKind kind = CellKind::Key;
    Color color = Color::Yellow;

    friend bool operator==(const CarriedItem&, const CarriedItem&) = default;
};

// Directions follow the minigrid convention: 0=east, 1=south, 2=west, 3=north.
inline constexpr std::array<std::array<int, 2>, 4> kDirVec = {{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};

struct GridState {
    int width = 0;
    int height = 0;
    std::vector<Cell> cells;  // row-major
    int agent_col = 0;
    int agent_row = 0;
    int agent_dir = 0;
    std::optional<CarriedItem> carrying;
    int step_count = 0;
    bool terminated = false;

    Cell& cell(int col, int row) { return cells[static_cast<std::size_t>(row) * width + col]; }
    const Cell& cell(int col, int row) const { return cells[static_cast<std::size_t>(row) * width + col]; }
    bool in_bounds(int col, int row) const { return col >= 0 && row >= 0 && col < width && row < height; }

    friend bool operator==(const GridState&, const GridState&) = default;
};

enum class Variant : int {
    Nominal = 0,
    BrokenDoor = 1,
    ActionFlip = 2,
    Teleport = 3,
    FakeGoal = 4,
    DoorKeyDiffColor = 5,
    DoorGone = 6,
    KeyStuck = 7,
    Fetch = 8,
    LavaGap = 9,
    Empty = 10,
};

bool is_visual_variant(Variant v);
bool is_functional_variant(Variant v);

// String catalog ("nominal-doorkey-6x6", "broken-door", ...).
const std::vector<std::pair<std::string, Variant>>& variant_catalog();
std::optional<Variant> variant_from_id(std::string_view id);
std::string variant_id(Variant v);

struct RewardSignal {
    double reward = 0.0;
    bool done = false;
    double discount = 0.99;
};

struct EnvConfig {
    int tile_size = 8;
    int novelty_onset_step = 0;  // step index at which the variant's change activates
};

Observation render(const GridState& state, int tile_size = 8);

// One environment instance: canonical DoorKey-6x6 geometry plus the
// variant's visual and dynamic modifications. The seed drives only the
// stochastic dynamics (Teleport draws); the layout itself is fixed so the
// tabular world model sees a closed frame population.
class Environment {
public:
    Environment(Variant variant, std::uint64_t seed, EnvConfig config = {});

    const GridState& state() const { return state_; }
    Variant variant() const { return variant_; }
    std::uint64_t seed() const { return seed_; }
    int tile_size() const { return config_.tile_size; }
    int novelty_onset_step() const { return config_.novelty_onset_step; }

    Observation observe() const { return render(state_, config_.tile_size); }

    // Applies one action. Records, in rule_fire_steps(), the observation
    // index at which a variant rule changed the outcome relative to nominal
    // dynamics.
    RewardSignal step(Action action);

    void reset();

    // Observation indices whose transitions were altered by the variant.
    const std::vector<int>& rule_fire_steps() const { return rule_fires_; }

private:
    void apply_visual_layout();
    void apply_nominal_action(Action action, RewardSignal& out);

    Variant variant_;
    std::uint64_t seed_;
    EnvConfig config_;
    GridState state_;
    SplitMix64 rng_;
    std::vector<int> rule_fires_;
    bool visual_applied_ = false;
};

std::optional<Environment> make_env(std::string_view id, std::uint64_t seed, EnvConfig config = {});
Environment make_env(Variant variant, std::uint64_t seed, EnvConfig config = {});

// Breadth-first planner over ground-truth state: fetch the key, open the
// door, reach the goal. Deterministic tie-breaking by action enum order.
// Unreachable objective degrades to Done.
Action scripted_policy(const GridState& state);

Action random_policy(SplitMix64& rng);

// Free cells a Teleport draw may land on, in row-major order.
std::vector<std::pair<int, int>> free_cells(const GridState& state);

}  // namespace novelgrid::grid
