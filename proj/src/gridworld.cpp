#include "novelgrid/gridworld.hpp"

#include <algorithm>
#include <cstring>
#include <deque>
#include <stdexcept>

namespace novelgrid::grid {

namespace {

struct Rgb {
    float r, g, b;
};

constexpr Rgb kFloor{0.0f, 0.0f, 0.0f};
constexpr Rgb kWall{0.55f, 0.55f, 0.55f};
constexpr Rgb kGoal{0.0f, 0.85f, 0.0f};
constexpr Rgb kLava{1.0f, 0.45f, 0.0f};
constexpr Rgb kLavaDark{0.6f, 0.25f, 0.0f};
constexpr Rgb kAgent{0.9f, 0.05f, 0.05f};

Rgb color_rgb(Color c) {
    switch (c) {
        case Color::Yellow: return {1.0f, 0.9f, 0.0f};
        case Color::Purple: return {0.6f, 0.1f, 0.8f};
        case Color::Red: return {0.95f, 0.1f, 0.1f};
        case Color::Blue: return {0.1f, 0.3f, 0.95f};
        case Color::Green: return {0.1f, 0.9f, 0.2f};
    }
    return {1.0f, 1.0f, 1.0f};
}

using TileMask = std::array<std::uint8_t, 8>;  // one bit per pixel column

// Agent wedge pointing east; other directions are rotations. The mass sits
// in the facing half so rotations stay far apart in pixel space.
constexpr TileMask kAgentEast = {
    0b00000000,
    0b00001111,
    0b00011111,
    0b01111111,
    0b01111111,
    0b00011111,
    0b00001111,
    0b00000000,
};

constexpr TileMask kKeyMask = {
    0b00000000,
    0b01111000,
    0b01001000,
    0b01111000,
    0b00100000,
    0b00111000,
    0b00100000,
    0b00110000,
};

constexpr TileMask kBallMask = {
    0b00000000,
    0b00111100,
    0b01111110,
    0b01111110,
    0b01111110,
    0b01111110,
    0b00111100,
    0b00000000,
};

bool mask_at(const TileMask& m, int x, int y) { return (m[y] >> (7 - x)) & 1; }

TileMask rotate_cw(const TileMask& m) {
    TileMask out{};
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            if (mask_at(m, x, y)) out[x] |= static_cast<std::uint8_t>(1u << y);  // (x,y) -> (7-y, x)
    return out;
}

const std::array<TileMask, 4>& agent_masks() {
    static const std::array<TileMask, 4> masks = [] {
        std::array<TileMask, 4> m{};
        m[0] = kAgentEast;
        m[1] = rotate_cw(m[0]);  // south
        m[2] = rotate_cw(m[1]);  // west
        m[3] = rotate_cw(m[2]);  // north
        return m;
    }();
    return masks;
}

void fill_tile(Observation& obs, int col, int row, int ts, Rgb c) {
    for (int y = 0; y < ts; ++y)
        for (int x = 0; x < ts; ++x) {
            obs.at(col * ts + x, row * ts + y, 0) = c.r;
            obs.at(col * ts + x, row * ts + y, 1) = c.g;
            obs.at(col * ts + x, row * ts + y, 2) = c.b;
        }
}

// Scales an 8x8 mask up to the tile size by nearest neighbour.
void draw_mask(Observation& obs, int col, int row, int ts, const TileMask& mask, Rgb c) {
    for (int y = 0; y < ts; ++y)
        for (int x = 0; x < ts; ++x)
            if (mask_at(mask, x * 8 / ts, y * 8 / ts)) {
                obs.at(col * ts + x, row * ts + y, 0) = c.r;
                obs.at(col * ts + x, row * ts + y, 1) = c.g;
                obs.at(col * ts + x, row * ts + y, 2) = c.b;
            }
}

void draw_cell(Observation& obs, int col, int row, int ts, const Cell& cell) {
    switch (cell.kind) {
        case CellKind::Empty:
            fill_tile(obs, col, row, ts, kFloor);
            break;
        case CellKind::Wall:
            fill_tile(obs, col, row, ts, kWall);
            break;
        case CellKind::Goal:
            fill_tile(obs, col, row, ts, kGoal);
            break;
        case CellKind::Lava: {
            fill_tile(obs, col, row, ts, kLava);
            for (int y : {ts / 4, (3 * ts) / 4})
                for (int x = 0; x < ts; ++x) {
                    obs.at(col * ts + x, row * ts + y, 0) = kLavaDark.r;
                    obs.at(col * ts + x, row * ts + y, 1) = kLavaDark.g;
                    obs.at(col * ts + x, row * ts + y, 2) = kLavaDark.b;
                }
            break;
        }
        case CellKind::Key:
            fill_tile(obs, col, row, ts, kFloor);
            draw_mask(obs, col, row, ts, kKeyMask, color_rgb(cell.color));
            break;
        case CellKind::Item:
            fill_tile(obs, col, row, ts, kFloor);
            draw_mask(obs, col, row, ts, kBallMask, color_rgb(cell.color));
            break;
        case CellKind::Door: {
            const Rgb c = color_rgb(cell.color);
            if (cell.open) {
                // Open door: frame only, interior is floor.
                fill_tile(obs, col, row, ts, kFloor);
                for (int i = 0; i < ts; ++i) {
                    for (int edge : {0, ts - 1}) {
                        obs.at(col * ts + i, row * ts + edge, 0) = c.r;
                        obs.at(col * ts + i, row * ts + edge, 1) = c.g;
                        obs.at(col * ts + i, row * ts + edge, 2) = c.b;
                        obs.at(col * ts + edge, row * ts + i, 0) = c.r;
                        obs.at(col * ts + edge, row * ts + i, 1) = c.g;
                        obs.at(col * ts + edge, row * ts + i, 2) = c.b;
                    }
                }
            } else if (cell.locked) {
                // Locked door: bright fill with a dark keyhole block.
                fill_tile(obs, col, row, ts, {c.r * 0.85f, c.g * 0.85f, c.b * 0.85f});
                for (int y = ts / 2 - 1; y <= ts / 2 + 1; ++y)
                    for (int x = ts / 2 - 1; x <= ts / 2; ++x) {
                        obs.at(col * ts + x, row * ts + y, 0) = 0.0f;
                        obs.at(col * ts + x, row * ts + y, 1) = 0.0f;
                        obs.at(col * ts + x, row * ts + y, 2) = 0.0f;
                    }
            } else {
                // Closed, unlocked.
                fill_tile(obs, col, row, ts, {c.r * 0.5f, c.g * 0.5f, c.b * 0.5f});
            }
            break;
        }
    }
}

GridState base_room() {
    GridState s;
    s.width = 6;
    s.height = 6;
    s.cells.assign(36, Cell{});
    for (int col = 0; col < 6; ++col) {
        s.cell(col, 0).kind = CellKind::Wall;
        s.cell(col, 5).kind = CellKind::Wall;
    }
    for (int row = 0; row < 6; ++row) {
        s.cell(0, row).kind = CellKind::Wall;
        s.cell(5, row).kind = CellKind::Wall;
    }
    s.agent_col = 1;
    s.agent_row = 3;
    s.agent_dir = 0;  // east, facing the corridor
    return s;
}

// Canonical DoorKey-6x6: dividing wall at column 3 with a locked yellow
// door, key on the left, goal in the far corner.
GridState doorkey_layout(Color door_key_color) {
    GridState s = base_room();
    for (int row : {1, 2, 4}) s.cell(3, row).kind = CellKind::Wall;
    Cell door;
    door.kind = CellKind::Door;
    door.color = door_key_color;
    door.locked = true;
    s.cell(3, 3) = door;
    Cell key;
    key.kind = CellKind::Key;
    key.color = door_key_color;
    s.cell(2, 2) = key;
    s.cell(4, 4).kind = CellKind::Goal;
    return s;
}

GridState build_layout(Variant v) {
    switch (v) {
        case Variant::Nominal:
        case Variant::BrokenDoor:
        case Variant::ActionFlip:
        case Variant::Teleport:
        case Variant::FakeGoal:
        case Variant::KeyStuck:
            return doorkey_layout(Color::Yellow);
        case Variant::DoorKeyDiffColor:
            return doorkey_layout(Color::Purple);
        case Variant::DoorGone: {
            GridState s = doorkey_layout(Color::Yellow);
            s.cell(3, 3) = Cell{};  // doorway is open space
            return s;
        }
        case Variant::LavaGap: {
            GridState s = base_room();
            for (int row : {1, 2, 4}) s.cell(3, row).kind = CellKind::Lava;
            s.cell(4, 4).kind = CellKind::Goal;
            return s;
        }
        case Variant::Empty: {
            GridState s = base_room();
            s.cell(4, 4).kind = CellKind::Goal;
            return s;
        }
        case Variant::Fetch: {
            GridState s = base_room();
            Cell ball;
            ball.kind = CellKind::Item;
            ball.color = Color::Blue;
            s.cell(2, 1) = ball;
            ball.color = Color::Red;
            s.cell(4, 2) = ball;
            ball.color = Color::Green;
            s.cell(3, 4) = ball;
            return s;
        }
    }
    throw std::invalid_argument("unknown environment variant");
}

bool walkable(const Cell& c) {
    switch (c.kind) {
        case CellKind::Empty:
        case CellKind::Goal:
            return true;
        case CellKind::Door:
            return c.open;
        default:
            return false;
    }
}

}  // namespace

bool is_visual_variant(Variant v) {
    switch (v) {
        case Variant::DoorKeyDiffColor:
        case Variant::DoorGone:
        case Variant::Fetch:
        case Variant::LavaGap:
        case Variant::Empty:
            return true;
        default:
            return false;
    }
}

bool is_functional_variant(Variant v) {
    switch (v) {
        case Variant::BrokenDoor:
        case Variant::ActionFlip:
        case Variant::Teleport:
        case Variant::FakeGoal:
        case Variant::KeyStuck:
            return true;
        default:
            return false;
    }
}

const std::vector<std::pair<std::string, Variant>>& variant_catalog() {
    static const std::vector<std::pair<std::string, Variant>> catalog = {
        {"nominal-doorkey-6x6", Variant::Nominal},
        {"broken-door", Variant::BrokenDoor},
        {"action-flip", Variant::ActionFlip},
        {"teleport", Variant::Teleport},
        {"fake-goal", Variant::FakeGoal},
        {"door-key-diff-color", Variant::DoorKeyDiffColor},
        {"door-gone", Variant::DoorGone},
        {"key-stuck", Variant::KeyStuck},
        {"fetch", Variant::Fetch},
        {"lava-gap", Variant::LavaGap},
        {"empty", Variant::Empty},
    };
    return catalog;
}

std::optional<Variant> variant_from_id(std::string_view id) {
    for (const auto& [name, v] : variant_catalog())
        if (name == id) return v;
    return std::nullopt;
}

std::string variant_id(Variant v) {
    for (const auto& [name, vv] : variant_catalog())
        if (vv == v) return name;
    return "unknown";
}

Observation render(const GridState& state, int tile_size) {
    Observation obs;
    obs.width = state.width * tile_size;
    obs.height = state.height * tile_size;
    obs.data.assign(static_cast<std::size_t>(obs.width) * obs.height * 3, 0.0f);
    for (int row = 0; row < state.height; ++row)
        for (int col = 0; col < state.width; ++col)
            draw_cell(obs, col, row, tile_size, state.cell(col, row));
    draw_mask(obs, state.agent_col, state.agent_row, tile_size, agent_masks()[state.agent_dir], kAgent);
    return obs;
}

Environment::Environment(Variant variant, std::uint64_t seed, EnvConfig config)
    : variant_(variant), seed_(seed), config_(config), rng_(derive_seed(seed, "env")) {
    reset();
}

void Environment::reset() {
    rng_ = SplitMix64(derive_seed(seed_, "env"));
    rule_fires_.clear();
    visual_applied_ = false;
    if (is_visual_variant(variant_) && config_.novelty_onset_step > 0) {
        state_ = build_layout(Variant::Nominal);
    } else {
        state_ = build_layout(variant_);
        visual_applied_ = true;
    }
}

void Environment::apply_visual_layout() {
    GridState variant_grid = build_layout(variant_);
    GridState next = state_;
    next.cells = variant_grid.cells;
    // The agent keeps its pose and inventory through the swap.
    state_ = next;
    visual_applied_ = true;
}

void Environment::apply_nominal_action(Action action, RewardSignal& out) {
    GridState& s = state_;
    const int fc = s.agent_col + kDirVec[s.agent_dir][0];
    const int fr = s.agent_row + kDirVec[s.agent_dir][1];
    const bool front_ok = s.in_bounds(fc, fr);
    switch (action) {
        case Action::TurnLeft:
            s.agent_dir = (s.agent_dir + 3) % 4;
            break;
        case Action::TurnRight:
            s.agent_dir = (s.agent_dir + 1) % 4;
            break;
        case Action::Forward: {
            if (!front_ok) break;
            const Cell& target = s.cell(fc, fr);
            if (target.kind == CellKind::Lava) {
                s.agent_col = fc;
                s.agent_row = fr;
                s.terminated = true;
                out.done = true;
                break;
            }
            if (!walkable(target)) break;
            s.agent_col = fc;
            s.agent_row = fr;
            if (target.kind == CellKind::Goal) {
                out.reward = 1.0;
                out.done = true;
                s.terminated = true;
            }
            break;
        }
        case Action::Pickup: {
            if (!front_ok || s.carrying) break;
            Cell& target = s.cell(fc, fr);
            if (target.kind == CellKind::Key || target.kind == CellKind::Item) {
                s.carrying = CarriedItem{target.kind, target.color};
                const bool was_item = target.kind == CellKind::Item;
                target = Cell{};
                if (was_item && variant_ == Variant::Fetch) {
                    out.reward = 1.0;
                    out.done = true;
                    s.terminated = true;
                }
            }
            break;
        }
        case Action::Drop: {
            if (!front_ok || !s.carrying) break;
            Cell& target = s.cell(fc, fr);
            if (target.kind == CellKind::Empty) {
                target.kind = s.carrying->kind;
                target.color = s.carrying->color;
                s.carrying.reset();
            }
            break;
        }
        case Action::Toggle: {
            if (!front_ok) break;
            Cell& target = s.cell(fc, fr);
            if (target.kind != CellKind::Door) break;
            if (target.locked) {
                if (s.carrying && s.carrying->kind == CellKind::Key && s.carrying->color == target.color) {
                    target.locked = false;
                    target.open = true;
                }
            } else {
                target.open = !target.open;
            }
            break;
        }
        case Action::Done:
            break;
    }
}

RewardSignal Environment::step(Action action) {
    if (state_.terminated) throw std::logic_error("step on terminal state");

    const int next_index = state_.step_count + 1;
    const bool active = next_index >= config_.novelty_onset_step;

    if (is_visual_variant(variant_) && active && !visual_applied_) apply_visual_layout();

    RewardSignal out;
    GridState& s = state_;
    bool fired = false;
    bool suppressed = false;

    // Returns true when applying `a` nominally would change the state, and
    // restores the state either way.
    const auto would_change = [&](Action a) {
        GridState before = s;
        RewardSignal probe;
        apply_nominal_action(a, probe);
        const bool changed = !(s == before);
        s = before;
        return changed;
    };

    if (active) {
        switch (variant_) {
            case Variant::ActionFlip:
                // Restrict the agent to left and right turns only.
                if (action == Action::Forward || action == Action::Pickup || action == Action::Drop ||
                    action == Action::Toggle) {
                    if (would_change(action)) fired = true;
                    suppressed = true;
                }
                break;
            case Variant::Teleport: {
                auto cells = free_cells(s);
                if (!cells.empty()) {
                    const auto [col, row] = cells[rng_.next_below(cells.size())];
                    if (col != s.agent_col || row != s.agent_row) {
                        s.agent_col = col;
                        s.agent_row = row;
                        fired = true;  // first RNG-driven displacement
                    }
                }
                break;
            }
            case Variant::BrokenDoor:
                if (action == Action::Toggle) {
                    const int fc = s.agent_col + kDirVec[s.agent_dir][0];
                    const int fr = s.agent_row + kDirVec[s.agent_dir][1];
                    if (s.in_bounds(fc, fr) && s.cell(fc, fr).kind == CellKind::Door) {
                        // The door no longer responds, regardless of key.
                        if (would_change(action)) fired = true;
                        suppressed = true;
                    }
                }
                break;
            case Variant::KeyStuck:
                if (action == Action::Pickup && !s.carrying) {
                    const int fc = s.agent_col + kDirVec[s.agent_dir][0];
                    const int fr = s.agent_row + kDirVec[s.agent_dir][1];
                    if (s.in_bounds(fc, fr) && s.cell(fc, fr).kind == CellKind::Key) {
                        fired = true;
                        suppressed = true;
                    }
                }
                break;
            default:
                break;
        }
    }

    if (!suppressed) apply_nominal_action(action, out);

    if (active && variant_ == Variant::FakeGoal && out.done && out.reward > 0.0) {
        // The original goal is deactivated.
        out.reward = 0.0;
        out.done = false;
        s.terminated = false;
        fired = true;
    }

    s.step_count = next_index;
    if (fired) rule_fires_.push_back(next_index);
    return out;
}

std::vector<std::pair<int, int>> free_cells(const GridState& state) {
    std::vector<std::pair<int, int>> out;
    for (int row = 0; row < state.height; ++row)
        for (int col = 0; col < state.width; ++col) {
            const Cell& c = state.cell(col, row);
            if (c.kind == CellKind::Empty || (c.kind == CellKind::Door && c.open)) out.emplace_back(col, row);
        }
    return out;
}

std::optional<Environment> make_env(std::string_view id, std::uint64_t seed, EnvConfig config) {
    auto v = variant_from_id(id);
    if (!v) return std::nullopt;
    return Environment(*v, seed, config);
}

Environment make_env(Variant variant, std::uint64_t seed, EnvConfig config) {
    return Environment(variant, seed, config);
}

namespace {

struct PlanTarget {
    int col = -1;
    int row = -1;
    Action act = Action::Done;
    bool onto = false;  // walk onto the cell (goal) vs. face it (pickup/toggle)
};

std::optional<PlanTarget> choose_target(const GridState& s) {
    std::optional<std::pair<int, int>> key, door, item, goal;
    bool door_locked = false;
    for (int row = 0; row < s.height; ++row)
        for (int col = 0; col < s.width; ++col) {
            const Cell& c = s.cell(col, row);
            if (c.kind == CellKind::Key && !key) key = {col, row};
            if (c.kind == CellKind::Door && !c.open && !door) {
                door = {col, row};
                door_locked = c.locked;
            }
            if (c.kind == CellKind::Item && !item) item = {col, row};
            if (c.kind == CellKind::Goal && !goal) goal = {col, row};
        }

    const bool has_key = s.carrying && s.carrying->kind == CellKind::Key;
    if (door) {
        if (door_locked && !has_key) {
            if (key) return PlanTarget{key->first, key->second, Action::Pickup, false};
            return std::nullopt;
        }
        return PlanTarget{door->first, door->second, Action::Toggle, false};
    }
    if (item && !s.carrying) return PlanTarget{item->first, item->second, Action::Pickup, false};
    if (goal) return PlanTarget{goal->first, goal->second, Action::Forward, true};
    return std::nullopt;
}

}  // namespace

Action scripted_policy(const GridState& state) {
    auto target = choose_target(state);
    if (!target) return Action::Done;

    const auto goal_node = [&](int col, int row, int dir) {
        if (target->onto) return col == target->col && row == target->row;
        return col + kDirVec[dir][0] == target->col && row + kDirVec[dir][1] == target->row;
    };

    if (goal_node(state.agent_col, state.agent_row, state.agent_dir))
        return target->onto ? Action::Done : target->act;

    // BFS over (col, row, dir); expansion in action enum order gives the
    // lexicographically-first shortest plan.
    struct Node {
        int col, row, dir;
    };
    const int w = state.width, h = state.height;
    std::vector<int> first_action(static_cast<std::size_t>(w) * h * 4, -1);
    const auto idx = [&](int col, int row, int dir) { return (row * w + col) * 4 + dir; };
    std::deque<Node> queue;
    first_action[idx(state.agent_col, state.agent_row, state.agent_dir)] = -2;  // origin
    queue.push_back({state.agent_col, state.agent_row, state.agent_dir});

    while (!queue.empty()) {
        Node n = queue.front();
        queue.pop_front();
        const int origin_act = first_action[idx(n.col, n.row, n.dir)];
        for (Action a : {Action::TurnLeft, Action::TurnRight, Action::Forward}) {
            Node m = n;
            if (a == Action::TurnLeft) m.dir = (n.dir + 3) % 4;
            else if (a == Action::TurnRight) m.dir = (n.dir + 1) % 4;
            else {
                const int fc = n.col + kDirVec[n.dir][0];
                const int fr = n.row + kDirVec[n.dir][1];
                if (!state.in_bounds(fc, fr) || !walkable(state.cell(fc, fr))) continue;
                m.col = fc;
                m.row = fr;
            }
            if (first_action[idx(m.col, m.row, m.dir)] != -1) continue;
            first_action[idx(m.col, m.row, m.dir)] = origin_act == -2 ? static_cast<int>(a) : origin_act;
            if (goal_node(m.col, m.row, m.dir)) {
                const int act = first_action[idx(m.col, m.row, m.dir)];
                return static_cast<Action>(act);
            }
            queue.push_back(m);
        }
    }
    return Action::Done;
}

Action random_policy(SplitMix64& rng) { return static_cast<Action>(rng.next_below(kNumActions)); }

}  // namespace novelgrid::grid
