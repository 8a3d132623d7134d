#include "novelgrid/trace.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "novelgrid/errors.hpp"

namespace novelgrid::harness {

using nlohmann::json;

const detect::DetectorVerdict* EpisodeTrace::verdict_at(int step, detect::Method m) const {
    if (step < 0 || step >= static_cast<int>(steps.size())) return nullptr;
    for (const auto& v : steps[step].verdicts)
        if (v.method == m) return &v;
    return nullptr;
}

std::optional<int> novelty_onset(const EpisodeTrace& trace) {
    const grid::Variant v = trace.variant;
    if (v == grid::Variant::Nominal) return std::nullopt;

    if (grid::is_functional_variant(v)) {
        if (v == grid::Variant::ActionFlip) {
            // Every action is remapped from the moment the variant is active.
            return trace.novelty_onset_setting;
        }
        if (trace.rule_fire_steps.empty()) return std::nullopt;
        return trace.rule_fire_steps.front();
    }

    // Visual variant: first rendered frame differing from the nominal twin
    // under the same seed and action sequence.
    grid::Environment twin(grid::Variant::Nominal, trace.seed, {trace.tile_size, 0});
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
        if (t < trace.observations.size() && !(twin.observe() == trace.observations[t]))
            return static_cast<int>(t);
        const int action = trace.steps[t].action;
        if (action < 0 || twin.state().terminated) break;
        twin.step(static_cast<grid::Action>(action));
    }
    return std::nullopt;
}

namespace {

json verdict_to_json(const detect::DetectorVerdict& v) {
    return json{{"m", detect::method_name(v.method)},
                {"s", v.score},
                {"th", v.threshold},
                {"f", v.flag}};
}

detect::DetectorVerdict verdict_from_json(const json& j, int step) {
    detect::DetectorVerdict v;
    v.method = detect::method_from_name(j.at("m").get<std::string>());
    v.score = j.at("s").get<double>();
    v.threshold = j.at("th").get<double>();
    v.flag = j.at("f").get<bool>();
    v.step = step;
    return v;
}

}  // namespace

std::string trace_to_json(const EpisodeTrace& trace) {
    json j;
    j["format_version"] = 1;
    j["variant"] = grid::variant_id(trace.variant);
    j["seed"] = trace.seed;
    j["policy"] = trace.policy;
    j["novelty_onset_setting"] = trace.novelty_onset_setting;
    j["tile_size"] = trace.tile_size;
    j["config_digest"] = trace.config_digest;
    if (trace.onset) j["onset"] = *trace.onset;
    else j["onset"] = nullptr;
    j["rule_fires"] = trace.rule_fire_steps;
    json steps = json::array();
    for (const auto& s : trace.steps) {
        json js;
        js["t"] = s.step;
        js["a"] = s.action;
        js["r"] = s.reward;
        js["d"] = s.done;
        js["z"] = s.code;
        json verdicts = json::array();
        for (const auto& v : s.verdicts) verdicts.push_back(verdict_to_json(v));
        js["v"] = std::move(verdicts);
        steps.push_back(std::move(js));
    }
    j["steps"] = std::move(steps);
    return j.dump(1, '\t');
}

EpisodeTrace trace_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw IoError(std::string("trace parse failure: ") + e.what());
    }
    EpisodeTrace t;
    const auto variant = grid::variant_from_id(j.at("variant").get<std::string>());
    if (!variant) throw IoError("trace names an unknown variant");
    t.variant = *variant;
    t.seed = j.at("seed").get<std::uint64_t>();
    t.policy = j.at("policy").get<std::string>();
    t.novelty_onset_setting = j.at("novelty_onset_setting").get<int>();
    t.tile_size = j.at("tile_size").get<int>();
    t.config_digest = j.at("config_digest").get<std::uint64_t>();
    if (!j.at("onset").is_null()) t.onset = j.at("onset").get<int>();
    t.rule_fire_steps = j.at("rule_fires").get<std::vector<int>>();
    for (const auto& js : j.at("steps")) {
        StepRecord s;
        s.step = js.at("t").get<int>();
        s.action = js.at("a").get<int>();
        s.reward = js.at("r").get<double>();
        s.done = js.at("d").get<bool>();
        s.code = js.at("z").get<int>();
        for (const auto& jv : js.at("v")) s.verdicts.push_back(verdict_from_json(jv, s.step));
        t.steps.push_back(std::move(s));
    }

    // Rebuild the observations by replaying the deterministic simulator.
    grid::Environment env(t.variant, t.seed, {t.tile_size, t.novelty_onset_setting});
    for (const auto& s : t.steps) {
        t.observations.push_back(env.observe());
        if (s.action >= 0 && !env.state().terminated) env.step(static_cast<grid::Action>(s.action));
    }
    return t;
}

void save_trace(const EpisodeTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open trace for writing: " + path);
    out << trace_to_json(trace) << '\n';
    if (!out) throw IoError("trace write failed: " + path);
}

EpisodeTrace load_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open trace: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return trace_from_json(ss.str());
}

}  // namespace novelgrid::harness
