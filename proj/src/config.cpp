#include "novelgrid/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "novelgrid/errors.hpp"
#include "novelgrid/gridworld.hpp"
#include "novelgrid/harness.hpp"
#include "novelgrid/rng.hpp"

namespace novelgrid {

using nlohmann::json;

std::vector<detect::Method> RunConfig::method_list() const {
    if (methods.empty()) return harness::all_methods();
    std::vector<detect::Method> out;
    for (const auto& name : methods) out.push_back(detect::method_from_name(name));
    return out;
}

RunConfig default_config() { return RunConfig{}; }

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse failure: ") + e.what());
    }
    RunConfig c;
    try {
        read_if(j, "root_seed", c.root_seed);
        read_if(j, "out_dir", c.out_dir);
        read_if(j, "envs", c.envs);
        read_if(j, "novelty_onset_step", c.novelty_onset_step);
        read_if(j, "eval_policy", c.eval_policy);
        read_if(j, "tile_size", c.tile_size);
        read_if(j, "methods", c.methods);
        read_if(j, "snapshots", c.snapshots);
        if (j.contains("budgets")) {
            const json& b = j.at("budgets");
            read_if(b, "collect_scripted_steps", c.budgets.collect_scripted_steps);
            read_if(b, "collect_random_steps", c.budgets.collect_random_steps);
            read_if(b, "eval_steps_per_variant", c.budgets.eval_steps_per_variant);
            read_if(b, "episode_cap", c.budgets.episode_cap);
        }
        if (j.contains("model")) {
            const json& m = j.at("model");
            read_if(m, "alpha", c.model.alpha);
            read_if(m, "tau", c.model.tau);
            read_if(m, "context_length", c.model.context_length);
            read_if(m, "factors", c.model.factors);
            read_if(m, "match_radius", c.model.match_radius);
        }
        if (j.contains("detectors")) {
            const json& d = j.at("detectors");
            read_if(d, "pp_epsilon_raw", c.detectors.pp_epsilon_raw);
            read_if(d, "pp_mean_decode", c.detectors.pp_mean_decode);
            read_if(d, "lambda0", c.detectors.lambda0);
            read_if(d, "lambda_decay", c.detectors.lambda_decay);
            read_if(d, "cusum_drift", c.detectors.cusum_drift);
            read_if(d, "cusum_decision", c.detectors.cusum_decision);
            read_if(d, "md_variance_floor", c.detectors.md_variance_floor);
            read_if(d, "md_sqrt_form", c.detectors.md_sqrt_form);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }

    for (const auto& id : c.envs)
        if (!grid::variant_from_id(id)) {
            std::ostringstream msg;
            msg << "unknown environment id '" << id << "'; catalog:";
            for (const auto& [name, v] : grid::variant_catalog()) msg << " " << name;
            throw ConfigError(msg.str());
        }
    if (c.budgets.collect_scripted_steps <= 0 || c.budgets.collect_random_steps <= 0 ||
        c.budgets.eval_steps_per_variant <= 0 || c.budgets.episode_cap <= 0)
        throw ConfigError("budgets must be positive");
    if (c.model.alpha <= 0.0 || c.model.tau <= 0.0) throw ConfigError("model alpha and tau must be positive");
    if (c.model.context_length < 1 || c.model.context_length > 3)
        throw ConfigError("context_length must be in 1..3");
    if (c.detectors.pp_epsilon_raw <= 0.0) throw ConfigError("pp_epsilon_raw must be positive");
    if (c.eval_policy != "scripted" && c.eval_policy != "random" && c.eval_policy != "both")
        throw ConfigError("eval_policy must be scripted, random, or both");
    c.method_list();  // validates method names
    return c;
}

std::string config_to_json(const RunConfig& c) {
    json j;
    j["root_seed"] = c.root_seed;
    j["out_dir"] = c.out_dir;
    j["envs"] = c.envs;
    j["novelty_onset_step"] = c.novelty_onset_step;
    j["eval_policy"] = c.eval_policy;
    j["tile_size"] = c.tile_size;
    j["methods"] = c.methods;
    j["snapshots"] = c.snapshots;
    j["budgets"] = {{"collect_scripted_steps", c.budgets.collect_scripted_steps},
                    {"collect_random_steps", c.budgets.collect_random_steps},
                    {"eval_steps_per_variant", c.budgets.eval_steps_per_variant},
                    {"episode_cap", c.budgets.episode_cap}};
    j["model"] = {{"alpha", c.model.alpha},
                  {"tau", c.model.tau},
                  {"context_length", c.model.context_length},
                  {"factors", c.model.factors},
                  {"match_radius", c.model.match_radius}};
    j["detectors"] = {{"pp_epsilon_raw", c.detectors.pp_epsilon_raw},
                      {"pp_mean_decode", c.detectors.pp_mean_decode},
                      {"lambda0", c.detectors.lambda0},
                      {"lambda_decay", c.detectors.lambda_decay},
                      {"cusum_drift", c.detectors.cusum_drift},
                      {"cusum_decision", c.detectors.cusum_decision},
                      {"md_variance_floor", c.detectors.md_variance_floor},
                      {"md_sqrt_form", c.detectors.md_sqrt_form}};
    return j.dump(1, '\t');
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

void save_config(const RunConfig& config, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open config for writing: " + path);
    out << config_to_json(config) << '\n';
    if (!out) throw IoError("config write failed: " + path);
}

std::uint64_t config_digest(const RunConfig& config) {
    // The digest identifies the run parameters; where the artifacts land is
    // not one of them.
    RunConfig canonical = config;
    canonical.out_dir.clear();
    return fnv1a64(config_to_json(canonical));
}

}  // namespace novelgrid
