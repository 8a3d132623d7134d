#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "novelgrid/config.hpp"
#include "novelgrid/detectors.hpp"
#include "novelgrid/gridworld.hpp"
#include "novelgrid/harness.hpp"
#include "novelgrid/world_model.hpp"

namespace py = pybind11;

using namespace novelgrid;

namespace {

py::array_t<float> to_numpy(const Observation& obs) {
    py::array_t<float> arr({obs.height, obs.width, 3});
    std::copy(obs.data.begin(), obs.data.end(), arr.mutable_data());
    return arr;
}

Observation from_numpy(const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 3 || arr.shape(2) != 3)
        throw std::invalid_argument("observation arrays must have shape (height, width, 3)");
    Observation obs;
    obs.height = static_cast<int>(arr.shape(0));
    obs.width = static_cast<int>(arr.shape(1));
    obs.data.assign(arr.data(), arr.data() + arr.size());
    return obs;
}

detect::CategoricalBelief belief_of(const std::vector<double>& probs) {
    return detect::CategoricalBelief::single(probs);
}

harness::PolicyKind policy_of(const std::string& name) {
    auto p = harness::policy_from_name(name);
    if (!p) throw std::invalid_argument("policy must be 'scripted' or 'random'");
    return *p;
}

grid::Variant variant_of(const std::string& id) {
    auto v = grid::variant_from_id(id);
    if (!v) throw std::invalid_argument("unknown environment id: " + id);
    return *v;
}

std::vector<detect::Method> methods_of(const std::vector<std::string>& names) {
    if (names.empty()) return harness::all_methods();
    std::vector<detect::Method> out;
    for (const auto& n : names) out.push_back(detect::method_from_name(n));
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "gridworld novelty-detection testbed core";

    m.def("environment_ids", [] {
        std::vector<std::string> out;
        for (const auto& [id, v] : grid::variant_catalog()) out.push_back(id);
        return out;
    });
    m.def("method_names", [] {
        std::vector<std::string> out;
        for (auto method : harness::all_methods()) out.push_back(detect::method_name(method));
        return out;
    });

    py::class_<SplitMix64>(m, "Rng")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def("next_below", &SplitMix64::next_below, py::arg("n"))
        .def("next_double", &SplitMix64::next_double);

    py::class_<grid::Environment>(m, "Environment")
        .def(py::init([](const std::string& id, std::uint64_t seed, int tile_size, int novelty_onset_step) {
                 return grid::Environment(variant_of(id), seed,
                                          grid::EnvConfig{tile_size, novelty_onset_step});
             }),
             py::arg("id"), py::arg("seed") = 0, py::arg("tile_size") = 8,
             py::arg("novelty_onset_step") = 0)
        .def("observe", [](const grid::Environment& env) { return to_numpy(env.observe()); })
        .def("step",
             [](grid::Environment& env, int action) {
                 const auto r = env.step(static_cast<grid::Action>(action));
                 return py::make_tuple(r.reward, r.done);
             },
             py::arg("action"))
        .def("reset", &grid::Environment::reset)
        .def("scripted_action",
             [](const grid::Environment& env) { return static_cast<int>(grid::scripted_policy(env.state())); })
        .def("rule_fire_steps", &grid::Environment::rule_fire_steps)
        .def_property_readonly("terminated",
                               [](const grid::Environment& env) { return env.state().terminated; })
        .def_property_readonly("step_count",
                               [](const grid::Environment& env) { return env.state().step_count; })
        .def_property_readonly("agent_position", [](const grid::Environment& env) {
            return py::make_tuple(env.state().agent_col, env.state().agent_row);
        })
        .def_property_readonly("variant", [](const grid::Environment& env) {
            return grid::variant_id(env.variant());
        });

    m.def("random_action", [](SplitMix64& rng) { return static_cast<int>(grid::random_policy(rng)); },
          py::arg("rng"));

    m.def("mare",
          [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
             const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
              return detect::mare(from_numpy(a), from_numpy(b));
          },
          py::arg("a"), py::arg("b"));
    m.def("kl_divergence",
          [](const std::vector<double>& p, const std::vector<double>& q) {
              return detect::kl_divergence(belief_of(p), belief_of(q));
          },
          py::arg("p"), py::arg("q"));
    m.def("cross_entropy",
          [](const std::vector<double>& p, const std::vector<double>& q) {
              return detect::cross_entropy(belief_of(p), belief_of(q));
          },
          py::arg("p"), py::arg("q"));
    m.def("mahalanobis",
          [](const std::vector<double>& one_hot, const std::vector<double>& belief, double variance_floor,
             bool sqrt_form) {
              return detect::mahalanobis(belief_of(one_hot), belief_of(belief), variance_floor, sqrt_form);
          },
          py::arg("one_hot"), py::arg("belief"), py::arg("variance_floor") = 1e-6,
          py::arg("sqrt_form") = false);
    m.def("cusum_update",
          [](double stat, double score, double drift, double decision) {
              const auto r = detect::cusum_update(stat, score, drift, decision);
              return py::make_tuple(r.stat, r.flag);
          },
          py::arg("stat"), py::arg("score"), py::arg("drift"), py::arg("decision"));
    m.def("cmtre_calibrate",
          [](const std::vector<double>& trained, const std::vector<double>& random) {
              const auto t = detect::cmtre_calibrate(trained, random);
              return py::make_tuple(t.trained, t.random, t.combination);
          },
          py::arg("trained_mares"), py::arg("random_mares"));
    m.def("auc",
          [](const std::vector<std::pair<double, int>>& scored) -> std::optional<double> {
              return harness::auc(scored);
          },
          py::arg("scored"));

    py::class_<harness::ReplayBuffer>(m, "ReplayBuffer")
        .def_property_readonly("episodes", &harness::ReplayBuffer::episode_count)
        .def_property_readonly("steps", &harness::ReplayBuffer::step_count);

    m.def("collect_steps",
          [](const std::string& id, const std::string& policy, std::int64_t min_steps, std::uint64_t seed,
             int episode_cap) {
              harness::RunLimits limits;
              limits.episode_cap = episode_cap;
              return harness::collect_steps(variant_of(id), policy_of(policy), min_steps, seed, limits);
          },
          py::arg("id"), py::arg("policy"), py::arg("min_steps"), py::arg("seed"),
          py::arg("episode_cap") = 200);
    m.def("merge_buffers", [](harness::ReplayBuffer& into, const harness::ReplayBuffer& from) {
        for (const auto* t : from.all()) into.add(*t);
    });

    py::class_<model::RecurrentContext>(m, "Context")
        .def_static("null", &model::RecurrentContext::null_context)
        .def_property_readonly("is_null", [](const model::RecurrentContext& c) { return c.is_null; });

    py::class_<model::WorldModel>(m, "WorldModel")
        .def_static(
            "train",
            [](const harness::ReplayBuffer& buffer, double alpha, double tau, int context_length,
               double match_radius) {
                model::ModelParams params;
                params.alpha = alpha;
                params.tau = tau;
                params.context_length = context_length;
                params.match_radius = match_radius;
                const auto eps = harness::to_training_episodes(buffer);
                return model::WorldModel::train(eps, params);
            },
            py::arg("buffer"), py::arg("alpha") = 1e-3, py::arg("tau") = 2e-4,
            py::arg("context_length") = 1, py::arg("match_radius") = 0.0)
        .def_property_readonly("code_count", &model::WorldModel::code_count)
        .def("represent",
             [](const model::WorldModel& m, const model::RecurrentContext& h,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& x) {
                 return m.represent(h, from_numpy(x)).factors[0];
             })
        .def("prior",
             [](const model::WorldModel& m, const model::RecurrentContext& h) {
                 return m.prior(h).factors[0];
             })
        .def("represent_h0",
             [](const model::WorldModel& m,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& x) {
                 return m.represent_h0(from_numpy(x)).factors[0];
             })
        .def("prior_h0", [](const model::WorldModel& m) { return m.prior_h0().factors[0]; })
        .def("decode_code",
             [](const model::WorldModel& m, int code) { return to_numpy(m.decode_code(code)); })
        .def("sample",
             [](const model::WorldModel& m, const std::vector<double>& belief, SplitMix64& rng) {
                 return m.sample(belief_of(belief), rng);
             })
        .def("update_context",
             [](const model::WorldModel& m, const model::RecurrentContext& h, int code, int action) {
                 return m.recurrent_update(h, code, action);
             })
        .def("surprise",
             [](const model::WorldModel& m, const model::RecurrentContext& h,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& x) {
                 return m.surprise(h, from_numpy(x));
             })
        .def("exact_code",
             [](const model::WorldModel& m,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& x) {
                 return m.exact_code(from_numpy(x));
             })
        .def("save", &model::WorldModel::save, py::arg("path"))
        .def_static("load", &model::WorldModel::load, py::arg("path"))
        .def("__eq__", [](const model::WorldModel& a, const model::WorldModel& b) { return a == b; });

    py::class_<harness::DetectorSuite>(m, "DetectorSuite")
        .def_property_readonly("cmtre_thresholds",
                               [](const harness::DetectorSuite& s) {
                                   return py::make_tuple(s.thresholds.trained, s.thresholds.random,
                                                         s.thresholds.combination);
                               })
        .def_property_readonly("cusum_drift",
                               [](const harness::DetectorSuite& s) { return s.config.cusum_drift; })
        .def_property_readonly("cusum_decision",
                               [](const harness::DetectorSuite& s) { return s.config.cusum_decision; });

    m.def("calibrate",
          [](const model::WorldModel& model, const harness::ReplayBuffer& buffer,
             const std::vector<std::string>& methods) {
              return harness::calibrate_suite(model, buffer, detect::DetectorConfig{}, methods_of(methods));
          },
          py::arg("model"), py::arg("buffer"), py::arg("methods") = std::vector<std::string>{});

    py::class_<harness::EpisodeTrace>(m, "EpisodeTrace")
        .def_property_readonly("onset",
                               [](const harness::EpisodeTrace& t) { return t.onset; })
        .def_property_readonly("length", [](const harness::EpisodeTrace& t) { return t.steps.size(); })
        .def_property_readonly("transitions",
                               [](const harness::EpisodeTrace& t) { return t.transition_count(); })
        .def_property_readonly("rule_fire_steps",
                               [](const harness::EpisodeTrace& t) { return t.rule_fire_steps; })
        .def("actions",
             [](const harness::EpisodeTrace& t) {
                 std::vector<int> out;
                 for (const auto& s : t.steps) out.push_back(s.action);
                 return out;
             })
        .def("flags",
             [](const harness::EpisodeTrace& t, const std::string& method) {
                 const auto m = detect::method_from_name(method);
                 std::vector<bool> out;
                 for (const auto& s : t.steps) {
                     const auto* v = t.verdict_at(s.step, m);
                     out.push_back(v != nullptr && v->flag);
                 }
                 return out;
             },
             py::arg("method"))
        .def("scores",
             [](const harness::EpisodeTrace& t, const std::string& method) {
                 const auto m = detect::method_from_name(method);
                 std::vector<double> out;
                 for (const auto& s : t.steps) {
                     const auto* v = t.verdict_at(s.step, m);
                     out.push_back(v ? v->score : 0.0);
                 }
                 return out;
             },
             py::arg("method"))
        .def("to_json", [](const harness::EpisodeTrace& t) { return harness::trace_to_json(t); });

    m.def("run_episode",
          [](const std::string& id, const std::string& policy, const model::WorldModel& model,
             const harness::DetectorSuite& suite, std::uint64_t seed, int episode_cap,
             int novelty_onset_step) {
              harness::RunLimits limits;
              limits.episode_cap = episode_cap;
              limits.novelty_onset_setting = novelty_onset_step;
              return harness::run_episode(variant_of(id), policy_of(policy), model, suite, seed, limits);
          },
          py::arg("id"), py::arg("policy"), py::arg("model"), py::arg("suite"), py::arg("seed"),
          py::arg("episode_cap") = 200, py::arg("novelty_onset_step") = 0);
}
