#include "novelgrid/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "novelgrid/errors.hpp"

namespace novelgrid::harness {

using detect::DetectorVerdict;
using detect::Method;
using grid::Action;
using grid::Variant;
using model::RecurrentContext;
using model::WorldModel;
using nlohmann::json;

std::string policy_name(PolicyKind p) { return p == PolicyKind::Scripted ? "scripted" : "random"; }

std::optional<PolicyKind> policy_from_name(const std::string& name) {
    if (name == "scripted") return PolicyKind::Scripted;
    if (name == "random") return PolicyKind::Random;
    return std::nullopt;
}

void ReplayBuffer::add(EpisodeTrace trace) {
    auto pol = policy_from_name(trace.policy);
    const int p = pol ? static_cast<int>(*pol) : 0;
    auto& part = partitions_[{p, static_cast<int>(trace.variant)}];
    part.push_back(std::move(trace));
    while (part.size() > capacity_) part.pop_front();
}

const std::deque<EpisodeTrace>& ReplayBuffer::partition(PolicyKind policy, Variant variant) const {
    static const std::deque<EpisodeTrace> empty;
    auto it = partitions_.find({static_cast<int>(policy), static_cast<int>(variant)});
    return it == partitions_.end() ? empty : it->second;
}

std::vector<const EpisodeTrace*> ReplayBuffer::all() const {
    std::vector<const EpisodeTrace*> out;
    for (const auto& [key, part] : partitions_)
        for (const auto& t : part) out.push_back(&t);
    return out;
}

std::size_t ReplayBuffer::episode_count() const {
    std::size_t n = 0;
    for (const auto& [key, part] : partitions_) n += part.size();
    return n;
}

std::int64_t ReplayBuffer::step_count() const {
    std::int64_t n = 0;
    for (const auto& [key, part] : partitions_)
        for (const auto& t : part) n += t.transition_count();
    return n;
}

EpisodeTrace run_collection_episode(Variant variant, PolicyKind policy, std::uint64_t seed,
                                    RunLimits limits) {
    grid::Environment env(variant, seed, {limits.tile_size, limits.novelty_onset_setting});
    SplitMix64 policy_rng(derive_seed(seed, "policy"));

    EpisodeTrace trace;
    trace.variant = variant;
    trace.seed = seed;
    trace.policy = policy_name(policy);
    trace.novelty_onset_setting = limits.novelty_onset_setting;
    trace.tile_size = limits.tile_size;

    for (int t = 0;; ++t) {
        trace.observations.push_back(env.observe());
        StepRecord rec;
        rec.step = t;
        if (env.state().terminated || t >= limits.episode_cap) {
            trace.steps.push_back(std::move(rec));
            break;
        }
        const Action a = policy == PolicyKind::Scripted ? grid::scripted_policy(env.state())
                                                        : grid::random_policy(policy_rng);
        const grid::RewardSignal r = env.step(a);
        rec.action = static_cast<int>(a);
        rec.reward = r.reward;
        rec.done = r.done;
        trace.steps.push_back(std::move(rec));
    }
    trace.rule_fire_steps = env.rule_fire_steps();
    trace.onset = novelty_onset(trace);
    return trace;
}

ReplayBuffer collect(Variant variant, PolicyKind policy, int episodes, std::uint64_t seed, RunLimits limits) {
    ReplayBuffer buffer;
    const std::string tag = "collect/" + grid::variant_id(variant) + "/" + policy_name(policy);
    for (int i = 0; i < episodes; ++i)
        buffer.add(run_collection_episode(variant, policy, derive_seed(seed, tag, i), limits));
    return buffer;
}

ReplayBuffer collect_steps(Variant variant, PolicyKind policy, std::int64_t min_steps, std::uint64_t seed,
                           RunLimits limits) {
    ReplayBuffer buffer;
    const std::string tag = "collect/" + grid::variant_id(variant) + "/" + policy_name(policy);
    std::int64_t steps = 0;
    for (int i = 0; steps < min_steps; ++i) {
        EpisodeTrace t = run_collection_episode(variant, policy, derive_seed(seed, tag, i), limits);
        steps += t.transition_count();
        buffer.add(std::move(t));
    }
    return buffer;
}

std::vector<model::TrainingEpisode> to_training_episodes(std::span<const EpisodeTrace* const> traces) {
    std::vector<model::TrainingEpisode> out;
    out.reserve(traces.size());
    for (const EpisodeTrace* t : traces) {
        model::TrainingEpisode ep;
        ep.observations = t->observations;
        for (std::size_t i = 0; i + 1 < t->steps.size(); ++i) ep.actions.push_back(t->steps[i].action);
        out.push_back(std::move(ep));
    }
    return out;
}

std::vector<model::TrainingEpisode> to_training_episodes(const ReplayBuffer& buffer) {
    auto ptrs = buffer.all();
    return to_training_episodes(std::span<const EpisodeTrace* const>(ptrs));
}

bool DetectorSuite::has(Method m) const {
    return std::find(methods.begin(), methods.end(), m) != methods.end();
}

std::vector<Method> all_methods() {
    std::vector<Method> out;
    for (int i = 0; i < detect::kNumMethods; ++i) out.push_back(static_cast<Method>(i));
    return out;
}

std::vector<double> reconstruction_mares(const WorldModel& model,
                                         std::span<const EpisodeTrace* const> traces) {
    std::vector<double> out;
    for (const EpisodeTrace* t : traces) {
        RecurrentContext h = RecurrentContext::null_context();
        for (std::size_t i = 0; i < t->steps.size(); ++i) {
            const Observation& x = t->observations[i];
            const auto post = model.represent(h, x);
            const auto& probs = post.factors[0];
            const int argmax = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
            out.push_back(detect::mare(x, model.code_image(argmax)));
            if (t->steps[i].action >= 0) h = model.recurrent_update(h, argmax, t->steps[i].action);
        }
    }
    return out;
}

std::vector<double> surprise_stream(const WorldModel& model, std::span<const EpisodeTrace* const> traces) {
    std::vector<double> out;
    for (const EpisodeTrace* t : traces) {
        RecurrentContext h = RecurrentContext::null_context();
        for (std::size_t i = 0; i < t->steps.size(); ++i) {
            const Observation& x = t->observations[i];
            const auto post = model.represent(h, x);
            out.push_back(detect::kl_divergence(post, model.prior(h)));
            const auto& probs = post.factors[0];
            const int argmax = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
            if (t->steps[i].action >= 0) h = model.recurrent_update(h, argmax, t->steps[i].action);
        }
    }
    return out;
}

DetectorSuite calibrate_suite(const WorldModel& model, const ReplayBuffer& nominal_buffer,
                              detect::DetectorConfig config, std::vector<Method> methods) {
    DetectorSuite suite;
    suite.config = config;
    suite.methods = std::move(methods);

    const auto& trained_part = nominal_buffer.partition(PolicyKind::Scripted, Variant::Nominal);
    const auto& random_part = nominal_buffer.partition(PolicyKind::Random, Variant::Nominal);
    if (trained_part.empty() || random_part.empty())
        throw CalibrationError("calibration needs nominal traces from both the scripted and random policies");

    std::vector<const EpisodeTrace*> trained, random;
    for (const auto& t : trained_part) trained.push_back(&t);
    for (const auto& t : random_part) random.push_back(&t);

    const std::vector<double> trained_mares = reconstruction_mares(model, trained);
    const std::vector<double> random_mares = reconstruction_mares(model, random);
    suite.thresholds = detect::cmtre_calibrate(trained_mares, random_mares);

    if (suite.config.cusum_drift == 0.0 && suite.config.cusum_decision == 0.0) {
        std::vector<const EpisodeTrace*> all = trained;
        all.insert(all.end(), random.begin(), random.end());
        const std::vector<double> surprises = surprise_stream(model, all);
        double mean = 0.0;
        for (double s : surprises) mean += s;
        mean /= static_cast<double>(surprises.size());
        double var = 0.0;
        for (double s : surprises) var += (s - mean) * (s - mean);
        var /= static_cast<double>(surprises.size());
        suite.config.cusum_drift = mean;
        suite.config.cusum_decision = mean + 5.0 * std::sqrt(var);
    }
    return suite;
}

EpisodeTrace run_episode(Variant variant, PolicyKind policy, const WorldModel& model,
                         const DetectorSuite& suite, std::uint64_t seed, RunLimits limits) {
    if (model.observation_width() != 6 * limits.tile_size)
        throw std::invalid_argument("run_episode: model and environment observation shapes differ");

    grid::Environment env(variant, seed, {limits.tile_size, limits.novelty_onset_setting});
    SplitMix64 policy_rng(derive_seed(seed, "policy"));
    SplitMix64 sample_rng(derive_seed(seed, "detector-sample"));

    EpisodeTrace trace;
    trace.variant = variant;
    trace.seed = seed;
    trace.policy = policy_name(policy);
    trace.novelty_onset_setting = limits.novelty_onset_setting;
    trace.tile_size = limits.tile_size;

    RecurrentContext h = RecurrentContext::null_context();
    const auto prior_h0 = model.prior_h0();
    double cusum_stat = 0.0;

    for (int t = 0;; ++t) {
        const Observation x = env.observe();
        trace.observations.push_back(x);

        StepRecord rec;
        rec.step = t;

        const auto posterior = model.represent(h, x);
        const auto prior = model.prior(h);
        const int z = model.sample(posterior, sample_rng);
        rec.code = z;

        const bool need_kl = suite.has(Method::Kl) || suite.has(Method::KlMd) || suite.has(Method::Cusum);
        double lhs = 0.0, rhs = 0.0;
        if (need_kl) {
            lhs = detect::kl_divergence(posterior, prior);
            rhs = detect::kl_divergence(posterior, prior_h0) -
                  detect::kl_divergence(posterior, model.represent_h0(x));
        }

        const bool need_cmtre = suite.has(Method::CmtreTrained) || suite.has(Method::CmtreRandom) ||
                                suite.has(Method::CmtreCombo);
        if (need_cmtre) {
            const auto& probs = posterior.factors[0];
            const int argmax = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
            const Observation recon = model.decode_code(argmax);
            if (suite.has(Method::CmtreTrained))
                rec.verdicts.push_back(detect::cmtre_detect(x, recon, suite.thresholds.trained,
                                                            Method::CmtreTrained, t));
            if (suite.has(Method::CmtreRandom))
                rec.verdicts.push_back(detect::cmtre_detect(x, recon, suite.thresholds.random,
                                                            Method::CmtreRandom, t));
            if (suite.has(Method::CmtreCombo))
                rec.verdicts.push_back(detect::cmtre_detect(x, recon, suite.thresholds.combination,
                                                            Method::CmtreCombo, t));
        }

        if (suite.has(Method::PpMare)) {
            Observation prior_recon, posterior_recon;
            if (suite.config.pp_mean_decode) {
                prior_recon = model.decode(h, prior);
                posterior_recon = model.decode(h, posterior);
            } else {
                const int zp = model.sample(prior, sample_rng);
                prior_recon = model.decode_code(zp);
                posterior_recon = model.decode_code(z);
            }
            rec.verdicts.push_back(detect::pp_mare_detect(prior_recon, posterior_recon,
                                                          suite.config.pp_epsilon_raw / 255.0, t));
        }

        if (suite.has(Method::Kl)) rec.verdicts.push_back(detect::kl_bound_verdict(lhs, rhs, t));

        if (suite.has(Method::KlMd)) {
            const double dist = detect::mahalanobis(model.one_hot(z), posterior,
                                                    suite.config.md_variance_floor, suite.config.md_sqrt_form);
            rec.verdicts.push_back(
                detect::kl_md_verdict(lhs, rhs, dist, detect::lambda_schedule(t, suite.config), t));
        }

        if (suite.has(Method::Cusum)) {
            const detect::CusumResult cr =
                detect::cusum_update(cusum_stat, lhs, suite.config.cusum_drift, suite.config.cusum_decision);
            DetectorVerdict v;
            v.method = Method::Cusum;
            v.step = t;
            v.score = cr.stat;
            v.threshold = suite.config.cusum_decision;
            v.flag = cr.flag;
            rec.verdicts.push_back(v);
            cusum_stat = cr.flag ? 0.0 : cr.stat;  // harness owns the post-flag reset
        }

        if (env.state().terminated || t >= limits.episode_cap) {
            trace.steps.push_back(std::move(rec));
            break;
        }

        const Action a = policy == PolicyKind::Scripted ? grid::scripted_policy(env.state())
                                                        : grid::random_policy(policy_rng);
        const grid::RewardSignal r = env.step(a);
        rec.action = static_cast<int>(a);
        rec.reward = r.reward;
        rec.done = r.done;
        trace.steps.push_back(std::move(rec));
        h = model.recurrent_update(h, z, static_cast<int>(a));
    }

    trace.rule_fire_steps = env.rule_fire_steps();
    trace.onset = novelty_onset(trace);
    return trace;
}

AdeResult average_delay_error(std::span<const EpisodeTrace* const> traces, Method method) {
    AdeResult result;
    double sum = 0.0;
    for (const EpisodeTrace* t : traces) {
        if (!t->onset) continue;
        std::optional<int> first_flag;
        for (const auto& s : t->steps) {
            for (const auto& v : s.verdicts)
                if (v.method == method && v.flag) {
                    first_flag = s.step;
                    break;
                }
            if (first_flag) break;
        }
        if (!first_flag) {
            ++result.missed_episodes;
            continue;
        }
        ++result.detected_episodes;
        sum += std::abs(static_cast<double>(*first_flag - *t->onset));
    }
    if (result.detected_episodes > 0) result.ade = sum / result.detected_episodes;
    return result;
}

namespace {

void tally(const EpisodeTrace& t, Method method, bool nominal, long long& tp, long long& fp, long long& tn,
           long long& fn) {
    for (const auto& s : t.steps) {
        const DetectorVerdict* v = t.verdict_at(s.step, method);
        if (!v) continue;
        const bool positive = !nominal && t.onset && s.step >= *t.onset;
        if (positive) {
            if (v->flag) ++tp;
            else ++fn;
        } else {
            if (v->flag) ++fp;
            else ++tn;
        }
    }
}

}  // namespace

ConfusionMetrics confusion_metrics(std::span<const EpisodeTrace* const> novel,
                                   std::span<const EpisodeTrace* const> nominal, Method method) {
    ConfusionMetrics m;
    for (const EpisodeTrace* t : novel) tally(*t, method, false, m.tp, m.fp, m.tn, m.fn);
    for (const EpisodeTrace* t : nominal) tally(*t, method, true, m.tp, m.fp, m.tn, m.fn);
    const auto ratio = [](long long num, long long den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.precision = ratio(m.tp, m.tp + m.fp);
    m.recall = ratio(m.tp, m.tp + m.fn);
    m.accuracy = ratio(m.tp + m.tn, m.tp + m.fp + m.tn + m.fn);
    m.fp_rate = ratio(m.fp, m.fp + m.tn);
    m.fn_rate = ratio(m.fn, m.fn + m.tp);
    return m;
}

std::optional<double> auc(std::span<const std::pair<double, int>> scored) {
    std::vector<std::pair<double, int>> sorted(scored.begin(), scored.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    long long positives = 0, negatives = 0;
    for (const auto& [score, label] : sorted) (label ? positives : negatives)++;
    if (positives == 0 || negatives == 0) return std::nullopt;

    // Sum over positives of (#negatives below + #tied/2); tie groups are
    // handled exactly, so the result matches pairwise enumeration.
    double u = 0.0;
    long long neg_below = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        long long tie_pos = 0, tie_neg = 0;
        while (j < sorted.size() && sorted[j].first == sorted[i].first) {
            (sorted[j].second ? tie_pos : tie_neg)++;
            ++j;
        }
        u += static_cast<double>(tie_pos) * (static_cast<double>(neg_below) + 0.5 * static_cast<double>(tie_neg));
        neg_below += tie_neg;
        i = j;
    }
    return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

double auc_statistic(const DetectorVerdict& v) {
    switch (v.method) {
        case Method::Kl:
        case Method::KlMd:
            return v.score - v.threshold;
        default:
            return v.score;
    }
}

std::vector<std::pair<double, int>> gather_auc_scores(std::span<const EpisodeTrace* const> novel,
                                                      std::span<const EpisodeTrace* const> nominal,
                                                      Method method) {
    std::vector<std::pair<double, int>> out;
    const auto push = [&](const EpisodeTrace& t, bool is_nominal) {
        for (const auto& s : t.steps) {
            const DetectorVerdict* v = t.verdict_at(s.step, method);
            if (!v) continue;
            const bool positive = !is_nominal && t.onset && s.step >= *t.onset;
            out.emplace_back(auc_statistic(*v), positive ? 1 : 0);
        }
    };
    for (const EpisodeTrace* t : novel) push(*t, false);
    for (const EpisodeTrace* t : nominal) push(*t, true);
    return out;
}

std::vector<double> fp_by_step(std::span<const EpisodeTrace* const> nominal, Method method) {
    std::size_t max_len = 0;
    for (const EpisodeTrace* t : nominal) max_len = std::max(max_len, t->steps.size());
    std::vector<double> flagged(max_len, 0.0), seen(max_len, 0.0);
    for (const EpisodeTrace* t : nominal)
        for (const auto& s : t->steps) {
            const DetectorVerdict* v = t->verdict_at(s.step, method);
            if (!v) continue;
            seen[s.step] += 1.0;
            if (v->flag) flagged[s.step] += 1.0;
        }
    std::vector<double> out(max_len, 0.0);
    for (std::size_t i = 0; i < max_len; ++i)
        if (seen[i] > 0.0) out[i] = flagged[i] / seen[i];
    return out;
}

BoundCurves bound_behavior_curves(std::span<const WorldModel* const> snapshots,
                                  std::span<const std::int64_t> snapshot_steps,
                                  std::span<const EpisodeTrace* const> heldout) {
    if (snapshots.size() < 2) throw CalibrationError("bound_behavior_curves needs at least 2 snapshots");
    BoundCurves curves;
    curves.snapshot_steps.assign(snapshot_steps.begin(), snapshot_steps.end());
    for (const WorldModel* m : snapshots) {
        const auto prior_h0 = m->prior_h0();
        double sum_lhs = 0.0, sum_rhs = 0.0, sum_green = 0.0;
        std::int64_t n = 0;
        for (const EpisodeTrace* t : heldout) {
            RecurrentContext h = RecurrentContext::null_context();
            for (std::size_t i = 0; i < t->steps.size(); ++i) {
                const Observation& x = t->observations[i];
                const auto posterior = m->represent(h, x);
                const auto rep_h0 = m->represent_h0(x);
                const double green = detect::kl_divergence(posterior, rep_h0);
                sum_lhs += detect::kl_divergence(posterior, m->prior(h));
                sum_rhs += detect::kl_divergence(posterior, prior_h0) - green;
                sum_green += green;
                ++n;
                const auto& probs = posterior.factors[0];
                const int argmax =
                    static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
                if (t->steps[i].action >= 0) h = m->recurrent_update(h, argmax, t->steps[i].action);
            }
        }
        curves.mean_lhs.push_back(sum_lhs / static_cast<double>(n));
        curves.mean_rhs.push_back(sum_rhs / static_cast<double>(n));
        curves.mean_h0_div.push_back(sum_green / static_cast<double>(n));
    }
    return curves;
}

EvaluationReport build_report(std::uint64_t root_seed, std::uint64_t config_digest,
                              const std::vector<Method>& methods,
                              const std::map<int, std::vector<EpisodeTrace>>& traces_by_variant) {
    EvaluationReport report;
    report.root_seed = root_seed;
    report.config_digest = config_digest;
    report.methods = methods;

    std::vector<const EpisodeTrace*> nominal;
    auto nom_it = traces_by_variant.find(static_cast<int>(Variant::Nominal));
    if (nom_it != traces_by_variant.end())
        for (const auto& t : nom_it->second) nominal.push_back(&t);
    for (const EpisodeTrace* t : nominal) report.nominal_steps += static_cast<std::int64_t>(t->steps.size());

    for (Method m : methods) {
        long long flags = 0, total = 0;
        for (const EpisodeTrace* t : nominal)
            for (const auto& s : t->steps) {
                const DetectorVerdict* v = t->verdict_at(s.step, m);
                if (!v) continue;
                ++total;
                if (v->flag) ++flags;
            }
        if (total > 0)
            report.nominal_fp_rate[static_cast<int>(m)] =
                static_cast<double>(flags) / static_cast<double>(total);
        report.nominal_fp_curves[static_cast<int>(m)] = fp_by_step(nominal, m);
    }

    for (const auto& [variant_int, traces] : traces_by_variant) {
        if (variant_int == static_cast<int>(Variant::Nominal)) continue;
        VariantReport vr;
        vr.variant = static_cast<Variant>(variant_int);
        vr.episodes = static_cast<int>(traces.size());
        std::vector<const EpisodeTrace*> ptrs;
        for (const auto& t : traces) {
            ptrs.push_back(&t);
            vr.steps += static_cast<std::int64_t>(t.steps.size());
        }
        for (Method m : methods) {
            MethodRow row;
            row.method = m;
            row.ade = average_delay_error(ptrs, m);
            row.confusion = confusion_metrics(ptrs, nominal, m);
            const auto scored = gather_auc_scores(ptrs, nominal, m);
            row.auc_value = auc(scored);
            vr.methods.push_back(std::move(row));
        }
        report.variants.push_back(std::move(vr));
    }
    return report;
}

namespace {

json opt_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "-";
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(4) << *v;
    return ss.str();
}

}  // namespace

std::string report_to_json(const EvaluationReport& report) {
    json j;
    j["format_version"] = 1;
    j["root_seed"] = report.root_seed;
    j["config_digest"] = report.config_digest;
    json methods = json::array();
    for (Method m : report.methods) methods.push_back(detect::method_name(m));
    j["methods"] = methods;
    j["nominal"]["steps"] = report.nominal_steps;
    for (const auto& [m, rate] : report.nominal_fp_rate)
        j["nominal"]["fp_rate"][detect::method_name(static_cast<Method>(m))] = rate;
    for (const auto& [m, curve] : report.nominal_fp_curves)
        j["nominal"]["fp_by_step"][detect::method_name(static_cast<Method>(m))] = curve;
    json variants = json::array();
    for (const auto& vr : report.variants) {
        json jv;
        jv["variant"] = grid::variant_id(vr.variant);
        jv["episodes"] = vr.episodes;
        jv["steps"] = vr.steps;
        json rows = json::array();
        for (const auto& row : vr.methods) {
            json jr;
            jr["method"] = detect::method_name(row.method);
            jr["ade"] = opt_json(row.ade.ade);
            jr["detected_episodes"] = row.ade.detected_episodes;
            jr["missed_episodes"] = row.ade.missed_episodes;
            jr["precision"] = opt_json(row.confusion.precision);
            jr["recall"] = opt_json(row.confusion.recall);
            jr["accuracy"] = opt_json(row.confusion.accuracy);
            jr["fp_rate"] = opt_json(row.confusion.fp_rate);
            jr["fn_rate"] = opt_json(row.confusion.fn_rate);
            jr["auc"] = opt_json(row.auc_value);
            jr["tp"] = row.confusion.tp;
            jr["fp"] = row.confusion.fp;
            jr["tn"] = row.confusion.tn;
            jr["fn"] = row.confusion.fn;
            rows.push_back(std::move(jr));
        }
        jv["rows"] = std::move(rows);
        variants.push_back(std::move(jv));
    }
    j["variants"] = std::move(variants);
    return j.dump(1, '\t');
}

std::string report_to_text(const EvaluationReport& report) {
    std::ostringstream out;
    out << "root seed: " << report.root_seed << "\n";
    out << "config digest: " << report.config_digest << "\n\n";

    out << "nominal false positives (" << report.nominal_steps << " labeled steps)\n";
    for (const auto& [m, rate] : report.nominal_fp_rate) {
        out << "  " << std::left << std::setw(16) << detect::method_name(static_cast<Method>(m))
            << std::fixed << std::setprecision(4) << rate << "\n";
    }
    out << "\n";

    for (const auto& vr : report.variants) {
        out << grid::variant_id(vr.variant) << " (" << vr.episodes << " episodes, " << vr.steps
            << " steps)\n";
        out << "  " << std::left << std::setw(16) << "method" << std::setw(9) << "ade" << std::setw(9)
            << "miss" << std::setw(11) << "precision" << std::setw(9) << "recall" << std::setw(10)
            << "accuracy" << std::setw(9) << "auc" << "\n";
        for (const auto& row : vr.methods) {
            out << "  " << std::left << std::setw(16) << detect::method_name(row.method) << std::setw(9)
                << fmt_opt(row.ade.ade) << std::setw(9) << row.ade.missed_episodes << std::setw(11)
                << fmt_opt(row.confusion.precision) << std::setw(9) << fmt_opt(row.confusion.recall)
                << std::setw(10) << fmt_opt(row.confusion.accuracy) << std::setw(9)
                << fmt_opt(row.auc_value) << "\n";
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace novelgrid::harness
