#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "novelgrid/detectors.hpp"
#include "novelgrid/gridworld.hpp"
#include "novelgrid/trace.hpp"
#include "novelgrid/world_model.hpp"

namespace novelgrid::harness {

enum class PolicyKind : int { Scripted = 0, Random = 1 };
std::string policy_name(PolicyKind p);
std::optional<PolicyKind> policy_from_name(const std::string& name);

// Bounded FIFO store of episode traces partitioned by (policy, variant).
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity_per_partition = 100000)
        : capacity_(capacity_per_partition) {}

    void add(EpisodeTrace trace);
    const std::deque<EpisodeTrace>& partition(PolicyKind policy, grid::Variant variant) const;
    std::vector<const EpisodeTrace*> all() const;
    std::size_t episode_count() const;
    std::int64_t step_count() const;

private:
    std::size_t capacity_;
    std::map<std::pair<int, int>, std::deque<EpisodeTrace>> partitions_;
};

struct RunLimits {
    int episode_cap = 200;  // max transitions per episode
    int tile_size = 8;
    int novelty_onset_setting = 0;
};

// Runs episodes without a model or detectors (buffer collection). Episode
// seeds fan out from `seed` by index, so the buffer is deterministic.
ReplayBuffer collect(grid::Variant variant, PolicyKind policy, int episodes, std::uint64_t seed,
                     RunLimits limits = {});

// Same, but stops after at least `min_steps` transitions have been gathered.
ReplayBuffer collect_steps(grid::Variant variant, PolicyKind policy, std::int64_t min_steps,
                           std::uint64_t seed, RunLimits limits = {});

EpisodeTrace run_collection_episode(grid::Variant variant, PolicyKind policy, std::uint64_t seed,
                                    RunLimits limits = {});

std::vector<model::TrainingEpisode> to_training_episodes(std::span<const EpisodeTrace* const> traces);
std::vector<model::TrainingEpisode> to_training_episodes(const ReplayBuffer& buffer);

// Calibrated detector bundle: CMTRE thresholds from the trained/random
// partitions, CUSUM drift and decision from the calibration surprise
// stream when the config leaves them at zero.
struct DetectorSuite {
    detect::DetectorConfig config;
    detect::MareThresholds thresholds;
    std::vector<detect::Method> methods;  // verdicts are produced for these only

    bool has(detect::Method m) const;
};

std::vector<detect::Method> all_methods();

// Reconstruction MARE of every step in `traces` under the model (argmax
// decode), following the context chain the model would build.
std::vector<double> reconstruction_mares(const model::WorldModel& model,
                                         std::span<const EpisodeTrace* const> traces);

std::vector<double> surprise_stream(const model::WorldModel& model,
                                    std::span<const EpisodeTrace* const> traces);

DetectorSuite calibrate_suite(const model::WorldModel& model, const ReplayBuffer& nominal_buffer,
                              detect::DetectorConfig config, std::vector<detect::Method> methods);

// Full per-step evaluation pipeline: render, represent/prior, one verdict
// per configured method, then the recurrent update with the sampled code.
// The model is read-only throughout.
EpisodeTrace run_episode(grid::Variant variant, PolicyKind policy, const model::WorldModel& model,
                         const DetectorSuite& suite, std::uint64_t seed, RunLimits limits = {});

// ----- Metrics -------------------------------------------------------------

struct AdeResult {
    std::optional<double> ade;  // absent when no episode produced a flag
    int detected_episodes = 0;
    int missed_episodes = 0;  // never-flagged novel episodes (false negatives)
};

// Mean over episodes of |first flag step - onset|; episodes with no flag
// are excluded and reported as misses.
AdeResult average_delay_error(std::span<const EpisodeTrace* const> traces, detect::Method method);

struct ConfusionMetrics {
    long long tp = 0, fp = 0, tn = 0, fn = 0;
    std::optional<double> precision, recall, accuracy, fp_rate, fn_rate;
};

// Step-level labels: a novel-trace step is positive iff step >= onset;
// every nominal step is negative. Undefined cells stay absent, not zero.
ConfusionMetrics confusion_metrics(std::span<const EpisodeTrace* const> novel,
                                   std::span<const EpisodeTrace* const> nominal, detect::Method method);

// Probability that a uniformly random positive outranks a uniformly random
// negative, ties counted 1/2 (Mann-Whitney). Absent on single-class input.
std::optional<double> auc(std::span<const std::pair<double, int>> scored);

// Continuous per-step statistic for AUC: raw MARE for observation methods,
// the score-minus-threshold margin for the latent bounds, the statistic
// itself for CUSUM.
double auc_statistic(const detect::DetectorVerdict& v);

std::vector<std::pair<double, int>> gather_auc_scores(std::span<const EpisodeTrace* const> novel,
                                                      std::span<const EpisodeTrace* const> nominal,
                                                      detect::Method method);

// Fraction of episodes flagged at each step index.
std::vector<double> fp_by_step(std::span<const EpisodeTrace* const> nominal, detect::Method method);

struct BoundCurves {
    std::vector<std::int64_t> snapshot_steps;
    std::vector<double> mean_lhs;     // surprise, the Eq. 2 score
    std::vector<double> mean_rhs;     // bound threshold
    std::vector<double> mean_h0_div;  // KL[represent || represent_h0]
};

BoundCurves bound_behavior_curves(std::span<const model::WorldModel* const> snapshots,
                                  std::span<const std::int64_t> snapshot_steps,
                                  std::span<const EpisodeTrace* const> heldout);

// ----- Report --------------------------------------------------------------

struct MethodRow {
    detect::Method method;
    AdeResult ade;
    ConfusionMetrics confusion;
    std::optional<double> auc_value;
};

struct VariantReport {
    grid::Variant variant;
    int episodes = 0;
    std::int64_t steps = 0;
    std::vector<MethodRow> methods;
};

struct EvaluationReport {
    std::uint64_t root_seed = 0;
    std::uint64_t config_digest = 0;
    std::vector<detect::Method> methods;
    std::vector<VariantReport> variants;                      // novel variants only
    std::map<int, double> nominal_fp_rate;                    // by method index
    std::map<int, std::vector<double>> nominal_fp_curves;     // by method index
    std::int64_t nominal_steps = 0;
};

EvaluationReport build_report(std::uint64_t root_seed, std::uint64_t config_digest,
                              const std::vector<detect::Method>& methods,
                              const std::map<int, std::vector<EpisodeTrace>>& traces_by_variant);

std::string report_to_json(const EvaluationReport& report);
std::string report_to_text(const EvaluationReport& report);

}  // namespace novelgrid::harness
