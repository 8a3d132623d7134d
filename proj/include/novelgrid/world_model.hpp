#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "novelgrid/detectors.hpp"
#include "novelgrid/observation.hpp"
#include "novelgrid/rng.hpp"

namespace novelgrid::model {

using detect::CategoricalBelief;

// Deterministic history summary: a bounded window of (code, action) pairs
// with a distinguished null context h0.
struct RecurrentContext {
    std::vector<std::pair<std::int32_t, std::int8_t>> history;  // oldest first
    bool is_null = true;

    static RecurrentContext null_context() { return {}; }

    std::vector<std::int32_t> key() const {
        std::vector<std::int32_t> k;
        k.reserve(history.size() * 2);
        for (const auto& [code, action] : history) {
            k.push_back(code);
            k.push_back(action);
        }
        return k;
    }

    friend bool operator==(const RecurrentContext& a, const RecurrentContext& b) {
        return a.is_null == b.is_null && a.history == b.history;
    }
};

struct ModelParams {
    double alpha = 1e-3;       // query-time pseudo-count
    double tau = 2e-4;         // observation-match likelihood temperature
    int context_length = 1;    // history window L, 1..3
    int factors = 1;           // latent factor count housed in beliefs
    double match_radius = 0.0; // MARE tolerance for codebook clustering
};

struct TrainingEpisode {
    std::vector<Observation> observations;
    std::vector<int> actions;  // one fewer than observations
};

// Tabular categorical surrogate for an RSSM: a latent codebook over exact
// frames, count-based transition tables keyed by context, and the marginal
// used for the h0-dropout conditionals. Immutable after construction; all
// queries are const and safe for concurrent readers.
class WorldModel {
public:
    WorldModel() = default;

    static WorldModel train(std::span<const TrainingEpisode> buffer, const ModelParams& params);

    // Posterior over codes given context and observation:
    // p(z=k | h, x) proportional to exp(-MARE(x, image_k) / tau) * prior_h(k).
    CategoricalBelief represent(const RecurrentContext& h, const Observation& x) const;

    // Alpha-smoothed transition prior; unseen contexts fall back to uniform.
    CategoricalBelief prior(const RecurrentContext& h) const;

    // Context-dropout conditionals: the prior is replaced by the smoothed
    // marginal over codes.
    CategoricalBelief represent_h0(const Observation& x) const;
    CategoricalBelief prior_h0() const;

    // Belief-weighted mean image; a one-hot belief returns that code's
    // image exactly. The context argument mirrors the conditional's
    // signature; the tabular decoder does not use it.
    Observation decode(const RecurrentContext& h, const CategoricalBelief& belief) const;
    Observation decode_code(int code) const;

    int sample(const CategoricalBelief& belief, SplitMix64& rng) const;
    CategoricalBelief one_hot(int code) const;

    RecurrentContext recurrent_update(const RecurrentContext& h, int code, int action) const;

    // Bayesian surprise KL[represent(h,x) || prior(h)].
    double surprise(const RecurrentContext& h, const Observation& x) const;

    int code_count() const { return static_cast<int>(code_images_.size()); }
    const Observation& code_image(int code) const { return code_images_.at(code); }
    std::optional<int> exact_code(const Observation& x) const;
    std::int64_t marginal_count(int code) const { return marginal_.at(code); }
    std::int64_t total_steps() const { return marginal_total_; }
    std::int64_t transition_context_count() const { return static_cast<std::int64_t>(transitions_.size()); }
    const ModelParams& params() const { return params_; }
    int observation_width() const { return obs_width_; }
    int observation_height() const { return obs_height_; }

    void save(const std::string& path) const;
    static WorldModel load(const std::string& path);

    friend bool operator==(const WorldModel& a, const WorldModel& b);

private:
    struct TransitionRow {
        std::map<std::int32_t, std::int64_t> counts;
        std::int64_t total = 0;

        friend bool operator==(const TransitionRow&, const TransitionRow&) = default;
    };

    CategoricalBelief posterior_from(const std::vector<double>& log_prior, const Observation& x) const;
    std::vector<double> log_prior_vector(const RecurrentContext& h) const;
    std::vector<double> log_marginal_vector() const;
    const std::vector<double>& likelihood_exponents(const Observation& x) const;
    int find_or_add_code(const Observation& x);

    ModelParams params_;
    int obs_width_ = 0;
    int obs_height_ = 0;
    std::vector<Observation> code_images_;
    std::unordered_map<std::uint64_t, std::vector<int>> code_by_hash_;
    std::map<std::vector<std::int32_t>, TransitionRow> transitions_;
    std::vector<std::int64_t> marginal_;
    std::int64_t marginal_total_ = 0;

    // Memoized -MARE/tau rows per distinct frame. Guarded so concurrent
    // readers stay safe; derived data only, shared across copies.
    struct ExponentCache {
        std::mutex mutex;
        std::unordered_map<std::uint64_t, std::shared_ptr<const std::vector<double>>> rows;
    };
    std::shared_ptr<ExponentCache> cache_ = std::make_shared<ExponentCache>();
};

}  // namespace novelgrid::model
