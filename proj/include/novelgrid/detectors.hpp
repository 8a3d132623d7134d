#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "novelgrid/observation.hpp"
#include "novelgrid/rng.hpp"

namespace novelgrid::detect {

// Probability vector(s) over latent codes. One factor by default; the
// kernels accept any factor count.
struct CategoricalBelief {
    std::vector<std::vector<double>> factors;

    static CategoricalBelief single(std::vector<double> probs) {
        CategoricalBelief b;
        b.factors.push_back(std::move(probs));
        return b;
    }
    bool same_shape(const CategoricalBelief& other) const {
        if (factors.size() != other.factors.size()) return false;
        for (std::size_t f = 0; f < factors.size(); ++f)
            if (factors[f].size() != other.factors[f].size()) return false;
        return true;
    }
};

enum class Method : int {
    CmtreTrained = 0,
    CmtreRandom = 1,
    CmtreCombo = 2,
    PpMare = 3,
    Kl = 4,
    KlMd = 5,
    Cusum = 6,
};
inline constexpr int kNumMethods = 7;
std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct DetectorVerdict {
    Method method = Method::Kl;
    double score = 0.0;
    double threshold = 0.0;
    bool flag = false;
    int step = 0;
};

struct MareThresholds {
    double trained = 0.0;
    double random = 0.0;
    double combination = 0.0;
};

struct DetectorConfig {
    // PP-MARE epsilon on the raw 0..255 pixel scale; runtime comparisons use
    // epsilon_raw / 255 against unit-interval images.
    double pp_epsilon_raw = 1.0;
    bool pp_mean_decode = false;  // decode the full belief instead of a sample
    double lambda0 = 1.0;         // KL+MD relaxation schedule lambda(t) = lambda0 * exp(-t/decay)
    double lambda_decay = 10.0;
    double cusum_drift = 0.0;
    double cusum_decision = 0.0;
    double md_variance_floor = 1e-6;
    bool md_sqrt_form = false;  // report sqrt of the quadratic form instead of the squared sum
};

// Mean absolute reconstruction error: sum_i |a_i - b_i| / N.
double mare(const Observation& a, const Observation& b);

// KL[p || q] = sum_z p log(p/q), summed across factors. q must be strictly
// positive wherever p is.
double kl_divergence(const CategoricalBelief& p, const CategoricalBelief& q);

// Cross entropy H(p, q) = -sum_z p log q (diagnostic only).
double cross_entropy(const CategoricalBelief& p, const CategoricalBelief& q);

// Each threshold is mean + 0.5 * population stddev of the sample set; the
// combination pools both sets with equal element weight.
MareThresholds cmtre_calibrate(std::span<const double> trained_mares, std::span<const double> random_mares);

DetectorVerdict cmtre_detect(const Observation& x, const Observation& reconstruction, double threshold,
                             Method which, int step);

DetectorVerdict pp_mare_detect(const Observation& prior_recon, const Observation& posterior_recon,
                               double epsilon, int step);

// Squared Mahalanobis distance from a one-hot sample to a categorical
// belief under the diagonal pseudo-inverse, with a variance floor for the
// near-degenerate dimensions. sqrt_form switches to the rooted quadratic.
double mahalanobis(const CategoricalBelief& one_hot, const CategoricalBelief& belief,
                   double variance_floor = 1e-6, bool sqrt_form = false);

// Dynamic KL bound: lhs = KL[post || prior], rhs = KL[post || prior_h0] -
// KL[post || represent_h0]. Flags when rhs < 0 or lhs > rhs.
DetectorVerdict kl_bound_verdict(double lhs, double rhs, int step);

// KL bound plus the lambda-weighted Mahalanobis term on the score side.
DetectorVerdict kl_md_verdict(double lhs, double rhs, double distance, double lambda, int step);

double lambda_schedule(int step, const DetectorConfig& config);

struct CusumResult {
    double stat = 0.0;
    bool flag = false;
};

// stat' = max(0, stat + score - drift); flag when stat' > decision.
// Resetting after a flag is the caller's responsibility.
CusumResult cusum_update(double stat, double score, double drift, double decision);

}  // namespace novelgrid::detect
