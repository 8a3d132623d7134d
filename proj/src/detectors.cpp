#include "novelgrid/detectors.hpp"

#include <cmath>
#include <stdexcept>

#include "novelgrid/errors.hpp"

namespace novelgrid::detect {

std::string method_name(Method m) {
    switch (m) {
        case Method::CmtreTrained: return "cmtre-trained";
        case Method::CmtreRandom: return "cmtre-random";
        case Method::CmtreCombo: return "cmtre-combo";
        case Method::PpMare: return "pp-mare";
        case Method::Kl: return "kl";
        case Method::KlMd: return "kl-md";
        case Method::Cusum: return "cusum";
    }
    return "unknown";
}

Method method_from_name(const std::string& name) {
    for (int i = 0; i < kNumMethods; ++i)
        if (method_name(static_cast<Method>(i)) == name) return static_cast<Method>(i);
    throw std::invalid_argument("unknown detector method: " + name);
}

double mare(const Observation& a, const Observation& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mare: observation shape mismatch");
    double sum = 0.0;
    const std::size_t n = a.data.size();
    for (std::size_t i = 0; i < n; ++i) sum += std::abs(static_cast<double>(a.data[i]) - b.data[i]);
    return sum / static_cast<double>(n);
}

double kl_divergence(const CategoricalBelief& p, const CategoricalBelief& q) {
    if (!p.same_shape(q)) throw std::invalid_argument("kl_divergence: belief shape mismatch");
    double total = 0.0;
    for (std::size_t f = 0; f < p.factors.size(); ++f) {
        const auto& pf = p.factors[f];
        const auto& qf = q.factors[f];
        for (std::size_t i = 0; i < pf.size(); ++i) {
            if (pf[i] <= 0.0) continue;
            if (qf[i] <= 0.0) throw std::invalid_argument("kl_divergence: q has zero mass where p > 0");
            total += pf[i] * std::log(pf[i] / qf[i]);
        }
    }
    return total;
}

double cross_entropy(const CategoricalBelief& p, const CategoricalBelief& q) {
    if (!p.same_shape(q)) throw std::invalid_argument("cross_entropy: belief shape mismatch");
    double total = 0.0;
    for (std::size_t f = 0; f < p.factors.size(); ++f) {
        const auto& pf = p.factors[f];
        const auto& qf = q.factors[f];
        for (std::size_t i = 0; i < pf.size(); ++i) {
            if (pf[i] <= 0.0) continue;
            if (qf[i] <= 0.0) throw std::invalid_argument("cross_entropy: q has zero mass where p > 0");
            total -= pf[i] * std::log(qf[i]);
        }
    }
    return total;
}

namespace {

double mean_of(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Population convention (divisor n).
double stddev_of(std::span<const double> xs, double mean) {
    double s = 0.0;
    for (double x : xs) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(xs.size()));
}

double threshold_of(std::span<const double> xs) {
    const double m = mean_of(xs);
    return m + 0.5 * stddev_of(xs, m);
}

}  // namespace

MareThresholds cmtre_calibrate(std::span<const double> trained_mares, std::span<const double> random_mares) {
    if (trained_mares.size() < 2 || random_mares.size() < 2)
        throw CalibrationError("cmtre_calibrate: each sample set needs at least 2 elements");
    MareThresholds t;
    t.trained = threshold_of(trained_mares);
    t.random = threshold_of(random_mares);
    std::vector<double> pooled;
    pooled.reserve(trained_mares.size() + random_mares.size());
    pooled.insert(pooled.end(), trained_mares.begin(), trained_mares.end());
    pooled.insert(pooled.end(), random_mares.begin(), random_mares.end());
    t.combination = threshold_of(pooled);
    return t;
}

DetectorVerdict cmtre_detect(const Observation& x, const Observation& reconstruction, double threshold,
                             Method which, int step) {
    DetectorVerdict v;
    v.method = which;
    v.step = step;
    v.score = mare(x, reconstruction);
    v.threshold = threshold;
    v.flag = v.score > threshold;
    return v;
}

DetectorVerdict pp_mare_detect(const Observation& prior_recon, const Observation& posterior_recon,
                               double epsilon, int step) {
    DetectorVerdict v;
    v.method = Method::PpMare;
    v.step = step;
    v.score = mare(prior_recon, posterior_recon);
    v.threshold = epsilon;
    v.flag = v.score > epsilon;
    return v;
}

double mahalanobis(const CategoricalBelief& one_hot, const CategoricalBelief& belief, double variance_floor,
                   bool sqrt_form) {
    if (!one_hot.same_shape(belief)) throw std::invalid_argument("mahalanobis: shape mismatch");
    double total = 0.0;
    for (std::size_t f = 0; f < belief.factors.size(); ++f) {
        const auto& z = one_hot.factors[f];
        const auto& mu = belief.factors[f];
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const double var = std::max(mu[i] * (1.0 - mu[i]), variance_floor);
            const double d = z[i] - mu[i];
            total += d * d / var;
        }
    }
    return sqrt_form ? std::sqrt(total) : total;
}

DetectorVerdict kl_bound_verdict(double lhs, double rhs, int step) {
    DetectorVerdict v;
    v.method = Method::Kl;
    v.step = step;
    v.score = lhs;
    v.threshold = rhs;
    // A negative right side is immediately flagged.
    v.flag = rhs < 0.0 || lhs > rhs;
    return v;
}

DetectorVerdict kl_md_verdict(double lhs, double rhs, double distance, double lambda, int step) {
    DetectorVerdict v;
    v.method = Method::KlMd;
    v.step = step;
    v.score = lhs + lambda * distance;
    v.threshold = rhs;
    v.flag = rhs < 0.0 || v.score > rhs;
    return v;
}

double lambda_schedule(int step, const DetectorConfig& config) {
    return config.lambda0 * std::exp(-static_cast<double>(step) / config.lambda_decay);
}

CusumResult cusum_update(double stat, double score, double drift, double decision) {
    CusumResult r;
    r.stat = std::max(0.0, stat + score - drift);
    r.flag = r.stat > decision;
    return r;
}

}  // namespace novelgrid::detect
