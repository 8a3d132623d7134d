#include <doctest.h>

#include <cmath>
#include <vector>

#include "novelgrid/detectors.hpp"
#include "novelgrid/errors.hpp"
#include "novelgrid/rng.hpp"

using namespace novelgrid;
using namespace novelgrid::detect;

namespace {

Observation obs_of(std::vector<float> data) {
    Observation o;
    o.width = static_cast<int>(data.size());
    o.height = 1;
    std::vector<float> expanded;
    for (float v : data) {
        expanded.push_back(v);
        expanded.push_back(v);
        expanded.push_back(v);
    }
    o.data = std::move(expanded);
    return o;
}

Observation random_obs(SplitMix64& rng, int n) {
    Observation o;
    o.width = n;
    o.height = 1;
    for (int i = 0; i < n * 3; ++i) o.data.push_back(static_cast<float>(rng.next_double()));
    return o;
}

CategoricalBelief random_belief(SplitMix64& rng, int k) {
    std::vector<double> v(k);
    double sum = 0.0;
    for (double& x : v) {
        x = rng.next_double() + 1e-6;
        sum += x;
    }
    for (double& x : v) x /= sum;
    return CategoricalBelief::single(std::move(v));
}

}  // namespace

TEST_CASE("mare identity, extremal, and hand-computed values") {
    const Observation x = obs_of({0.25f, 0.5f, 0.75f, 1.0f});
    CHECK(mare(x, x) == 0.0);
    CHECK(mare(obs_of({0, 0, 0, 0}), obs_of({1, 1, 1, 1})) == 1.0);
    CHECK(mare(obs_of({0, 0, 1, 1}), obs_of({0, 1, 1, 0})) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("mare is a symmetric nonnegative metric component") {
    SplitMix64 rng(1);
    for (int i = 0; i < 200; ++i) {
        const Observation a = random_obs(rng, 16);
        const Observation b = random_obs(rng, 16);
        const Observation c = random_obs(rng, 16);
        CHECK(mare(a, b) == mare(b, a));
        CHECK(mare(a, b) >= 0.0);
        CHECK(mare(a, a) == 0.0);
        CHECK(mare(a, c) <= mare(a, b) + mare(b, c) + 1e-12);
    }
}

TEST_CASE("mare rejects shape mismatches") {
    CHECK_THROWS_AS(mare(obs_of({0, 1}), obs_of({0, 1, 0})), std::invalid_argument);
}

TEST_CASE("cmtre calibration arithmetic") {
    const std::vector<double> zeros{0, 0, 0, 0};
    CHECK(cmtre_calibrate(zeros, zeros).trained == 0.0);

    const std::vector<double> pair{1, 3};
    CHECK(cmtre_calibrate(pair, zeros).trained == doctest::Approx(2.5).epsilon(1e-12));

    const std::vector<double> low{0, 0}, high{2, 2};
    CHECK(cmtre_calibrate(low, high).combination == doctest::Approx(1.5).epsilon(1e-12));

    const std::vector<double> one{0.5};
    CHECK_THROWS_AS(cmtre_calibrate(one, zeros), CalibrationError);
}

TEST_CASE("cmtre verdict flags scores strictly above the threshold") {
    const Observation x = obs_of({0.2f, 0.4f});
    const auto clean = cmtre_detect(x, x, 0.1, Method::CmtreTrained, 3);
    CHECK_FALSE(clean.flag);
    CHECK(clean.score == 0.0);
    CHECK(clean.step == 3);

    const auto zero_threshold = cmtre_detect(x, x, 0.0, Method::CmtreRandom, 0);
    CHECK_FALSE(zero_threshold.flag);  // 0 > 0 is false

    const auto hot = cmtre_detect(x, obs_of({0.9f, 0.9f}), 0.1, Method::CmtreCombo, 0);
    CHECK(hot.flag);
}

TEST_CASE("kl divergence identities and hand values") {
    const auto p = CategoricalBelief::single({1.0, 0.0});
    const auto q = CategoricalBelief::single({0.5, 0.5});
    CHECK(kl_divergence(p, p) == 0.0);
    CHECK(kl_divergence(p, q) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    const auto a = CategoricalBelief::single({0.5, 0.5});
    const auto b = CategoricalBelief::single({0.25, 0.75});
    CHECK(kl_divergence(a, b) == doctest::Approx(0.14384103622589045).epsilon(1e-10));
}

TEST_CASE("kl divergence is nonnegative and zero only at equality") {
    SplitMix64 rng(2);
    for (int i = 0; i < 2000; ++i) {
        const auto p = random_belief(rng, 6);
        const auto q = random_belief(rng, 6);
        const double kl = kl_divergence(p, q);
        CHECK(kl >= 0.0);
        CHECK(kl_divergence(p, p) == 0.0);
    }
}

TEST_CASE("kl divergence contract violations") {
    const auto p = CategoricalBelief::single({0.5, 0.5});
    CHECK_THROWS_AS(kl_divergence(p, CategoricalBelief::single({1.0, 0.0, 0.0})), std::invalid_argument);
    CHECK_THROWS_AS(kl_divergence(p, CategoricalBelief::single({1.0, 0.0})), std::invalid_argument);
}

TEST_CASE("cross entropy equals kl plus entropy") {
    SplitMix64 rng(3);
    for (int i = 0; i < 100; ++i) {
        const auto p = random_belief(rng, 5);
        const auto q = random_belief(rng, 5);
        double entropy = 0.0;
        for (double v : p.factors[0]) entropy -= v * std::log(v);
        CHECK(cross_entropy(p, q) ==
              doctest::Approx(kl_divergence(p, q) + entropy).epsilon(1e-10));
    }
}

TEST_CASE("multi-factor beliefs sum across factors") {
    CategoricalBelief p, q;
    p.factors = {{1.0, 0.0}, {0.5, 0.5}};
    q.factors = {{0.5, 0.5}, {0.5, 0.5}};
    CHECK(kl_divergence(p, q) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("mahalanobis hand values and the variance floor") {
    const auto onehot = CategoricalBelief::single({1.0, 0.0});
    CHECK(mahalanobis(onehot, onehot) == 0.0);  // point at the mean, floor active

    const auto half = CategoricalBelief::single({0.5, 0.5});
    CHECK(mahalanobis(onehot, half) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(mahalanobis(onehot, half, 1e-6, true) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("mahalanobis grows as belief mass on the sample shrinks") {
    const auto z = CategoricalBelief::single({1.0, 0.0});
    double previous = -1.0;
    for (double mu = 0.95; mu >= 0.05; mu -= 0.05) {
        const double d = mahalanobis(z, CategoricalBelief::single({mu, 1.0 - mu}));
        CHECK(d > previous);
        previous = d;
    }
}

TEST_CASE("mahalanobis accepts factored one-hots") {
    CategoricalBelief z, mu;
    z.factors = {{1.0, 0.0}, {0.0, 1.0}};
    mu.factors = {{0.5, 0.5}, {0.5, 0.5}};
    CHECK(mahalanobis(z, mu) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("kl bound verdict rules") {
    const auto ok = kl_bound_verdict(0.0, 1.5, 2);
    CHECK_FALSE(ok.flag);
    CHECK(ok.score == 0.0);
    CHECK(ok.threshold == 1.5);

    CHECK(kl_bound_verdict(2.0, 1.5, 0).flag);
    // Negative right side flags no matter the score.
    CHECK(kl_bound_verdict(0.0, -0.25, 0).flag);
}

TEST_CASE("bound rearrangement identity holds for random belief tuples") {
    SplitMix64 rng(4);
    for (int i = 0; i < 2000; ++i) {
        const auto post = random_belief(rng, 5);
        const auto prior_h0 = random_belief(rng, 5);
        const auto rep_h0 = random_belief(rng, 5);
        const double lhs = kl_divergence(post, random_belief(rng, 5));
        const double a = kl_divergence(post, prior_h0);
        const double b = kl_divergence(post, rep_h0);
        const double direct = lhs - (a - b);
        const double rearranged = (lhs + b) - a;
        CHECK(std::abs(direct - rearranged) <= 1e-12 * std::max(1.0, std::abs(a) + std::abs(b)));
    }
}

TEST_CASE("lambda schedule decays from one") {
    DetectorConfig config;
    CHECK(lambda_schedule(0, config) == 1.0);
    CHECK(lambda_schedule(10, config) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(lambda_schedule(500, config) < 1e-20);
}

TEST_CASE("kl flag implies kl+md flag on identical inputs") {
    SplitMix64 rng(5);
    DetectorConfig config;
    for (int i = 0; i < 2000; ++i) {
        const double lhs = rng.next_double() * 4.0;
        const double rhs = rng.next_double() * 4.0 - 1.0;
        const double dist = rng.next_double() * 3.0;
        const int step = static_cast<int>(rng.next_below(40));
        const auto kl = kl_bound_verdict(lhs, rhs, step);
        const auto md = kl_md_verdict(lhs, rhs, dist, lambda_schedule(step, config), step);
        if (kl.flag) CHECK(md.flag);
        CHECK(md.score >= kl.score);
        CHECK(md.threshold == kl.threshold);
    }
}

TEST_CASE("kl+md with a near-zero distance matches the kl verdict") {
    const auto kl = kl_bound_verdict(0.4, 1.0, 3);
    const auto md = kl_md_verdict(0.4, 1.0, 1e-15, 1.0, 3);
    CHECK(md.flag == kl.flag);
    CHECK(md.score == doctest::Approx(kl.score).epsilon(1e-12));
}

TEST_CASE("cusum recurrence") {
    double stat = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto r = cusum_update(stat, 0.5, 1.0, 5.0);
        CHECK(r.stat == 0.0);
        CHECK_FALSE(r.flag);
        stat = r.stat;
    }

    // score = drift + 1 each step with decision 5: first flag at step 5.
    stat = 0.0;
    int first_flag = -1;
    for (int step = 0; step < 20; ++step) {
        const auto r = cusum_update(stat, 2.0, 1.0, 5.0);
        stat = r.stat;
        if (r.flag) {
            first_flag = step;
            break;
        }
    }
    CHECK(first_flag == 5);
}

TEST_CASE("raising thresholds never creates flags") {
    SplitMix64 rng(6);
    for (int i = 0; i < 500; ++i) {
        const double score = rng.next_double();
        const double low = rng.next_double();
        const double high = low + rng.next_double();
        const Observation a = random_obs(rng, 4);
        const Observation b = random_obs(rng, 4);
        const auto pa = pp_mare_detect(a, b, low, 0);
        const auto pb = pp_mare_detect(a, b, high, 0);
        if (pb.flag) CHECK(pa.flag);
        const auto ca = cusum_update(0.0, score, 0.0, low);
        const auto cb = cusum_update(0.0, score, 0.0, high);
        if (cb.flag) CHECK(ca.flag);
    }
}

TEST_CASE("method names round trip") {
    for (int i = 0; i < kNumMethods; ++i) {
        const Method m = static_cast<Method>(i);
        CHECK(method_from_name(method_name(m)) == m);
    }
    CHECK_THROWS_AS(method_from_name("nope"), std::invalid_argument);
}
