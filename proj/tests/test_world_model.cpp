#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "novelgrid/detectors.hpp"
#include "novelgrid/errors.hpp"
#include "novelgrid/harness.hpp"
#include "novelgrid/world_model.hpp"

using namespace novelgrid;
using namespace novelgrid::model;
using detect::CategoricalBelief;
using detect::kl_divergence;
using harness::PolicyKind;

namespace {

Observation flat_obs(float value, int n = 4) {
    Observation o;
    o.width = n;
    o.height = 1;
    o.data.assign(static_cast<std::size_t>(n) * 3, value);
    return o;
}

TrainingEpisode episode(std::vector<Observation> obs, std::vector<int> actions) {
    return TrainingEpisode{std::move(obs), std::move(actions)};
}

int argmax_of(const CategoricalBelief& b) {
    const auto& v = b.factors[0];
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Small real corpus for model-level properties.
WorldModel nominal_model(std::int64_t random_steps = 6000, ModelParams params = {}) {
    harness::ReplayBuffer buffer =
        harness::collect_steps(grid::Variant::Nominal, PolicyKind::Scripted, 200, 42, {});
    harness::ReplayBuffer random =
        harness::collect_steps(grid::Variant::Nominal, PolicyKind::Random, random_steps, 42, {});
    for (const auto* t : random.all()) buffer.add(*t);
    const auto eps = harness::to_training_episodes(buffer);
    return WorldModel::train(eps, params);
}

void check_valid_belief(const CategoricalBelief& b) {
    double sum = 0.0;
    for (double p : b.factors[0]) {
        CHECK(p > 0.0);
        CHECK(p <= 1.0);
        CHECK(std::isfinite(p));
        sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

}  // namespace

TEST_CASE("degenerate corpus: one repeated frame gives a single certain code") {
    const Observation x = flat_obs(0.5f);
    const TrainingEpisode ep = episode({x, x, x}, {0, 0});
    const WorldModel m = WorldModel::train(std::vector<TrainingEpisode>{ep}, {});
    CHECK(m.code_count() == 1);
    const auto prior = m.prior(m.recurrent_update(RecurrentContext::null_context(), 0, 0));
    CHECK(prior.factors[0][0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("two-frame alternating corpus learns the deterministic succession") {
    const Observation a = flat_obs(0.0f);
    const Observation b = flat_obs(1.0f);
    std::vector<Observation> obs;
    std::vector<int> actions;
    for (int i = 0; i < 20; ++i) {
        obs.push_back(i % 2 == 0 ? a : b);
        if (i < 19) actions.push_back(2);
    }
    const WorldModel m = WorldModel::train(std::vector<TrainingEpisode>{episode(obs, actions)}, {});
    REQUIRE(m.code_count() == 2);
    const auto h_after_a = m.recurrent_update(RecurrentContext::null_context(), 0, 2);
    const auto prior = m.prior(h_after_a);
    CHECK(argmax_of(prior) == 1);
    CHECK(prior.factors[0][1] > 0.99);
}

TEST_CASE("laplace smoothing arithmetic on a 30/10 context") {
    const Observation a = flat_obs(0.0f);
    const Observation b = flat_obs(1.0f);
    std::vector<TrainingEpisode> eps;
    for (int i = 0; i < 30; ++i) eps.push_back(episode({a, a}, {0}));
    for (int i = 0; i < 10; ++i) eps.push_back(episode({a, b}, {0}));
    ModelParams params;
    params.alpha = 1.0;
    const WorldModel m = WorldModel::train(eps, params);
    REQUIRE(m.code_count() == 2);
    const auto h = m.recurrent_update(RecurrentContext::null_context(), 0, 0);
    const auto prior = m.prior(h);
    CHECK(prior.factors[0][0] == doctest::Approx(31.0 / 42.0).epsilon(1e-12));
    CHECK(prior.factors[0][1] == doctest::Approx(11.0 / 42.0).epsilon(1e-12));
}

TEST_CASE("represent concentrates on an exact match under a near-zero alpha") {
    const Observation a = flat_obs(0.0f);
    const Observation b = flat_obs(1.0f);
    ModelParams params;
    params.alpha = 1e-6;
    const WorldModel m =
        WorldModel::train(std::vector<TrainingEpisode>{episode({a, b, a, b}, {0, 0, 0})}, params);
    const auto belief = m.represent_h0(b);  // marginal is near uniform here
    CHECK(argmax_of(belief) == 1);
    CHECK(belief.factors[0][1] > 0.999);
}

TEST_CASE("represent treats equidistant codes symmetrically") {
    const Observation a = flat_obs(0.0f);
    const Observation b = flat_obs(1.0f);
    const WorldModel m = WorldModel::train(std::vector<TrainingEpisode>{episode({a, b, a, b}, {0, 0, 0})}, {});
    const auto belief = m.represent_h0(flat_obs(0.5f));
    CHECK(belief.factors[0][0] == doctest::Approx(belief.factors[0][1]).epsilon(1e-12));
}

TEST_CASE("an out-of-codebook frame falls back to the prior's shape") {
    // Two codes at equal MARE from the query: likelihood weights cancel and
    // the posterior reproduces the context prior exactly. With unequal
    // distances the posterior matches the hand-computed reweighting.
    const Observation a = flat_obs(0.0f);
    const Observation b = flat_obs(1.0f);
    std::vector<TrainingEpisode> eps;
    for (int i = 0; i < 3; ++i) eps.push_back(episode({a, a}, {0}));
    eps.push_back(episode({a, b}, {0}));
    ModelParams params;
    params.tau = 0.25;  // soft enough that both weights stay in range
    const WorldModel m = WorldModel::train(eps, params);
    const auto h = m.recurrent_update(RecurrentContext::null_context(), 0, 0);
    const auto prior = m.prior(h);

    const auto gray = m.represent(h, flat_obs(0.5f));
    CHECK(gray.factors[0][0] == doctest::Approx(prior.factors[0][0]).epsilon(1e-12));
    CHECK(gray.factors[0][1] == doctest::Approx(prior.factors[0][1]).epsilon(1e-12));

    const Observation skewed = flat_obs(0.25f);  // MARE 0.25 to a, 0.75 to b
    const auto belief = m.represent(h, skewed);
    const double w0 = std::exp(-0.25 / params.tau) * prior.factors[0][0];
    const double w1 = std::exp(-0.75 / params.tau) * prior.factors[0][1];
    CHECK(belief.factors[0][0] == doctest::Approx(w0 / (w0 + w1)).epsilon(1e-9));
    CHECK(belief.factors[0][1] == doctest::Approx(w1 / (w0 + w1)).epsilon(1e-9));
}

TEST_CASE("unseen contexts fall back to a uniform prior") {
    const Observation a = flat_obs(0.0f);
    const Observation b = flat_obs(1.0f);
    const WorldModel m = WorldModel::train(std::vector<TrainingEpisode>{episode({a, b, a}, {2, 2})}, {});
    // Action 5 never occurs in the corpus, so this context has no counts.
    const auto h = m.recurrent_update(RecurrentContext::null_context(), 1, 5);
    const auto prior = m.prior(h);
    for (double p : prior.factors[0]) CHECK(p == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("prior_h0 recovers the code frequency histogram as alpha vanishes") {
    harness::ReplayBuffer buffer =
        harness::collect_steps(grid::Variant::Nominal, PolicyKind::Random, 800, 9, {});
    const auto eps = harness::to_training_episodes(buffer);
    ModelParams params;
    params.alpha = 1e-12;
    const WorldModel m = WorldModel::train(eps, params);

    // Independent recount of the corpus.
    std::map<int, std::int64_t> counts;
    std::int64_t total = 0;
    for (const auto& ep : eps)
        for (const auto& x : ep.observations) {
            counts[*m.exact_code(x)] += 1;
            ++total;
        }
    const auto h0 = m.prior_h0();
    for (const auto& [code, count] : counts)
        CHECK(h0.factors[0][code] ==
              doctest::Approx(static_cast<double>(count) / total).epsilon(1e-9));
}

TEST_CASE("decode returns exact and averaged code images") {
    const Observation a = flat_obs(0.0f);
    const Observation b = flat_obs(1.0f);
    const WorldModel m = WorldModel::train(std::vector<TrainingEpisode>{episode({a, b}, {0})}, {});
    CHECK(m.decode(RecurrentContext::null_context(), m.one_hot(0)) == a);
    CHECK(m.decode(RecurrentContext::null_context(), m.one_hot(1)) == b);

    const auto mixed = m.decode(RecurrentContext::null_context(), CategoricalBelief::single({0.5, 0.5}));
    for (float p : mixed.data) CHECK(p == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("decode and represent round trip every code") {
    const WorldModel m = nominal_model(4000);
    for (int k = 0; k < m.code_count(); ++k) {
        const auto belief = m.represent_h0(m.decode(RecurrentContext::null_context(), m.one_hot(k)));
        CHECK(argmax_of(belief) == k);
    }
}

TEST_CASE("recurrent context window") {
    const WorldModel m = nominal_model(600);
    const RecurrentContext h0 = RecurrentContext::null_context();
    CHECK(h0.is_null);

    const auto h1 = m.recurrent_update(h0, 4, 2);
    CHECK_FALSE(h1.is_null);
    REQUIRE(h1.history.size() == 1);
    CHECK(h1.history[0].first == 4);
    CHECK(h1.history[0].second == 2);

    // L = 1 evicts the older pair.
    const auto h2 = m.recurrent_update(h1, 9, 1);
    REQUIRE(h2.history.size() == 1);
    CHECK(h2.history[0].first == 9);

    CHECK(h2 == m.recurrent_update(h0, 9, 1));
    CHECK_FALSE(h1 == h2);

    ModelParams deep;
    deep.context_length = 3;
    const Observation a = flat_obs(0.0f);
    const WorldModel m3 = WorldModel::train(
        std::vector<TrainingEpisode>{episode({a, a, a, a, a}, {0, 1, 2, 3})}, deep);
    auto h = RecurrentContext::null_context();
    for (int i = 0; i < 5; ++i) h = m3.recurrent_update(h, 0, i);
    REQUIRE(h.history.size() == 3);
    CHECK(h.history[0].second == 2);
    CHECK(h.history[2].second == 4);
}

TEST_CASE("sampling follows the belief") {
    const WorldModel m = nominal_model(600);
    SplitMix64 rng(5);
    for (int i = 0; i < 50; ++i) CHECK(m.sample(m.one_hot(3), rng) == 3);

    CategoricalBelief half = CategoricalBelief::single({0.5, 0.5});
    int ones = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) ones += m.sample(half, rng);
    const double freq = static_cast<double>(ones) / draws;
    CHECK(freq >= 0.47);
    CHECK(freq <= 0.53);

    SplitMix64 r1(77), r2(77);
    for (int i = 0; i < 50; ++i) CHECK(m.sample(half, r1) == m.sample(half, r2));
}

TEST_CASE("every returned belief is a valid distribution") {
    const WorldModel m = nominal_model(2500);
    SplitMix64 rng(13);
    check_valid_belief(m.prior_h0());
    harness::ReplayBuffer held = harness::collect_steps(grid::Variant::Nominal, PolicyKind::Random, 120, 3, {});
    for (const auto* t : held.all()) {
        RecurrentContext h = RecurrentContext::null_context();
        for (std::size_t i = 0; i < t->steps.size(); ++i) {
            const auto post = m.represent(h, t->observations[i]);
            check_valid_belief(post);
            check_valid_belief(m.prior(h));
            check_valid_belief(m.represent_h0(t->observations[i]));
            if (t->steps[i].action >= 0)
                h = m.recurrent_update(h, m.sample(post, rng), t->steps[i].action);
        }
    }
    // Novel frames keep validity too.
    Observation gray;
    gray.width = m.observation_width();
    gray.height = m.observation_height();
    gray.data.assign(static_cast<std::size_t>(gray.width) * gray.height * 3, 0.123f);
    check_valid_belief(m.represent_h0(gray));
}

TEST_CASE("surprise is the divergence from prior to posterior") {
    const WorldModel m = nominal_model(1200);
    harness::ReplayBuffer held = harness::collect_steps(grid::Variant::Nominal, PolicyKind::Random, 40, 3, {});
    for (const auto* t : held.all()) {
        RecurrentContext h = RecurrentContext::null_context();
        for (std::size_t i = 0; i < t->steps.size(); ++i) {
            const auto& x = t->observations[i];
            CHECK(m.surprise(h, x) ==
                  detect::kl_divergence(m.represent(h, x), m.prior(h)));
            const auto post = m.represent(h, x);
            if (t->steps[i].action >= 0) h = m.recurrent_update(h, argmax_of(post), t->steps[i].action);
        }
    }
}

TEST_CASE("training is deterministic") {
    const WorldModel a = nominal_model(1200);
    const WorldModel b = nominal_model(1200);
    CHECK(a == b);
}

TEST_CASE("checkpoint round trips exactly") {
    const WorldModel m = nominal_model(1500);
    const auto path = std::filesystem::temp_directory_path() / "novelgrid_model_test.ckpt";
    m.save(path.string());
    const WorldModel loaded = WorldModel::load(path.string());
    CHECK(m == loaded);

    // Queries agree bit-for-bit with the in-memory model.
    harness::ReplayBuffer held = harness::collect_steps(grid::Variant::Nominal, PolicyKind::Random, 60, 31, {});
    for (const auto* t : held.all()) {
        RecurrentContext h = RecurrentContext::null_context();
        for (std::size_t i = 0; i < t->steps.size(); ++i) {
            const auto pa = m.represent(h, t->observations[i]);
            const auto pb = loaded.represent(h, t->observations[i]);
            CHECK(pa.factors == pb.factors);
            if (t->steps[i].action >= 0) h = m.recurrent_update(h, argmax_of(pa), t->steps[i].action);
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("empty buffer is a calibration error") {
    CHECK_THROWS_AS(WorldModel::train(std::vector<TrainingEpisode>{}, {}), CalibrationError);
}

TEST_CASE("mismatched observation shapes are rejected") {
    const TrainingEpisode ep = episode({flat_obs(0.0f, 4), flat_obs(0.0f, 5)}, {0});
    CHECK_THROWS_AS(WorldModel::train(std::vector<TrainingEpisode>{ep}, {}), std::invalid_argument);
}

TEST_CASE("held-out nominal surprise stays within the training distribution") {
    const WorldModel m = nominal_model(45000);
    harness::ReplayBuffer train_like =
        harness::collect_steps(grid::Variant::Nominal, PolicyKind::Random, 45000, 42, {});
    harness::ReplayBuffer held =
        harness::collect_steps(grid::Variant::Nominal, PolicyKind::Random, 1500, 1234, {});

    auto train_ptrs = train_like.all();
    auto held_ptrs = held.all();
    std::vector<double> train_surprise = harness::surprise_stream(m, train_ptrs);
    std::vector<double> held_surprise = harness::surprise_stream(m, held_ptrs);

    std::sort(train_surprise.begin(), train_surprise.end());
    const double p99 = train_surprise[static_cast<std::size_t>(0.99 * (train_surprise.size() - 1))];
    double mean = 0.0;
    for (double s : held_surprise) mean += s;
    mean /= static_cast<double>(held_surprise.size());
    CHECK(mean <= p99);
}

TEST_CASE("broken door separates prior and posterior reconstructions at the door tile") {
    const WorldModel m = nominal_model(4000);
    harness::DetectorSuite suite;
    suite.methods = harness::all_methods();
    harness::ReplayBuffer cal =
        harness::collect_steps(grid::Variant::Nominal, PolicyKind::Scripted, 50, 42, {});
    harness::ReplayBuffer cal_r =
        harness::collect_steps(grid::Variant::Nominal, PolicyKind::Random, 400, 42, {});
    for (const auto* t : cal_r.all()) cal.add(*t);
    suite = harness::calibrate_suite(m, cal, {}, harness::all_methods());

    // Drive the broken-door episode to just past the first failed toggle.
    grid::Environment env(grid::Variant::BrokenDoor, 7);
    RecurrentContext h = RecurrentContext::null_context();
    SplitMix64 rng(3);
    Observation x = env.observe();
    for (int t = 0; env.rule_fire_steps().empty(); ++t) {
        const auto post = m.represent(h, x);
        const int z = m.sample(post, rng);
        const grid::Action a = grid::scripted_policy(env.state());
        env.step(a);
        h = m.recurrent_update(h, z, static_cast<int>(a));
        x = env.observe();
    }

    const auto prior = m.prior(h);
    const auto post = m.represent(h, x);
    const Observation prior_recon = m.decode_code(argmax_of(prior));
    const Observation post_recon = m.decode_code(argmax_of(post));
    REQUIRE_FALSE(prior_recon == post_recon);

    // Every differing pixel lies inside the door tile (cell 3,3 at tile 8).
    for (int y = 0; y < prior_recon.height; ++y)
        for (int xpx = 0; xpx < prior_recon.width; ++xpx)
            for (int c = 0; c < 3; ++c)
                if (prior_recon.at(xpx, y, c) != post_recon.at(xpx, y, c)) {
                    CHECK(xpx >= 3 * 8);
                    CHECK(xpx < 4 * 8);
                    CHECK(y >= 3 * 8);
                    CHECK(y < 4 * 8);
                }
}
