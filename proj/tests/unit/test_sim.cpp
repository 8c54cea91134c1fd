#include <doctest.h>

#include <cmath>

#include "conserva/errors.hpp"
#include "conserva/rng.hpp"
#include "conserva/sim.hpp"
#include "../support/oracles.hpp"

using namespace conserva;

namespace {

RatePolicy exclusion_unit_rate() {
    ModelPreset preset;
    preset.kind = PresetKind::exclusion;
    preset.base = PairKernel::constant(1.0);
    return make_preset(preset);
}

} // namespace

TEST_SUITE("sim") {

TEST_CASE("initial sampling matches Bernoulli moments") {
    InitialProfile profile{HarmonicFn::constant(0.5), Capacity::finite(1)};
    const int n = 100000;
    const Configuration cfg = sample_initial(profile, n, 99);
    const double mean = double(cfg.total) / n;
    CHECK(std::abs(mean - 0.5) < 4.0 * std::sqrt(0.25 / n));
}

TEST_CASE("initial sampling matches Poisson moments") {
    InitialProfile profile{HarmonicFn::constant(2.0), Capacity::infinite()};
    const int n = 100000;
    const Configuration cfg = sample_initial(profile, n, 7);
    double sum = 0, sq = 0;
    for (auto c : cfg.counts) {
        sum += c;
        sq += double(c) * c;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean - 2.0) < 5.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(var - 2.0) < 5.0 * std::sqrt(10.0 / n));
}

TEST_CASE("expected total equals the psi sum") {
    InitialProfile profile{HarmonicFn(0.5, {{1, 0.25, 0.0}}), Capacity::finite(1)};
    const int n = 64;
    double psi_sum = 0.0;
    for (int i = 0; i < n; ++i) psi_sum += profile.psi(double(i + 1) / n);
    const int reps = 20000;
    double total = 0.0;
    for (int r = 0; r < reps; ++r) {
        total += double(sample_initial(profile, n, 1000 + r).total);
    }
    // Bernoulli sum variance is at most n/4.
    CHECK(std::abs(total / reps - psi_sum) < 5.0 * std::sqrt(n / 4.0 / reps));
}

TEST_CASE("psi outside the admissible range is rejected") {
    InitialProfile profile{HarmonicFn::constant(1.5), Capacity::finite(1)};
    CHECK_THROWS_AS(sample_initial(profile, 16, 1), validation_error);
    InitialProfile negative{HarmonicFn::constant(-0.5), Capacity::infinite()};
    CHECK_THROWS_AS(sample_initial(negative, 16, 1), validation_error);
}

TEST_CASE("all-zero policy freezes the configuration") {
    RatePolicy zero("zero", Capacity::finite(2), [](int, int, double, double) { return 0.0; });
    Configuration cfg = Configuration::from_counts({2, 0, 1, 2});
    const std::vector<double> obs = {0.0, 0.5, 1.0};
    const Trajectory traj = simulate(cfg, zero, 1.0, obs, 5);
    REQUIRE(traj.snapshots.size() == 3);
    for (const auto& snap : traj.snapshots) CHECK(snap.counts == cfg.counts);
    CHECK(traj.accepted_count == 0);
}

TEST_CASE("two-site exclusion matches the master equation law") {
    // eta_0 = (1, 0), unit rates, t = 0.5. The two reachable states form a
    // symmetric two-state chain with rate 1/2 each way, so
    // P(eta_t(1) = 1) = (1 + exp(-t)) / 2.
    const RatePolicy policy = exclusion_unit_rate();
    const double t = 0.5;
    const double analytic = 0.5 * (1.0 + std::exp(-t));

    test::MasterEquation oracle(policy, 2, 1);
    std::vector<double> init(oracle.state_count(), 0.0);
    init[oracle.state_index(std::vector<std::int32_t>{1, 0})] = 1.0;
    const std::vector<double> law = oracle.law_at(init, t);
    const double expected = oracle.marginal(law, 0, 1);
    CHECK(expected == doctest::Approx(analytic).epsilon(1e-9));

    const Configuration cfg = Configuration::from_counts({1, 0});
    const std::vector<double> obs = {t};
    const int reps = 100000;
    int hits = 0;
    for (int r = 0; r < reps; ++r) {
        const Trajectory traj = simulate(cfg, policy, t, obs, replica_dynamics_seed(321, r));
        if (traj.snapshots[0].counts[0] == 1) ++hits;
    }
    const double p_hat = double(hits) / reps;
    const double se = std::sqrt(expected * (1.0 - expected) / reps);
    CHECK(std::abs(p_hat - expected) < 5.0 * se);
}

TEST_CASE("independent-particle dynamics matches the semigroup oracle") {
    // Ehrenfest on three sites: counts stay Poisson with the semigroup mean.
    ModelPreset preset;
    preset.kind = PresetKind::ehrenfest;
    preset.base = PairKernel::constant(1.0);
    const RatePolicy policy = make_preset(preset);

    const HarmonicFn psi(1.5, {{1, 0.5, 0.0}});
    const InitialProfile profile{psi, Capacity::infinite()};
    const int n = 3;
    const double t = 0.7;
    const std::vector<double> means = test::independent_particle_means(preset.base, psi, n, t);

    const std::vector<double> obs = {t};
    const int reps = 60000;
    std::vector<double> sum(n, 0.0), sq(n, 0.0);
    for (int r = 0; r < reps; ++r) {
        const Configuration init = sample_initial(profile, n, replica_init_seed(17, r));
        const Trajectory traj =
            simulate(init, policy, t, obs, replica_dynamics_seed(17, r));
        for (int i = 0; i < n; ++i) {
            const double c = traj.snapshots[0].counts[i];
            sum[i] += c;
            sq[i] += c * c;
        }
    }
    for (int i = 0; i < n; ++i) {
        const double mean = sum[i] / reps;
        const double var = sq[i] / reps - mean * mean;
        const double se = std::sqrt(means[i] / reps);
        CHECK(std::abs(mean - means[i]) < 5.0 * se);
        // Poisson marginals: variance equals the mean.
        CHECK(std::abs(var - means[i]) < 6.0 * std::sqrt(3.0 * means[i] * means[i] / reps +
                                                         means[i] / reps));
    }
}

TEST_CASE("conservation and occupancy bounds hold along trajectories") {
    ModelPreset preset;
    preset.kind = PresetKind::generalized_exclusion;
    preset.capacity = 2;
    preset.base = PairKernel::constant(1.0);
    const RatePolicy policy = make_preset(preset);
    InitialProfile profile{HarmonicFn::constant(1.0), Capacity::finite(2)};

    SimOptions opts;
    opts.audit_conservation = true;
    const std::vector<double> obs = {0.25, 0.5, 1.0};
    const ReplicaEnsemble ens = run_replicas(profile, policy, 64, 1.0, obs, 50, 404, opts);
    for (const auto& traj : ens.replicas) {
        const std::int64_t total = traj.snapshots.front().total;
        for (const auto& snap : traj.snapshots) {
            CHECK(snap.recompute_total() == total);
            for (auto c : snap.counts) {
                CHECK(c >= 0);
                CHECK(c <= 2);
            }
        }
        CHECK(traj.audited_events == traj.accepted_count);
    }
}

TEST_CASE("replica ensembles are deterministic and scheduling independent") {
    const RatePolicy policy = exclusion_unit_rate();
    InitialProfile profile{HarmonicFn::constant(0.5), Capacity::finite(1)};
    const std::vector<double> obs = {0.5, 1.0};
    const ReplicaEnsemble a = run_replicas(profile, policy, 32, 1.0, obs, 24, 777, {},
                                           ExecMode::parallel);
    const ReplicaEnsemble b = run_replicas(profile, policy, 32, 1.0, obs, 24, 777, {},
                                           ExecMode::serial);
    REQUIRE(a.replicas.size() == b.replicas.size());
    for (std::size_t r = 0; r < a.replicas.size(); ++r) {
        REQUIRE(a.replicas[r].snapshots.size() == b.replicas[r].snapshots.size());
        for (std::size_t s = 0; s < a.replicas[r].snapshots.size(); ++s) {
            CHECK(a.replicas[r].snapshots[s].counts == b.replicas[r].snapshots[s].counts);
        }
    }
}

TEST_CASE("a single replica reproduces simulate with the derived seeds") {
    const RatePolicy policy = exclusion_unit_rate();
    InitialProfile profile{HarmonicFn::constant(0.5), Capacity::finite(1)};
    const std::vector<double> obs = {1.0};
    const ReplicaEnsemble ens = run_replicas(profile, policy, 16, 1.0, obs, 1, 2718);

    const Configuration init = sample_initial(profile, 16, replica_init_seed(2718, 0));
    const Trajectory direct = simulate(init, policy, 1.0, obs, replica_dynamics_seed(2718, 0));
    CHECK(ens.replicas[0].snapshots[0].counts == direct.snapshots[0].counts);
    CHECK(ens.replicas[0].candidate_count == direct.candidate_count);
}

TEST_CASE("exclusion smoke run conserves every replica total") {
    PairKernel phi(1.0);
    phi.add_diff({1, 0.0, 0.5});
    ModelPreset preset;
    preset.kind = PresetKind::exclusion;
    preset.base = phi;
    const RatePolicy policy = make_preset(preset);
    InitialProfile profile{HarmonicFn(0.5, {{1, 0.25, 0.0}}), Capacity::finite(1)};
    const std::vector<double> obs = {0.0, 1.0};
    const ReplicaEnsemble ens = run_replicas(profile, policy, 64, 1.0, obs, 200, 31337);
    REQUIRE(ens.replicas.size() == 200);
    for (const auto& traj : ens.replicas) {
        CHECK(traj.snapshots[0].total == traj.snapshots[1].total);
        CHECK(traj.snapshots[1].recompute_total() == traj.snapshots[1].total);
    }
}

TEST_CASE("recorded event logs replay to the final state") {
    PairKernel phi(1.0);
    phi.add_diff({1, 0.0, 0.5});
    ModelPreset preset;
    preset.kind = PresetKind::exclusion;
    preset.base = phi;
    const RatePolicy policy = make_preset(preset);
    InitialProfile profile{HarmonicFn::constant(0.5), Capacity::finite(1)};
    const Configuration init = sample_initial(profile, 32, 11);

    SimOptions opts;
    opts.record_events = true;
    const std::vector<double> obs = {0.5, 1.0};
    const Trajectory traj = simulate(init, policy, 1.0, obs, 12, opts);
    CHECK(traj.events.size() == traj.accepted_count);

    Configuration replay = init;
    std::size_t idx = 0;
    for (std::size_t next_obs = 0; next_obs < obs.size(); ++next_obs) {
        while (idx < traj.events.size() && traj.events[idx].time <= obs[next_obs]) {
            --replay.counts[traj.events[idx].from];
            ++replay.counts[traj.events[idx].to];
            ++idx;
        }
        CHECK(replay.counts == traj.snapshots[next_obs].counts);
    }
    // Event times arrive in order and inside the horizon.
    for (std::size_t i = 1; i < traj.events.size(); ++i) {
        CHECK(traj.events[i].time >= traj.events[i - 1].time);
        CHECK(traj.events[i].time <= 1.0);
    }
}

TEST_CASE("observation preconditions are validated") {
    const RatePolicy policy = exclusion_unit_rate();
    const Configuration cfg = Configuration::from_counts({1, 0});
    const std::vector<double> beyond = {2.0};
    CHECK_THROWS_AS(simulate(cfg, policy, 1.0, beyond, 1), validation_error);
    const std::vector<double> unsorted = {0.8, 0.2};
    CHECK_THROWS_AS(simulate(cfg, policy, 1.0, unsorted, 1), validation_error);
    const Configuration bad = Configuration::from_counts({2, 0});
    const std::vector<double> obs = {0.5};
    CHECK_THROWS_AS(simulate(bad, policy, 1.0, obs, 1), validation_error);
}

} // TEST_SUITE
