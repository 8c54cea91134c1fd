#ifndef CONSERVA_SIM_HPP
#define CONSERVA_SIM_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "conserva/functions.hpp"
#include "conserva/model.hpp"
#include "conserva/parallel.hpp"

namespace conserva {

/// Occupancy vector over N positions; counts[i] is the number of particles on
/// position i+1 (coordinate (i+1)/N). The total is cached and must equal the
/// sum of counts at all times: jumps relocate particles, never create them.
struct Configuration {
    std::vector<std::int32_t> counts;
    std::int64_t total = 0;

    static Configuration from_counts(std::vector<std::int32_t> counts);
    int sites() const { return int(counts.size()); }
    std::int64_t recompute_total() const;
};

/// Smooth initial density profile psi; sites are seeded independently with
/// Binomial(K, psi/K) (finite capacity) or Poisson(psi) (unbounded).
struct InitialProfile {
    HarmonicFn psi;
    Capacity capacity = Capacity::finite(1);

    /// Checks 0 < psi < K (finite) or psi > 0 (unbounded) on a sample grid.
    void validate(int grid_resolution = 256) const;
};

Configuration sample_initial(const InitialProfile& profile, int n_sites, std::uint64_t seed);

struct JumpEvent {
    double time;
    std::int32_t from;
    std::int32_t to;
};

struct Trajectory {
    std::vector<double> observation_times;
    std::vector<Configuration> snapshots;
    std::uint64_t candidate_count = 0; // thinning proposals
    std::uint64_t accepted_count = 0;  // realized jumps
    std::uint64_t audited_events = 0;  // events that passed the conservation audit
    std::vector<JumpEvent> events;     // only when record_events is set
};

struct SimOptions {
    bool record_events = false;
    /// Re-verifies integer conservation and occupancy bounds on every accepted
    /// event (plus a periodic full recount); failures raise numeric_error.
    bool audit_conservation = false;
    int sup_grid_resolution = 64;
};

/// Exact continuous-time simulation by thinning. Finite capacity: candidate
/// pairs arrive at total rate K1'*(N-1) with K1' = sup_rate(policy), each
/// ordered pair equally likely, acceptance probability phi/K1'. Unbounded
/// capacity: source sites are proposed proportionally to occupancy at total
/// rate C1*total*(N-1)/N, destination uniform among the others, acceptance
/// phi/(C1*k). Both proposals dominate the true rates, so acceptance
/// probabilities stay in [0,1]; an excess is trapped as a hard error.
Trajectory simulate(const Configuration& initial, const RatePolicy& policy, double horizon,
                    std::span<const double> observation_times, std::uint64_t seed,
                    const SimOptions& options = {});

struct ReplicaEnsemble {
    int n_sites = 0;
    double horizon = 0.0;
    std::vector<double> observation_times;
    std::vector<Trajectory> replicas;
    std::uint64_t base_seed = 0;

    int time_index(double t) const; // throws validation_error when absent
    const Configuration& snapshot(int replica, int time_idx) const {
        return replicas[replica].snapshots[time_idx];
    }
};

/// Derived per-replica seeds: replica r samples its initial configuration
/// from stream (base_seed, 2r) and runs dynamics on stream (base_seed, 2r+1),
/// so the ensemble is reproducible independent of scheduling order.
std::uint64_t replica_init_seed(std::uint64_t base_seed, int replica);
std::uint64_t replica_dynamics_seed(std::uint64_t base_seed, int replica);

ReplicaEnsemble run_replicas(const InitialProfile& profile, const RatePolicy& policy,
                             int n_sites, double horizon,
                             std::span<const double> observation_times, int replica_count,
                             std::uint64_t base_seed, const SimOptions& options = {},
                             ExecMode mode = ExecMode::parallel);

} // namespace conserva

#endif
