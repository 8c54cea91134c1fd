#include "conserva/sim.hpp"

#include <algorithm>
#include <cmath>

#include "conserva/errors.hpp"
#include "conserva/rng.hpp"

namespace conserva {

Configuration Configuration::from_counts(std::vector<std::int32_t> counts) {
    Configuration c;
    c.counts = std::move(counts);
    c.total = c.recompute_total();
    return c;
}

std::int64_t Configuration::recompute_total() const {
    std::int64_t s = 0;
    for (auto v : counts) s += v;
    return s;
}

void InitialProfile::validate(int grid_resolution) const {
    for (int i = 0; i < grid_resolution; ++i) {
        const double v = psi(double(i) / grid_resolution);
        if (capacity.is_finite()) {
            if (!(v > 0.0) || !(v < capacity.value())) {
                throw validation_error("initial profile: psi must satisfy 0 < psi < K");
            }
        } else if (!(v > 0.0)) {
            throw validation_error("initial profile: psi must be positive");
        }
    }
}

Configuration sample_initial(const InitialProfile& profile, int n_sites, std::uint64_t seed) {
    if (n_sites < 1) throw validation_error("sample_initial: need at least one site");
    profile.validate();
    Rng rng(seed);
    Configuration cfg;
    cfg.counts.resize(n_sites);
    const bool finite = profile.capacity.is_finite();
    const int cap = finite ? profile.capacity.value() : 0;
    for (int i = 0; i < n_sites; ++i) {
        const double v = profile.psi(double(i + 1) / n_sites);
        if (finite) {
            if (!(v > 0.0) || !(v < cap)) {
                throw validation_error("sample_initial: psi outside (0, K) at a site");
            }
            cfg.counts[i] = rng.binomial(cap, v / cap);
        } else {
            if (!(v > 0.0)) {
                throw validation_error("sample_initial: psi not positive at a site");
            }
            cfg.counts[i] = rng.poisson(v);
        }
    }
    cfg.total = cfg.recompute_total();
    return cfg;
}

namespace {

/// Fenwick tree over per-site occupancies; supports O(log N) sampling of a
/// site proportional to its count and O(log N) updates after each jump.
class FenwickSampler {
  public:
    explicit FenwickSampler(std::span<const std::int32_t> counts)
        : n_(int(counts.size())), tree_(counts.size() + 1, 0) {
        for (int i = 0; i < n_; ++i) tree_[i + 1] = counts[i];
        for (int i = 1; i <= n_; ++i) {
            const int parent = i + (i & -i);
            if (parent <= n_) tree_[parent] += tree_[i];
        }
    }

    void add(int site, std::int64_t delta) {
        for (int i = site + 1; i <= n_; i += i & -i) tree_[i] += delta;
    }

    /// Returns the smallest site whose prefix sum exceeds `target`
    /// (0 <= target < total).
    int sample(std::int64_t target) const {
        int pos = 0;
        int bit = 1;
        while ((bit << 1) <= n_) bit <<= 1;
        for (; bit != 0; bit >>= 1) {
            const int next = pos + bit;
            if (next <= n_ && tree_[next] <= target) {
                pos = next;
                target -= tree_[next];
            }
        }
        return pos; // 0-based site index
    }

  private:
    int n_;
    std::vector<std::int64_t> tree_;
};

struct AuditState {
    std::int64_t expected_total = 0;
    std::uint64_t since_recount = 0;
};

void audit_event(const Configuration& cfg, int from, int to, int cap_or_minus1,
                 AuditState& audit, std::uint64_t& audited) {
    if (cfg.counts[from] < 0) throw numeric_error("conservation audit: negative count");
    if (cap_or_minus1 >= 0 && cfg.counts[to] > cap_or_minus1) {
        throw numeric_error("conservation audit: count above capacity");
    }
    if (cfg.total != audit.expected_total) {
        throw numeric_error("conservation audit: cached total drifted");
    }
    if (++audit.since_recount >= 16384) {
        audit.since_recount = 0;
        if (cfg.recompute_total() != audit.expected_total) {
            throw numeric_error("conservation audit: recount mismatch");
        }
    }
    ++audited;
}

} // namespace

Trajectory simulate(const Configuration& initial, const RatePolicy& policy, double horizon,
                    std::span<const double> observation_times, std::uint64_t seed,
                    const SimOptions& options) {
    const int n = initial.sites();
    if (n < 2) throw validation_error("simulate: need at least two sites");
    if (horizon < 0.0) throw validation_error("simulate: negative horizon");
    const bool finite = policy.capacity().is_finite();
    const int cap = finite ? policy.capacity().value() : -1;
    for (auto c : initial.counts) {
        if (c < 0 || (finite && c > cap)) {
            throw validation_error("simulate: initial configuration violates capacity");
        }
    }
    for (std::size_t i = 0; i < observation_times.size(); ++i) {
        if (observation_times[i] < 0.0 || observation_times[i] > horizon) {
            throw validation_error("simulate: observation time outside [0, horizon]");
        }
        if (i > 0 && observation_times[i] < observation_times[i - 1]) {
            throw validation_error("simulate: observation times must be sorted");
        }
    }

    Trajectory traj;
    traj.observation_times.assign(observation_times.begin(), observation_times.end());
    traj.snapshots.reserve(observation_times.size());

    Configuration cfg = initial;
    Rng rng(seed);
    AuditState audit{cfg.total, 0};

    const double envelope =
        finite ? sup_rate(policy, options.sup_grid_resolution) : policy.infinite_bound();
    const double total_rate =
        finite ? envelope * double(n - 1)
               : envelope * double(cfg.total) * double(n - 1) / double(n);

    FenwickSampler fenwick(finite ? std::span<const std::int32_t>{}
                                  : std::span<const std::int32_t>(cfg.counts));

    const auto coord = [n](int site) { return double(site + 1) / n; };

    std::size_t obs_idx = 0;
    double t = 0.0;
    for (;;) {
        const double dt = rng.exponential(total_rate);
        const double t_next = t + dt;
        // Record every observation that falls strictly before the next event;
        // an observation exactly at an event time sees the post-jump state
        // (the process is right-continuous).
        while (obs_idx < observation_times.size() &&
               (observation_times[obs_idx] < t_next || t_next > horizon)) {
            if (observation_times[obs_idx] > horizon) break;
            traj.snapshots.push_back(cfg);
            ++obs_idx;
        }
        if (t_next > horizon || !std::isfinite(t_next)) break;
        t = t_next;
        if (traj.candidate_count == UINT64_MAX) {
            throw numeric_error("simulate: event counter overflow");
        }
        ++traj.candidate_count;

        int src, dst;
        double accept_prob;
        if (finite) {
            src = int(rng.below(std::uint64_t(n)));
            int j = int(rng.below(std::uint64_t(n - 1)));
            dst = j + (j >= src ? 1 : 0);
            accept_prob = policy.eval(cfg.counts[src], cfg.counts[dst], coord(src), coord(dst)) /
                          envelope;
        } else {
            // total > 0 here: a zero total gives a zero proposal rate and the
            // loop exits on the infinite waiting time above.
            const auto target = std::int64_t(rng.below(std::uint64_t(cfg.total)));
            src = fenwick.sample(target);
            int j = int(rng.below(std::uint64_t(n - 1)));
            dst = j + (j >= src ? 1 : 0);
            accept_prob = policy.eval(cfg.counts[src], cfg.counts[dst], coord(src), coord(dst)) /
                          (envelope * double(cfg.counts[src]));
        }
        if (accept_prob > 1.0 + 1e-12) {
            throw numeric_error("simulate: acceptance probability above one; "
                                "the thinning envelope is not a true bound");
        }
        const double u = rng.uniform01();
        if (u < accept_prob) {
            --cfg.counts[src];
            ++cfg.counts[dst];
            if (!finite) {
                fenwick.add(src, -1);
                fenwick.add(dst, +1);
            }
            ++traj.accepted_count;
            if (options.record_events) {
                traj.events.push_back({t, std::int32_t(src), std::int32_t(dst)});
            }
            if (options.audit_conservation) {
                audit_event(cfg, src, dst, cap, audit, traj.audited_events);
            }
        }
    }
    // Observations exactly at the horizon (or any not yet flushed).
    while (obs_idx < observation_times.size()) {
        traj.snapshots.push_back(cfg);
        ++obs_idx;
    }
    return traj;
}

int ReplicaEnsemble::time_index(double t) const {
    for (std::size_t i = 0; i < observation_times.size(); ++i) {
        if (observation_times[i] == t) return int(i);
    }
    throw validation_error("ensemble: time was not observed");
}

std::uint64_t replica_init_seed(std::uint64_t base_seed, int replica) {
    Rng r = Rng::stream(base_seed, 2 * std::uint64_t(replica));
    return r.next_u64();
}

std::uint64_t replica_dynamics_seed(std::uint64_t base_seed, int replica) {
    Rng r = Rng::stream(base_seed, 2 * std::uint64_t(replica) + 1);
    return r.next_u64();
}

ReplicaEnsemble run_replicas(const InitialProfile& profile, const RatePolicy& policy,
                             int n_sites, double horizon,
                             std::span<const double> observation_times, int replica_count,
                             std::uint64_t base_seed, const SimOptions& options,
                             ExecMode mode) {
    if (replica_count < 1) throw validation_error("run_replicas: need at least one replica");
    profile.validate();
    if (profile.capacity.is_finite() != policy.capacity().is_finite() ||
        (profile.capacity.is_finite() &&
         profile.capacity.value() != policy.capacity().value())) {
        throw validation_error("run_replicas: profile and policy capacities differ");
    }

    ReplicaEnsemble ens;
    ens.n_sites = n_sites;
    ens.horizon = horizon;
    ens.observation_times.assign(observation_times.begin(), observation_times.end());
    ens.base_seed = base_seed;
    ens.replicas.resize(replica_count);

    const bool par = (mode == ExecMode::parallel);
    std::exception_ptr failure = nullptr;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (par)
#endif
    for (int r = 0; r < replica_count; ++r) {
        try {
            Configuration init =
                sample_initial(profile, n_sites, replica_init_seed(base_seed, r));
            ens.replicas[r] = simulate(init, policy, horizon, observation_times,
                                       replica_dynamics_seed(base_seed, r), options);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            {
                if (!failure) failure = std::current_exception();
            }
        }
    }
    (void)par;
    if (failure) std::rethrow_exception(failure);
    return ens;
}

} // namespace conserva
