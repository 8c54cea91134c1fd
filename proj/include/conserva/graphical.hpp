#ifndef CONSERVA_GRAPHICAL_HPP
#define CONSERVA_GRAPHICAL_HPP

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "conserva/model.hpp"
#include "conserva/parallel.hpp"
#include "conserva/sim.hpp"

namespace conserva {

struct Arrow {
    double time;
    std::int32_t from;
    std::int32_t to;
    double mark; // uniform acceptance mark attached to the event
};

struct PairArrows {
    std::vector<double> times; // strictly increasing within the pair
    std::vector<double> marks; // one per event, in time order
};

/// Poisson arrow streams on ordered site pairs, each at rate envelope/N on
/// [0, horizon], with i.i.d. uniform marks. Pair streams are materialized
/// lazily from per-pair deterministic sub-seeds, so influence-set queries on
/// large N never pay for the full N*(N-1) family; querying the same pair in
/// any order yields the same stream.
class ArrowStream {
  public:
    ArrowStream(int sites, double envelope, double horizon, std::uint64_t seed);

    /// Handcrafted stream for tests and replays; all pairs are explicit and
    /// nothing is sampled.
    static ArrowStream from_events(int sites, double envelope, double horizon,
                                   std::vector<Arrow> events);

    const PairArrows& pair(int from, int to) const;

    /// Every event of every pair, globally sorted by (time, from, to); the
    /// index tie-break only matters for float-identical times, which carry
    /// zero probability.
    std::vector<Arrow> merged_events() const;

    int sites() const { return sites_; }
    double envelope() const { return envelope_; }
    double horizon() const { return horizon_; }

  private:
    ArrowStream(int sites, double envelope, double horizon); // synthetic backing

    int sites_;
    double envelope_;
    double horizon_;
    std::uint64_t seed_ = 0;
    bool synthetic_ = false;
    mutable std::unordered_map<std::uint64_t, PairArrows> pairs_;
};

/// Influence set of a site: all sites connected to the root by a chain of
/// arrows with strictly increasing times within (0, t], together with the
/// breadth-first layers (layer m = sites whose shortest such chain has m
/// arrows). Intermediate layers may be empty; they are kept so layer indices
/// always equal chain lengths.
struct InfluenceSet {
    int root = 0;
    double horizon = 0.0;
    std::vector<int> members;             // sorted, includes the root
    std::vector<std::vector<int>> layers; // layers[0] == {root}

    bool contains(int site) const;
};

InfluenceSet influence_set(const ArrowStream& arrows, int root, double t);

/// Evolves a configuration through the merged arrow sequence: the event on
/// (x, y) with mark U applies the jump iff U <= phi_{eta(x),eta(y)}(x/N, y/N)
/// divided by the stream envelope. Law equals simulate()'s.
Trajectory evolve_with_arrows(const Configuration& initial, const ArrowStream& arrows,
                              const RatePolicy& policy,
                              std::span<const double> observation_times = {});

struct OverlapEstimate {
    int n_sites = 0;
    std::size_t replicas = 0;
    std::size_t hits = 0;
    double estimate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double explicit_bound = 0.0; // (2 e^{4 K1 T} + e^{8 K1 T}) / N
};

/// Monte Carlo estimate of P(the influence sets of x and y intersect) over
/// independent arrow streams, with a Wilson interval and the explicit bound
/// it is compared against.
OverlapEstimate overlap_probability(int n_sites, double envelope, double horizon, int x, int y,
                                    std::size_t replicas, std::uint64_t seed,
                                    ExecMode mode = ExecMode::parallel);

/// Same, with the envelope taken from the policy's thinning bound.
OverlapEstimate overlap_probability(int n_sites, const RatePolicy& policy, double horizon,
                                    int x, int y, std::size_t replicas, std::uint64_t seed,
                                    ExecMode mode = ExecMode::parallel);

double overlap_reference_bound(double envelope, double horizon, int n_sites);

} // namespace conserva

#endif
