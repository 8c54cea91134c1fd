#include "conserva/graphical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "conserva/errors.hpp"
#include "conserva/rng.hpp"
#include "conserva/stats.hpp"

namespace conserva {

namespace {

std::uint64_t pair_key(int from, int to, int sites) {
    return std::uint64_t(from) * std::uint64_t(sites) + std::uint64_t(to);
}

} // namespace

ArrowStream::ArrowStream(int sites, double envelope, double horizon, std::uint64_t seed)
    : sites_(sites), envelope_(envelope), horizon_(horizon), seed_(seed) {
    if (sites < 2) throw validation_error("arrow stream: need at least two sites");
    if (!(envelope > 0.0)) throw validation_error("arrow stream: envelope must be positive");
    if (horizon < 0.0) throw validation_error("arrow stream: negative horizon");
}

ArrowStream ArrowStream::from_events(int sites, double envelope, double horizon,
                                     std::vector<Arrow> events) {
    ArrowStream s(sites, envelope, horizon);
    s.synthetic_ = true;
    std::stable_sort(events.begin(), events.end(),
                     [](const Arrow& a, const Arrow& b) { return a.time < b.time; });
    for (const Arrow& e : events) {
        if (e.from == e.to || e.from < 0 || e.to < 0 || e.from >= sites || e.to >= sites) {
            throw validation_error("arrow stream: event on an invalid pair");
        }
        if (e.time < 0.0 || e.time > horizon) {
            throw validation_error("arrow stream: event outside [0, horizon]");
        }
        auto& p = s.pairs_[pair_key(e.from, e.to, sites)];
        p.times.push_back(e.time);
        p.marks.push_back(e.mark);
    }
    return s;
}

ArrowStream::ArrowStream(int sites, double envelope, double horizon)
    : sites_(sites), envelope_(envelope), horizon_(horizon) {}

const PairArrows& ArrowStream::pair(int from, int to) const {
    if (from == to || from < 0 || to < 0 || from >= sites_ || to >= sites_) {
        throw validation_error("arrow stream: invalid pair");
    }
    const std::uint64_t key = pair_key(from, to, sites_);
    auto it = pairs_.find(key);
    if (it != pairs_.end()) return it->second;
    if (synthetic_) {
        static const PairArrows empty{};
        return pairs_.emplace(key, empty).first->second;
    }
    // Poisson(envelope/N * horizon) events, uniform times, marks in time order.
    Rng rng = Rng::stream(seed_, key);
    PairArrows p;
    const int count = rng.poisson(envelope_ / sites_ * horizon_);
    p.times.resize(count);
    for (int i = 0; i < count; ++i) p.times[i] = rng.uniform01() * horizon_;
    std::sort(p.times.begin(), p.times.end());
    p.marks.resize(count);
    for (int i = 0; i < count; ++i) p.marks[i] = rng.uniform01();
    return pairs_.emplace(key, std::move(p)).first->second;
}

std::vector<Arrow> ArrowStream::merged_events() const {
    std::vector<Arrow> all;
    for (int x = 0; x < sites_; ++x) {
        for (int y = 0; y < sites_; ++y) {
            if (x == y) continue;
            const PairArrows& p = pair(x, y);
            for (std::size_t i = 0; i < p.times.size(); ++i) {
                all.push_back({p.times[i], std::int32_t(x), std::int32_t(y), p.marks[i]});
            }
        }
    }
    std::sort(all.begin(), all.end(), [](const Arrow& a, const Arrow& b) {
        if (a.time != b.time) return a.time < b.time;
        if (a.from != b.from) return a.from < b.from;
        return a.to < b.to;
    });
    return all;
}

bool InfluenceSet::contains(int site) const {
    return std::binary_search(members.begin(), members.end(), site);
}

InfluenceSet influence_set(const ArrowStream& arrows, int root, double t) {
    if (t > arrows.horizon() + 1e-15) {
        throw validation_error("influence_set: time beyond the stream horizon");
    }
    if (root < 0 || root >= arrows.sites()) {
        throw validation_error("influence_set: root outside the site range");
    }
    const int n = arrows.sites();
    // entry[z] = latest admissible time for an arrow *into* the chain at z:
    // an arrow {w,z} at time s extends a chain from w when s <= entry[z],
    // where entry[root] = t and otherwise entry[z] is strictly below the
    // first-arrow time of the best chain from z (times must increase).
    const double unreached = -std::numeric_limits<double>::infinity();
    std::vector<double> entry(n, unreached);
    std::vector<int> layer_of(n, -1);
    entry[root] = t;
    layer_of[root] = 0;

    std::vector<int> frontier = {root};
    int depth = 0;
    while (!frontier.empty()) {
        ++depth;
        std::vector<int> changed;
        for (int z : frontier) {
            const double limit = entry[z];
            for (int w = 0; w < n; ++w) {
                if (w == z) continue;
                // Best qualifying arrow between w and z in either direction:
                // the chain continues from z after time s, so s < limit for
                // interior sites and s <= t at the root.
                double best = unreached;
                for (const PairArrows* p : {&arrows.pair(w, z), &arrows.pair(z, w)}) {
                    for (double s : p->times) {
                        if (s > t) break;
                        const bool ok = (z == root) ? (s <= limit) : (s < limit);
                        if (ok && s > best) best = s;
                    }
                }
                if (best == unreached) continue;
                // A chain from w whose first arrow is at time `best` exists;
                // arrows into w must then come strictly before `best`.
                if (best > entry[w]) {
                    if (entry[w] == unreached) layer_of[w] = depth;
                    entry[w] = best;
                    changed.push_back(w);
                }
            }
        }
        std::sort(changed.begin(), changed.end());
        changed.erase(std::unique(changed.begin(), changed.end()), changed.end());
        frontier = std::move(changed);
    }

    InfluenceSet out;
    out.root = root;
    out.horizon = t;
    int max_layer = 0;
    for (int i = 0; i < n; ++i) {
        if (entry[i] != unreached) {
            out.members.push_back(i);
            max_layer = std::max(max_layer, layer_of[i]);
        }
    }
    // Layer index == minimal chain length; interior layers may be empty.
    out.layers.assign(max_layer + 1, {});
    for (int site : out.members) out.layers[layer_of[site]].push_back(site);
    std::sort(out.members.begin(), out.members.end());
    return out;
}

Trajectory evolve_with_arrows(const Configuration& initial, const ArrowStream& arrows,
                              const RatePolicy& policy,
                              std::span<const double> observation_times) {
    if (!policy.capacity().is_finite()) {
        throw validation_error("evolve_with_arrows: finite capacity only; the unbounded "
                               "model has no uniform arrow envelope");
    }
    if (initial.sites() != arrows.sites()) {
        throw validation_error("evolve_with_arrows: configuration and stream sizes differ");
    }
    const int n = initial.sites();
    const int cap = policy.capacity().value();
    for (auto c : initial.counts) {
        if (c < 0 || c > cap) {
            throw validation_error("evolve_with_arrows: configuration violates capacity");
        }
    }
    std::vector<double> obs(observation_times.begin(), observation_times.end());
    if (obs.empty()) obs.push_back(arrows.horizon());

    Trajectory traj;
    traj.observation_times = obs;
    Configuration cfg = initial;
    const double envelope = arrows.envelope();
    const auto coord = [n](int site) { return double(site + 1) / n; };

    std::size_t obs_idx = 0;
    for (const Arrow& ev : arrows.merged_events()) {
        while (obs_idx < obs.size() && obs[obs_idx] < ev.time) {
            traj.snapshots.push_back(cfg);
            ++obs_idx;
        }
        ++traj.candidate_count;
        const double rate =
            policy.eval(cfg.counts[ev.from], cfg.counts[ev.to], coord(ev.from), coord(ev.to));
        const double p = rate / envelope;
        if (p > 1.0 + 1e-12) {
            throw numeric_error("evolve_with_arrows: rate exceeds the arrow envelope");
        }
        // A zero rate always rejects, even against a handcrafted zero mark.
        if (p > 0.0 && ev.mark <= p) {
            --cfg.counts[ev.from];
            ++cfg.counts[ev.to];
            ++traj.accepted_count;
        }
    }
    while (obs_idx < obs.size()) {
        traj.snapshots.push_back(cfg);
        ++obs_idx;
    }
    return traj;
}

double overlap_reference_bound(double envelope, double horizon, int n_sites) {
    return (2.0 * std::exp(4.0 * envelope * horizon) + std::exp(8.0 * envelope * horizon)) /
           double(n_sites);
}

OverlapEstimate overlap_probability(int n_sites, double envelope, double horizon, int x, int y,
                                    std::size_t replicas, std::uint64_t seed, ExecMode mode) {
    if (x == y) throw validation_error("overlap_probability: sites must differ");
    if (x < 0 || y < 0 || x >= n_sites || y >= n_sites) {
        throw validation_error("overlap_probability: site outside range");
    }
    std::vector<unsigned char> hit(replicas, 0);
    const bool par = (mode == ExecMode::parallel);
    std::exception_ptr failure = nullptr;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16) if (par)
#endif
    for (long long r = 0; r < (long long)replicas; ++r) {
        try {
            ArrowStream arrows(n_sites, envelope, horizon,
                               Rng::stream(seed, std::uint64_t(r)).next_u64());
            const InfluenceSet gx = influence_set(arrows, x, horizon);
            const InfluenceSet gy = influence_set(arrows, y, horizon);
            // Members are sorted; a linear scan finds any common site.
            std::size_t i = 0, j = 0;
            bool common = false;
            while (i < gx.members.size() && j < gy.members.size()) {
                if (gx.members[i] == gy.members[j]) { common = true; break; }
                if (gx.members[i] < gy.members[j]) ++i; else ++j;
            }
            hit[r] = common ? 1 : 0;
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

    OverlapEstimate est;
    est.n_sites = n_sites;
    est.replicas = replicas;
    for (auto h : hit) est.hits += h;
    const ProportionCI ci = wilson_interval(est.hits, replicas);
    est.estimate = ci.estimate;
    est.ci_low = ci.low;
    est.ci_high = ci.high;
    est.explicit_bound = overlap_reference_bound(envelope, horizon, n_sites);
    return est;
}

OverlapEstimate overlap_probability(int n_sites, const RatePolicy& policy, double horizon,
                                    int x, int y, std::size_t replicas, std::uint64_t seed,
                                    ExecMode mode) {
    return overlap_probability(n_sites, sup_rate(policy, 64), horizon, x, y, replicas, seed,
                               mode);
}

} // namespace conserva
