#include "conserva/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "conserva/errors.hpp"
#include "conserva/rng.hpp"

namespace conserva {

double empirical_density(const Configuration& config, int k, const TestFn& f) {
    if (k < 0) throw validation_error("empirical_density: negative occupancy level");
    const int n = config.sites();
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        if (config.counts[i] == k) s += f(double(i + 1) / n);
    }
    return s / n;
}

std::vector<FieldEstimate> occupation_probabilities(const ReplicaEnsemble& ensemble, double t,
                                                    int k) {
    const int ti = ensemble.time_index(t);
    const int n = ensemble.n_sites;
    const int r = int(ensemble.replicas.size());
    std::vector<FieldEstimate> out(n);
    for (int i = 0; i < n; ++i) {
        int hits = 0;
        for (int rep = 0; rep < r; ++rep) {
            if (ensemble.snapshot(rep, ti).counts[i] == k) ++hits;
        }
        const double p = double(hits) / r;
        out[i] = {p, std::sqrt(p * (1.0 - p) / r), r};
    }
    return out;
}

double fluctuation_field(const Configuration& config, std::span<const double> site_probs,
                         int k, const TestFn& f) {
    const int n = config.sites();
    if (int(site_probs.size()) != n) {
        throw validation_error("fluctuation_field: site probability vector has wrong length");
    }
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double ind = config.counts[i] == k ? 1.0 : 0.0;
        s += (ind - site_probs[i]) * f(double(i + 1) / n);
    }
    return s / std::sqrt(double(n));
}

FieldEstimate covariance_estimate(const ReplicaEnsemble& ensemble, double t, int x, int y,
                                  int k1, int k2) {
    const int r = int(ensemble.replicas.size());
    if (r < 2) throw validation_error("covariance_estimate: need at least two replicas");
    const int ti = ensemble.time_index(t);
    if (x < 0 || y < 0 || x >= ensemble.n_sites || y >= ensemble.n_sites) {
        throw validation_error("covariance_estimate: site outside range");
    }

    std::vector<double> a(r), b(r);
    double sa = 0, sb = 0, sab = 0;
    for (int rep = 0; rep < r; ++rep) {
        const Configuration& cfg = ensemble.snapshot(rep, ti);
        a[rep] = cfg.counts[x] == k1 ? 1.0 : 0.0;
        b[rep] = cfg.counts[y] == k2 ? 1.0 : 0.0;
        sa += a[rep];
        sb += b[rep];
        sab += a[rep] * b[rep];
    }
    const double n = double(r);
    const double cov = (sab - sa * sb / n) / (n - 1.0);

    FieldEstimate est;
    est.value = cov;
    est.replicas = r;
    if (r >= 3) {
        // Leave-one-out covariances from the precomputed sums.
        double mean_loo = 0.0;
        std::vector<double> loo(r);
        for (int i = 0; i < r; ++i) {
            const double sa_i = sa - a[i];
            const double sb_i = sb - b[i];
            const double sab_i = sab - a[i] * b[i];
            loo[i] = (sab_i - sa_i * sb_i / (n - 1.0)) / (n - 2.0);
            mean_loo += loo[i];
        }
        mean_loo /= n;
        double ss = 0.0;
        for (int i = 0; i < r; ++i) ss += (loo[i] - mean_loo) * (loo[i] - mean_loo);
        est.std_error = std::sqrt((n - 1.0) / n * ss);
    } else {
        est.std_error = std::numeric_limits<double>::infinity();
    }
    return est;
}

DecayReport decay_study(const RatePolicy& policy, const InitialProfile& profile, double t,
                        std::span<const int> n_list, int replicas, std::uint64_t seed,
                        const DecayPanel& panel, ExecMode mode) {
    DecayReport report;
    const std::vector<double> obs = {t};
    const int cap_level = policy.capacity().is_finite()
                              ? policy.capacity().value()
                              : panel.max_level;
    const int top = std::min(panel.max_level, cap_level);

    for (std::size_t idx = 0; idx < n_list.size(); ++idx) {
        const int n = n_list[idx];
        const ReplicaEnsemble ens =
            run_replicas(profile, policy, n, t, obs, replicas,
                         Rng::stream(seed, idx).next_u64(), {}, mode);
        DecayPoint point{n, 0.0, 0.0};
        const int sep = std::max(1, int(std::lround(panel.separation_fraction * n)));
        for (double frac : panel.base_fractions) {
            const int x = int(std::lround(frac * n)) % n;
            const int y = (x + sep) % n;
            if (x == y) continue;
            for (int k1 = 0; k1 <= top; ++k1) {
                for (int k2 = 0; k2 <= top; ++k2) {
                    const FieldEstimate c = covariance_estimate(ens, t, x, y, k1, k2);
                    if (std::abs(c.value) > point.max_abs_covariance) {
                        point.max_abs_covariance = std::abs(c.value);
                        point.std_error = c.std_error;
                    }
                }
            }
        }
        report.points.push_back(point);
    }

    std::vector<double> xs, ys, sd;
    for (const auto& p : report.points) {
        xs.push_back(double(p.n_sites));
        ys.push_back(p.max_abs_covariance);
        sd.push_back(p.std_error);
    }
    report.slope = loglog_fit(xs, ys, sd);
    report.degenerate = !report.slope.defined;
    return report;
}

ConvergenceReport convergence_report(std::span<const ReplicaEnsemble> ensembles,
                                     const DensityProfile& reference, double t, int k,
                                     const TestFn& f) {
    if (std::abs(reference.time - t) > 1e-9) {
        throw validation_error("convergence_report: reference profile is at a different time");
    }
    ConvergenceReport report;
    const double ref = profile_pairing(reference, k, f);

    for (const ReplicaEnsemble& ens : ensembles) {
        const int ti = ens.time_index(t);
        const int r = int(ens.replicas.size());
        std::vector<double> mu(r);
        for (int rep = 0; rep < r; ++rep) {
            mu[rep] = empirical_density(ens.snapshot(rep, ti), k, f);
        }
        double mean = 0.0;
        for (double m : mu) mean += m;
        mean /= r;
        double var = 0.0, mse = 0.0, mse_sq = 0.0;
        for (double m : mu) {
            var += (m - mean) * (m - mean);
            const double e2 = (m - ref) * (m - ref);
            mse += e2;
            mse_sq += e2 * e2;
        }
        var /= (r - 1);
        mse /= r;
        const double mse_var = std::max(0.0, mse_sq / r - mse * mse);

        ConvergencePoint point;
        point.n_sites = ens.n_sites;
        point.replicas = r;
        point.reference = ref;
        point.mean_field = mean;
        point.mse = mse;
        point.mse_se = std::sqrt(mse_var / r);
        point.variance_term = var;
        point.bias_sq_term = (mean - ref) * (mean - ref);
        report.points.push_back(point);
    }

    report.monotone_decreasing = report.points.size() >= 2;
    for (std::size_t i = 1; i < report.points.size(); ++i) {
        if (!(report.points[i].mse < report.points[i - 1].mse)) {
            report.monotone_decreasing = false;
        }
    }

    std::vector<double> xs, mses, mse_sd, vars, var_sd;
    for (const auto& p : report.points) {
        xs.push_back(double(p.n_sites));
        mses.push_back(p.mse);
        mse_sd.push_back(p.mse_se);
        vars.push_back(p.variance_term);
        var_sd.push_back(p.variance_term * std::sqrt(2.0 / std::max(1, p.replicas - 1)));
    }
    report.mse_slope = loglog_fit(xs, mses, mse_sd);
    report.variance_slope = loglog_fit(xs, vars, var_sd);
    return report;
}

} // namespace conserva
