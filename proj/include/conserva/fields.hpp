#ifndef CONSERVA_FIELDS_HPP
#define CONSERVA_FIELDS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "conserva/functions.hpp"
#include "conserva/meanfield.hpp"
#include "conserva/sim.hpp"
#include "conserva/stats.hpp"

namespace conserva {

struct FieldEstimate {
    double value = 0.0;
    double std_error = 0.0;
    int replicas = 0;
};

/// (1/N) sum_i 1{counts[i]==k} f((i+1)/N).
double empirical_density(const Configuration& config, int k, const TestFn& f);

/// Per-site empirical frequency of occupancy k at observation time t across
/// replicas, with binomial standard errors.
std::vector<FieldEstimate> occupation_probabilities(const ReplicaEnsemble& ensemble, double t,
                                                    int k);

/// (1/sqrt(N)) sum_i (1{counts[i]==k} - site_probs[i]) f((i+1)/N).
double fluctuation_field(const Configuration& config, std::span<const double> site_probs,
                         int k, const TestFn& f);

/// Sample covariance of 1{eta_t(x)=k1} and 1{eta_t(y)=k2} across replicas,
/// with a leave-one-out jackknife standard error.
FieldEstimate covariance_estimate(const ReplicaEnsemble& ensemble, double t, int x, int y,
                                  int k1, int k2);

struct DecayPoint {
    int n_sites;
    double max_abs_covariance;
    double std_error; // jackknife error of the panel entry achieving the max
};

struct DecayPanel {
    /// Base site positions as fractions of N; the partner site sits at
    /// separation_fraction*N further along the torus.
    std::vector<double> base_fractions = {0.0};
    double separation_fraction = 0.25;
    /// Occupancy pairs: all (k1,k2) up to this level (capped at the capacity
    /// for finite K).
    int max_level = 3;
};

struct DecayReport {
    std::vector<DecayPoint> points;
    SlopeFit slope; // log-log fit of max|cov| against N
    bool degenerate = false;
};

/// Covariance decay study: simulates its own ensembles per N and reports the
/// panel maximum with a weighted log-log slope.
DecayReport decay_study(const RatePolicy& policy, const InitialProfile& profile, double t,
                        std::span<const int> n_list, int replicas, std::uint64_t seed,
                        const DecayPanel& panel = {}, ExecMode mode = ExecMode::parallel);

struct ConvergencePoint {
    int n_sites;
    int replicas;
    double reference;   // integral of rho_{t,k} f over the mean-field grid
    double mean_field;  // mean of mu^N over replicas
    double mse;         // mean of (mu^N - reference)^2
    double mse_se;
    double variance_term;
    double bias_sq_term;
};

struct ConvergenceReport {
    std::vector<ConvergencePoint> points;
    SlopeFit mse_slope;
    SlopeFit variance_slope;
    bool monotone_decreasing = false;
};

/// L2 convergence check of the empirical density field against the mean-field
/// reference at time t, across an N sweep.
ConvergenceReport convergence_report(std::span<const ReplicaEnsemble> ensembles,
                                     const DensityProfile& reference, double t, int k,
                                     const TestFn& f);

} // namespace conserva

#endif
