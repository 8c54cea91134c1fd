#ifndef CONSERVA_OU_HPP
#define CONSERVA_OU_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "conserva/functions.hpp"
#include "conserva/linalg.hpp"
#include "conserva/meanfield.hpp"
#include "conserva/model.hpp"

namespace conserva {

/// Objects of the fluctuation limit, discretized on the stacked grid vector
/// (V_0(u_.), ..., V_K(u_.)) of dimension (K+1)*M. A fluctuation field V_k is
/// represented by density values v_k[j] with pairing
/// <V_k, f> ~= (1/M) sum_j v_k[j] f(u_j), so covariance blocks carry a factor
/// M relative to the integral kernels they discretize and project() applies
/// the 1/M weights on both slots.

struct DriftOperator {
    double time = 0.0;
    int levels = 0;    // K+1
    int grid_size = 0; // M
    Matrix matrix;     // (K+1)M square
};

struct NoiseCovariance {
    double time = 0.0;
    int levels = 0;
    int grid_size = 0;
    Matrix matrix; // symmetric PSD
};

struct CovarianceState {
    double time = 0.0;
    int levels = 0;
    int grid_size = 0;
    Matrix sigma; // symmetric PSD within tolerance
};

/// Gaussian initial covariance of the fluctuation fields under the product
/// initial measure: Cov(V_0k(f), V_0m(g)) = int p_k (delta_km - p_m) f g du
/// with p_k the Binomial(K, psi/K) level probabilities.
CovarianceState initial_covariance(const HarmonicFn& psi, int capacity, int grid_size);

/// Drift of the stacked-grid O-U system, assembled from the conjugate action
/// of the jump-channel operators against the grid inner product. Requires a
/// finite-capacity policy and a profile at the drift's time.
DriftOperator build_drift(const DensityProfile& profile, const RatePolicy& policy);
DriftOperator build_drift(const DensityProfile& profile, const GridRateTables& tables);

/// Noise covariance of the same system: for grid test vectors f, g the form
/// (1/M^2) f^T Q g equals the double Riemann sum of
/// sum_channels int int (b^k f)(b^m g) du dv.
NoiseCovariance build_noise_cov(const DensityProfile& profile, const RatePolicy& policy);
NoiseCovariance build_noise_cov(const DensityProfile& profile, const GridRateTables& tables);

struct EvolveOptions {
    /// Steps between PSD monitor checks (power-iteration estimate).
    int psd_check_stride = 50;
    double psd_tolerance = 1e-6;
    /// Observation times at which states are kept; empty keeps every step.
    std::vector<double> keep_times;
};

/// Covariance flow dSigma/dt = A Sigma + Sigma A^T + Q integrated with RK4,
/// with A and Q rebuilt at every stage from linearly interpolated profiles.
/// Symmetry is enforced by symmetrization after each step.
std::vector<CovarianceState> evolve_covariance(const CovarianceState& sigma0,
                                               std::span<const DensityProfile> profiles,
                                               const RatePolicy& policy, double horizon,
                                               double dt, const EvolveOptions& options = {},
                                               ExecMode mode = ExecMode::parallel);

/// Same flow with caller-supplied drift/noise builders; the scalar
/// consistency probes use this entry point directly.
std::vector<CovarianceState> evolve_covariance_raw(
    const CovarianceState& sigma0, const std::function<Matrix(double)>& drift_at,
    const std::function<Matrix(double)>& noise_at, double horizon, double dt,
    const EvolveOptions& options = {}, ExecMode mode = ExecMode::parallel);

/// Cov(V_k(f), V_m(g)) approximated by the weighted bilinear form on the
/// (k,m) block.
double project(const CovarianceState& sigma, const TestFn& f, const TestFn& g, int k, int m);

struct OuPathStats {
    std::vector<double> times;
    std::vector<Matrix> sample_covariance; // one per time, stacked-grid scale
    int paths = 0;
};

/// Euler-Maruyama simulation of the stacked-grid O-U process with noise
/// increments of covariance Q_t*dt; a Monte Carlo cross-check of
/// evolve_covariance. Paths run on independent RNG streams; the covariance
/// reduction is done serially over the stored path states so results do not
/// depend on scheduling.
OuPathStats simulate_ou(const CovarianceState& sigma0,
                        std::span<const DensityProfile> profiles, const RatePolicy& policy,
                        double horizon, double dt, int paths, std::uint64_t seed,
                        std::span<const double> keep_times,
                        ExecMode mode = ExecMode::parallel);

/// Sample covariance entry (k,m block, f/g projection) from path statistics.
double project_block(const Matrix& stacked, int grid_size, const TestFn& f, const TestFn& g,
                     int k, int m);

} // namespace conserva

#endif
