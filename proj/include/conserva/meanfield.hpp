#ifndef CONSERVA_MEANFIELD_HPP
#define CONSERVA_MEANFIELD_HPP

#include <memory>
#include <span>
#include <vector>

#include "conserva/functions.hpp"
#include "conserva/model.hpp"
#include "conserva/parallel.hpp"
#include "conserva/rate_tables.hpp"

namespace conserva {

/// Grid-discretized occupancy densities rho_{t,k}(u_j) on u_j = (j+1)/M,
/// k = 0..kmax. For finite capacity kmax equals K; for unbounded capacity
/// kmax is the truncation level.
struct DensityProfile {
    int grid_size = 0; // M
    int kmax = 0;
    double time = 0.0;
    std::vector<double> values; // (kmax+1) x M row-major

    double& at(int k, int j) { return values[std::size_t(k) * grid_size + j]; }
    double at(int k, int j) const { return values[std::size_t(k) * grid_size + j]; }
    const double* level(int k) const { return values.data() + std::size_t(k) * grid_size; }

    double grid_coord(int j) const { return double(j + 1) / grid_size; }

    /// max_j |sum_k rho_k(u_j) - 1|
    double normalization_error() const;
    double min_value() const;
    /// (1/M) sum_j sum_k k*rho_k(u_j), the conserved particle mass functional.
    double mass() const;
    /// theta(u_j) = sum_k k*rho_k(u_j), the first-moment field.
    std::vector<double> theta() const;
};

struct InitReport {
    DensityProfile profile;
    /// Poisson mass beyond the truncation level that was renormalized away
    /// (zero for finite capacity).
    double dropped_mass = 0.0;
};

/// Binomial(K, psi/K) or Poisson(psi) level probabilities per grid point.
/// For unbounded capacity the Poisson tail beyond kmax must be below 1e-12
/// at max psi, otherwise a truncation error is raised.
InitReport init_profile(const HarmonicFn& psi, Capacity capacity, int kmax, int grid_size);

struct TailEntry {
    int level;           // M'
    double sup_tail;     // max_j sum_{l >= M'} l * rho_l(u_j)
};

struct TailReport {
    double time = 0.0;
    std::vector<TailEntry> ladder; // levels kmax/2, 3*kmax/4, kmax
    double log_slope = 0.0;        // fitted exponential decay rate of the ladder
    bool slope_defined = false;
    bool flagged = false;          // tail at kmax/2 above 1e-8
};

TailReport tail_check(const DensityProfile& profile);

struct IntegrationOptions {
    /// Keep every save_stride-th step in the returned series (the initial and
    /// final profiles are always kept).
    int save_stride = 1;
    double normalization_tolerance = 1e-6;
    double negativity_tolerance = -1e-6;
};

struct StepMonitor {
    double time;
    double normalization_error;
    double min_value;
    double mass;
};

struct IntegrationResult {
    std::vector<DensityProfile> series;
    std::vector<StepMonitor> monitors;   // one entry per step
    double max_normalization_error = 0.0;
    double min_value = 0.0;
    double max_mass_drift = 0.0;
};

/// Mean-field evolution on the grid: classical fixed-step RK4 over the
/// gain/loss right-hand side with all torus integrals taken as M-point
/// Riemann sums on the same grid. Owns the tabulated rates.
class MeanfieldSystem {
  public:
    MeanfieldSystem(const RatePolicy& policy, int kmax, int grid_size);

    int kmax() const { return tables_.kmax(); }
    int grid_size() const { return tables_.grid_size(); }
    bool finite_capacity() const { return finite_; }

    /// Time derivative of the stacked (kmax+1) x M density array.
    /// Parallel and serial paths produce bit-identical output.
    void rhs(const DensityProfile& profile, std::span<double> out,
             ExecMode mode = ExecMode::parallel) const;

    /// Stability bound used by integrate()'s precheck: max over (k,j) of the
    /// total move intensity out of level k at u_j for the given profile.
    double max_total_rate(const DensityProfile& profile) const;

    IntegrationResult integrate(const DensityProfile& initial, double horizon, double dt,
                                const IntegrationOptions& options = {},
                                ExecMode mode = ExecMode::parallel) const;

    const GridRateTables& tables() const { return tables_; }

  private:
    void gain_loss_fields(const DensityProfile& profile, std::vector<double>& out_field,
                          std::vector<double>& in_field, ExecMode mode) const;

    GridRateTables tables_;
    bool finite_;
};

/// Convenience wrapper matching the one-shot operation shape.
std::vector<double> meanfield_rhs(const DensityProfile& profile, const RatePolicy& policy);

/// (1/M) sum_j rho_k(u_j) f(u_j): the grid pairing used when comparing
/// empirical fields against the mean-field solution.
double profile_pairing(const DensityProfile& profile, int k, const TestFn& f);

} // namespace conserva

#endif
