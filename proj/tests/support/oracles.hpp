#ifndef CONSERVA_TEST_ORACLES_HPP
#define CONSERVA_TEST_ORACLES_HPP

// Independent reference computations used only by the test suites. Everything
// here recomputes expected values from first principles (dense generators,
// exhaustive enumeration, refined quadrature) without touching the library's
// simulation or integration paths.

#include <cstdint>
#include <span>
#include <vector>

#include "conserva/graphical.hpp"
#include "conserva/linalg.hpp"
#include "conserva/model.hpp"
#include "conserva/sim.hpp"

namespace conserva::test {

/// Dense matrix exponential action p^T exp(Q t) via scaling and squaring with
/// a high-order Taylor series; fine for the few-site master equations here.
Matrix matrix_exponential(const Matrix& a);

/// Master equation of the N-site process on the full state space (K+1)^N.
/// Builds the generator from the policy rates, exponentiates, and exposes
/// the exact law at time t.
class MasterEquation {
  public:
    MasterEquation(const RatePolicy& policy, int n_sites, int max_count);

    int state_count() const { return int(states_.size()); }
    const std::vector<std::int32_t>& state(int idx) const { return states_[idx]; }
    int state_index(std::span<const std::int32_t> counts) const;

    /// Distribution at time t from an initial distribution over states.
    std::vector<double> law_at(std::span<const double> initial, double t) const;

    /// Product initial distribution with per-site level probabilities
    /// probs[site][level].
    std::vector<double> product_initial(
        const std::vector<std::vector<double>>& site_level_probs) const;

    /// P(eta_t(site) = level) under the given initial distribution.
    double marginal(std::span<const double> law, int site, int level) const;

    /// P(eta_t(x) = k1, eta_t(y) = k2).
    double joint(std::span<const double> law, int x, int k1, int y, int k2) const;

  private:
    int n_sites_;
    int base_; // max_count + 1 levels per site
    std::vector<std::vector<std::int32_t>> states_;
    Matrix generator_;
};

/// Exhaustive influence-set oracle: enumerates every strictly-increasing
/// chain over an explicit arrow list (2^E subsets, E small) and reports each
/// site's minimal chain length to the root, or -1 when unreachable.
std::vector<int> influence_layers_bruteforce(int n_sites, std::span<const Arrow> arrows,
                                             int root, double t);

/// Single-particle semigroup oracle for independent-particle (linear) models:
/// site-to-site generator q(i,j) = phi(u_i, u_j)/N, marginal of eta_t(i) is
/// Poisson with mean sum_j psi(u_j) p_t(j, i).
std::vector<double> independent_particle_means(const PairKernel& phi, const HarmonicFn& psi,
                                               int n_sites, double t);

} // namespace conserva::test

#endif
