#ifndef CONSERVA_CHECKS_HPP
#define CONSERVA_CHECKS_HPP

#include <span>
#include <string>
#include <vector>

#include "conserva/fields.hpp"
#include "conserva/graphical.hpp"
#include "conserva/meanfield.hpp"

namespace conserva {

/// One pass/fail gate with its measured numbers. The thresholds live here,
/// pinned in code; both the CLI --check mode and the acceptance suite run
/// through these.
struct GateResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

bool all_pass(std::span<const GateResult> gates);
std::string format_gate(const GateResult& gate);

/// Hydrodynamic convergence, finite capacity: L2 error strictly decreasing in
/// N and the variance-component log-log slope at most -0.8.
GateResult gate_hydro_finite(const ConvergenceReport& report);

/// Unbounded-capacity field match: |mean(mu) - reference| within 3 standard
/// errors, one gate per tracked level.
GateResult gate_field_match(int level, double mean, double se, double reference, int replicas);

/// Conservation / normalization of a mean-field run: normalization and mass
/// functional drift both at most 1e-8.
GateResult gate_meanfield_conservation(const IntegrationResult& result);

/// Truncation health: first-moment tail at kmax/2 at most 1e-8.
GateResult gate_tail(const TailReport& report);

/// Exact conservation of simulated trajectories: audited event count at least
/// `min_events` and every snapshot total equal to the initial one.
GateResult gate_sim_conservation(std::span<const ReplicaEnsemble> ensembles,
                                 std::uint64_t min_events);

/// Covariance decay: log-log slope at most -0.8 with the 95% interval
/// excluding -0.5.
GateResult gate_decay(const DecayReport& report);

/// Influence-set overlap: every estimate below the explicit constant over N,
/// and N*estimate spread below 50%.
GateResult gate_overlap(std::span<const OverlapEstimate> estimates);

/// Fluctuation variance at t = 0 against the closed-form integral: 1e-6.
GateResult gate_fluct_initial(double projected, double reference);

/// Fluctuation variance at t > 0: within max(10% relative, 3 standard errors).
GateResult gate_fluct_dynamic(double t, double empirical, double std_error, double theory);

} // namespace conserva

#endif
