#include "conserva/checks.hpp"

#include <cmath>
#include <sstream>

#include "conserva/io.hpp"

namespace conserva {

bool all_pass(std::span<const GateResult> gates) {
    for (const auto& g : gates) {
        if (!g.pass) return false;
    }
    return true;
}

std::string format_gate(const GateResult& gate) {
    return (gate.pass ? "PASS " : "FAIL ") + gate.name +
           (gate.detail.empty() ? "" : "  [" + gate.detail + "]");
}

GateResult gate_hydro_finite(const ConvergenceReport& report) {
    GateResult g{"hydro_finite_l2", false, ""};
    std::ostringstream d;
    d << "mse:";
    for (const auto& p : report.points) d << " " << format_double(p.mse);
    d << " var_slope=" << format_double(report.variance_slope.slope)
      << "+-" << format_double(report.variance_slope.slope_se);
    g.detail = d.str();
    g.pass = report.monotone_decreasing && report.variance_slope.defined &&
             report.variance_slope.slope <= -0.8;
    return g;
}

GateResult gate_field_match(int level, double mean, double se, double reference,
                            int replicas) {
    GateResult g{"field_match_k" + std::to_string(level), false, ""};
    const double diff = std::abs(mean - reference);
    g.pass = diff <= 3.0 * se;
    std::ostringstream d;
    d << "mean=" << format_double(mean) << " ref=" << format_double(reference)
      << " se=" << format_double(se) << " R=" << replicas;
    g.detail = d.str();
    return g;
}

GateResult gate_meanfield_conservation(const IntegrationResult& result) {
    GateResult g{"meanfield_conservation", false, ""};
    g.pass = result.max_normalization_error <= 1e-8 && result.max_mass_drift <= 1e-8 &&
             result.min_value >= -1e-8;
    std::ostringstream d;
    d << "norm_drift=" << format_double(result.max_normalization_error)
      << " mass_drift=" << format_double(result.max_mass_drift)
      << " min=" << format_double(result.min_value);
    g.detail = d.str();
    return g;
}

GateResult gate_tail(const TailReport& report) {
    GateResult g{"truncation_tail", !report.flagged, ""};
    std::ostringstream d;
    for (const auto& e : report.ladder) {
        d << "M'=" << e.level << ":" << format_double(e.sup_tail) << " ";
    }
    g.detail = d.str();
    return g;
}

GateResult gate_sim_conservation(std::span<const ReplicaEnsemble> ensembles,
                                 std::uint64_t min_events) {
    GateResult g{"sim_conservation", true, ""};
    std::uint64_t audited = 0;
    for (const auto& ens : ensembles) {
        for (const auto& traj : ens.replicas) {
            audited += traj.audited_events;
            if (traj.snapshots.empty()) continue;
            const std::int64_t total0 = traj.snapshots.front().total;
            for (const auto& snap : traj.snapshots) {
                if (snap.recompute_total() != total0 || snap.total != total0) {
                    g.pass = false;
                }
            }
        }
    }
    if (audited < min_events) g.pass = false;
    g.detail = "audited_events=" + std::to_string(audited) +
               " required=" + std::to_string(min_events);
    return g;
}

GateResult gate_decay(const DecayReport& report) {
    GateResult g{"covariance_decay", false, ""};
    std::ostringstream d;
    for (const auto& p : report.points) {
        d << "N=" << p.n_sites << ":" << format_double(p.max_abs_covariance) << " ";
    }
    if (report.degenerate || !report.slope.defined) {
        g.detail = d.str() + "degenerate (no usable decay signal)";
        return g;
    }
    const double hi = report.slope.slope + 1.959963984540054 * report.slope.slope_se;
    g.pass = report.slope.slope <= -0.8 && hi < -0.5;
    d << "slope=" << format_double(report.slope.slope) << " ci_high=" << format_double(hi);
    g.detail = d.str();
    return g;
}

GateResult gate_overlap(std::span<const OverlapEstimate> estimates) {
    GateResult g{"influence_overlap", true, ""};
    std::ostringstream d;
    double scaled_min = 0.0, scaled_max = 0.0;
    bool first = true;
    for (const auto& e : estimates) {
        if (e.estimate > e.explicit_bound) g.pass = false;
        const double scaled = e.estimate * e.n_sites;
        if (first || scaled < scaled_min) scaled_min = scaled;
        if (first || scaled > scaled_max) scaled_max = scaled;
        first = false;
        d << "N=" << e.n_sites << ":" << format_double(e.estimate)
          << "<=" << format_double(e.explicit_bound) << " ";
    }
    if (estimates.size() >= 2) {
        if (!(scaled_min > 0.0) || scaled_max / scaled_min > 1.5) g.pass = false;
        d << "N*p in [" << format_double(scaled_min) << ", " << format_double(scaled_max)
          << "]";
    }
    g.detail = d.str();
    return g;
}

GateResult gate_fluct_initial(double projected, double reference) {
    GateResult g{"fluctuation_t0", false, ""};
    g.pass = std::abs(projected - reference) <= 1e-6;
    g.detail = "projected=" + format_double(projected) +
               " reference=" + format_double(reference);
    return g;
}

GateResult gate_fluct_dynamic(double t, double empirical, double std_error, double theory) {
    GateResult g{"fluctuation_t" + format_double(t), false, ""};
    const double tol = std::max(0.10 * std::abs(theory), 3.0 * std_error);
    g.pass = std::abs(empirical - theory) <= tol;
    g.detail = "empirical=" + format_double(empirical) + " theory=" + format_double(theory) +
               " tol=" + format_double(tol);
    return g;
}

} // namespace conserva
