#include "conserva/commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "conserva/checks.hpp"
#include "conserva/errors.hpp"
#include "conserva/fields.hpp"
#include "conserva/graphical.hpp"
#include "conserva/io.hpp"
#include "conserva/meanfield.hpp"
#include "conserva/ou.hpp"
#include "conserva/rng.hpp"

namespace conserva {

namespace {

using nlohmann::json;

struct Resolved {
    ExperimentConfig config;
    std::string out_dir;
    std::uint64_t seed;
    ExecMode mode;
};

Resolved resolve(const ExperimentConfig& config, const CommandOptions& options,
                 const char* command) {
    Resolved r{config, options.out_dir.value_or(config.output_dir),
               options.seed.value_or(config.seed), options.mode};
    r.config.seed = r.seed;
    ensure_directory(r.out_dir);
    (void)command;
    return r;
}

std::vector<std::string> preamble(const Resolved& r, const char* command) {
    std::vector<std::string> lines;
    lines.push_back(std::string("conserva ") + command);
    lines.push_back("seed = " + std::to_string(r.seed));
    for (const auto& l : r.config.raw.dump()) lines.push_back(l);
    return lines;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

json config_json(const Resolved& r) {
    json arr = json::array();
    for (const auto& line : r.config.raw.dump()) arr.push_back(line);
    return arr;
}

json gates_json(std::span<const GateResult> gates) {
    json arr = json::array();
    for (const auto& g : gates) {
        arr.push_back({{"name", g.name}, {"pass", g.pass}, {"detail", g.detail}});
    }
    return arr;
}

bool finish(std::vector<GateResult>& gates, const CommandOptions& options) {
    if (!options.check) return true;
    for (const auto& g : gates) std::cout << format_gate(g) << "\n";
    return all_pass(gates);
}

TestFn field_test_fn(const ExperimentConfig& config) {
    if (!config.raw.keys_with_prefix("fields", "f").empty() ||
        config.raw.has("fields", "f.c0")) {
        return parse_harmonic(config.raw, "fields", "f");
    }
    // Default probe: the first cosine mode.
    return HarmonicFn(0.0, {{1, 0.0, 1.0}});
}

int field_level(const ExperimentConfig& config) {
    return int(config.raw.get_int_or("fields", "k", 1));
}

void write_trajectories(const Resolved& r, const char* command,
                        std::span<const ReplicaEnsemble> ensembles) {
    CsvWriter csv(r.out_dir + "/trajectories.csv", preamble(r, command),
                  {"replica", "time", "site", "count"});
    std::int64_t replica_base = 0;
    for (const auto& ens : ensembles) {
        for (std::size_t rep = 0; rep < ens.replicas.size(); ++rep) {
            const Trajectory& traj = ens.replicas[rep];
            for (std::size_t ti = 0; ti < traj.observation_times.size(); ++ti) {
                for (int site = 0; site < ens.n_sites; ++site) {
                    csv.cell(replica_base + std::int64_t(rep));
                    csv.cell(traj.observation_times[ti]);
                    csv.cell(std::int64_t(site));
                    csv.cell(std::int64_t(traj.snapshots[ti].counts[site]));
                    csv.end_row();
                }
            }
        }
        replica_base += std::int64_t(ens.replicas.size());
    }
}

} // namespace

bool cmd_simulate(const ExperimentConfig& config, const CommandOptions& options) {
    Resolved r = resolve(config, options, "simulate");
    const RatePolicy policy = r.config.make_policy();
    const InitialProfile profile = r.config.make_profile();

    SimOptions sim_opts;
    sim_opts.audit_conservation = true;

    ReplicaEnsemble ens =
        run_replicas(profile, policy, r.config.n_sites, r.config.horizon,
                     r.config.observation_times, r.config.replicas, r.seed, sim_opts, r.mode);

    write_trajectories(r, "simulate", {{ens}});

    std::uint64_t candidates = 0, accepted = 0, audited = 0;
    for (const auto& t : ens.replicas) {
        candidates += t.candidate_count;
        accepted += t.accepted_count;
        audited += t.audited_events;
    }
    json summary = {
        {"command", "simulate"},
        {"N", r.config.n_sites},
        {"replicas", r.config.replicas},
        {"seed", r.seed},
        {"config", config_json(r)},
        {"candidate_events", candidates},
        {"accepted_events", accepted},
        {"audited_events", audited},
    };

    std::vector<GateResult> gates;
    gates.push_back(gate_sim_conservation({{ens}}, accepted));
    summary["gates"] = gates_json(gates);
    write_json(r.out_dir + "/simulate_summary.json", summary);
    return finish(gates, options);
}

bool cmd_meanfield(const ExperimentConfig& config, const CommandOptions& options) {
    Resolved r = resolve(config, options, "meanfield");
    const RatePolicy policy = r.config.make_policy();
    const Capacity cap = policy.capacity();
    const int kmax = cap.is_finite() ? cap.value() : r.config.resolved_kmax();

    const InitReport init = init_profile(r.config.psi, cap, kmax, r.config.grid_size);
    MeanfieldSystem system(policy, kmax, r.config.grid_size);
    IntegrationOptions iopts;
    iopts.save_stride = r.config.save_stride;
    const IntegrationResult result =
        system.integrate(init.profile, r.config.horizon, r.config.dt, iopts, r.mode);

    {
        CsvWriter csv(r.out_dir + "/meanfield_series.csv", preamble(r, "meanfield"),
                      {"time", "k", "grid_index", "value"});
        for (const auto& prof : result.series) {
            for (int k = 0; k <= prof.kmax; ++k) {
                for (int j = 0; j < prof.grid_size; ++j) {
                    csv.cell(prof.time);
                    csv.cell(std::int64_t(k));
                    csv.cell(std::int64_t(j));
                    csv.cell(prof.at(k, j));
                    csv.end_row();
                }
            }
        }
    }

    // Step-halving self-convergence report.
    const IntegrationResult half =
        system.integrate(init.profile, r.config.horizon, r.config.dt / 2.0, iopts, r.mode);
    const IntegrationResult quarter =
        system.integrate(init.profile, r.config.horizon, r.config.dt / 4.0, iopts, r.mode);
    double diff1 = 0.0, diff2 = 0.0;
    for (std::size_t i = 0; i < result.series.back().values.size(); ++i) {
        diff1 = std::max(diff1, std::abs(result.series.back().values[i] -
                                         half.series.back().values[i]));
        diff2 = std::max(diff2, std::abs(half.series.back().values[i] -
                                         quarter.series.back().values[i]));
    }
    const double order = (diff2 > 0.0) ? std::log2(diff1 / diff2) : 0.0;

    json summary = {
        {"command", "meanfield"},
        {"seed", r.seed},
        {"config", config_json(r)},
        {"M", r.config.grid_size},
        {"kmax", kmax},
        {"dt", r.config.dt},
        {"T", r.config.horizon},
        {"normalization_drift", result.max_normalization_error},
        {"mass_drift", result.max_mass_drift},
        {"min_value", result.min_value},
        {"init_dropped_mass", init.dropped_mass},
        {"richardson", {{"diff_dt_dt2", diff1}, {"diff_dt2_dt4", diff2}, {"order", order}}},
    };

    std::vector<GateResult> gates;
    gates.push_back(gate_meanfield_conservation(result));
    if (!cap.is_finite()) {
        const TailReport tail = tail_check(result.series.back());
        gates.push_back(gate_tail(tail));
        json ladder = json::array();
        for (const auto& e : tail.ladder) {
            ladder.push_back({{"level", e.level}, {"sup_tail", e.sup_tail}});
        }
        summary["tail"] = {{"ladder", ladder},
                           {"log_slope", tail.log_slope},
                           {"flagged", tail.flagged}};
    }
    summary["gates"] = gates_json(gates);
    write_json(r.out_dir + "/meanfield_summary.json", summary);
    return finish(gates, options);
}

bool cmd_hydro(const ExperimentConfig& config, const CommandOptions& options) {
    Resolved r = resolve(config, options, "hydro");
    const RatePolicy policy = r.config.make_policy();
    const InitialProfile profile = r.config.make_profile();
    const Capacity cap = policy.capacity();
    const int kmax = cap.is_finite() ? cap.value() : r.config.resolved_kmax();
    const double t = r.config.horizon;
    const TestFn f = field_test_fn(r.config);
    const int k = field_level(r.config);

    const InitReport init = init_profile(r.config.psi, cap, kmax, r.config.grid_size);
    MeanfieldSystem system(policy, kmax, r.config.grid_size);
    IntegrationOptions iopts;
    iopts.save_stride = std::max(1, int(std::llround(t / r.config.dt)));
    const IntegrationResult mf = system.integrate(init.profile, t, r.config.dt, iopts, r.mode);
    const DensityProfile& reference = mf.series.back();

    std::vector<ReplicaEnsemble> ensembles;
    const std::vector<double> obs = {t};
    for (std::size_t i = 0; i < r.config.n_list.size(); ++i) {
        ensembles.push_back(run_replicas(profile, policy, r.config.n_list[i], t, obs,
                                         r.config.replicas,
                                         Rng::stream(r.seed, i).next_u64(), {}, r.mode));
    }

    const ConvergenceReport report = convergence_report(ensembles, reference, t, k, f);

    {
        CsvWriter csv(r.out_dir + "/hydro_convergence.csv", preamble(r, "hydro"),
                      {"N", "replicas", "reference", "mean", "mse", "mse_se", "variance",
                       "bias_sq"});
        for (const auto& p : report.points) {
            csv.cell(std::int64_t(p.n_sites));
            csv.cell(std::int64_t(p.replicas));
            csv.cell(p.reference);
            csv.cell(p.mean_field);
            csv.cell(p.mse);
            csv.cell(p.mse_se);
            csv.cell(p.variance_term);
            csv.cell(p.bias_sq_term);
            csv.end_row();
        }
    }

    json summary = {
        {"command", "hydro"},
        {"seed", r.seed},
        {"config", config_json(r)},
        {"k", k},
        {"t", t},
        {"mse_slope", report.mse_slope.slope},
        {"variance_slope", report.variance_slope.slope},
        {"variance_slope_se", report.variance_slope.slope_se},
        {"monotone_decreasing", report.monotone_decreasing},
        {"slope_defined", report.variance_slope.defined},
    };

    std::vector<GateResult> gates;
    if (r.config.n_list.size() >= 2) {
        if (cap.is_finite()) {
            gates.push_back(gate_hydro_finite(report));
        }
    }
    if (!cap.is_finite()) {
        // Matching check per tracked low level against the mean-field
        // reference, on the largest N.
        const ReplicaEnsemble& ens = ensembles.back();
        const int ti = ens.time_index(t);
        for (int level = 0; level <= std::min(3, kmax); ++level) {
            const int rr = int(ens.replicas.size());
            std::vector<double> mu(rr);
            for (int rep = 0; rep < rr; ++rep) {
                mu[rep] = empirical_density(ens.snapshot(rep, ti), level, f);
            }
            double mean = 0.0;
            for (double m : mu) mean += m;
            mean /= rr;
            double var = 0.0;
            for (double m : mu) var += (m - mean) * (m - mean);
            var /= (rr - 1);
            const double se = std::sqrt(var / rr);
            gates.push_back(gate_field_match(level, mean, se,
                                             profile_pairing(reference, level, f), rr));
        }
    }
    summary["gates"] = gates_json(gates);
    write_json(r.out_dir + "/hydro_summary.json", summary);
    return finish(gates, options);
}

bool cmd_fluct(const ExperimentConfig& config, const CommandOptions& options) {
    Resolved r = resolve(config, options, "fluct");
    const RatePolicy policy = r.config.make_policy();
    if (!policy.capacity().is_finite()) {
        throw validation_error("fluct: the fluctuation limit is built for finite capacity");
    }
    const InitialProfile profile = r.config.make_profile();
    const int cap = policy.capacity().value();
    const int m_grid = r.config.grid_size;
    const TestFn f = field_test_fn(r.config);
    const int k = field_level(r.config);
    const double horizon = r.config.horizon;

    std::vector<double> times = r.config.observation_times;
    if (r.config.raw.has("fields", "times")) {
        times = r.config.raw.get_list("fields", "times");
        std::sort(times.begin(), times.end());
    }

    // Mean-field profiles saved on the Lyapunov step grid.
    const InitReport init = init_profile(r.config.psi, policy.capacity(), cap, m_grid);
    MeanfieldSystem system(policy, cap, m_grid);
    IntegrationOptions iopts;
    iopts.save_stride = r.config.save_stride;
    const IntegrationResult mf = system.integrate(init.profile, horizon, r.config.dt, iopts,
                                                  r.mode);

    const double dt_lyap = r.config.dt * r.config.save_stride;
    CovarianceState sigma0 = initial_covariance(r.config.psi, cap, m_grid);
    EvolveOptions eopts;
    eopts.keep_times = times;
    const std::vector<CovarianceState> sigmas =
        evolve_covariance(sigma0, mf.series, policy, horizon, dt_lyap, eopts, r.mode);

    // Simulated fluctuation variance with a split-half plug-in: site
    // probabilities from the first half, fields over the second half.
    ReplicaEnsemble ens = run_replicas(profile, policy, r.config.n_sites, horizon, times,
                                       r.config.replicas, r.seed, {}, r.mode);
    const int half = int(ens.replicas.size()) / 2;
    if (half < 2) throw validation_error("fluct: need at least 4 replicas for split halves");

    // Covariance series: one binary matrix dump per kept time, JSON metadata,
    // and the projected covariances for every level pair.
    {
        json meta = {{"levels", cap + 1}, {"M", m_grid}, {"seed", r.seed},
                     {"times", json::array()}, {"files", json::array()},
                     {"config", config_json(r)}};
        CsvWriter proj_csv(r.out_dir + "/fluct_projections.csv", preamble(r, "fluct"),
                           {"t", "k", "m", "value"});
        for (std::size_t i = 0; i < sigmas.size(); ++i) {
            const std::string file = "sigma_" + std::to_string(i) + ".mat";
            write_matrix(r.out_dir + "/" + file, sigmas[i].sigma);
            meta["times"].push_back(sigmas[i].time);
            meta["files"].push_back(file);
            for (int kk = 0; kk <= cap; ++kk) {
                for (int mm = 0; mm <= cap; ++mm) {
                    proj_csv.cell(sigmas[i].time);
                    proj_csv.cell(std::int64_t(kk));
                    proj_csv.cell(std::int64_t(mm));
                    proj_csv.cell(project(sigmas[i], f, f, kk, mm));
                    proj_csv.end_row();
                }
            }
        }
        write_json(r.out_dir + "/sigma_series.json", meta);
    }

    std::vector<GateResult> gates;
    json rows = json::array();
    CsvWriter csv(r.out_dir + "/fluct_comparison.csv", preamble(r, "fluct"),
                  {"t", "k", "var_empirical", "var_se", "var_theory"});

    // Closed-form initial variance of the level-k field for the t=0 gate,
    // via refined quadrature of psi's level probabilities.
    const auto initial_reference = [&]() {
        const int fine = 8192;
        double acc = 0.0;
        for (int j = 0; j < fine; ++j) {
            const double u = double(j + 1) / fine;
            const double p = r.config.psi(u);
            double pk = 1.0;
            {
                double logp = std::lgamma(cap + 1.0) - std::lgamma(k + 1.0) -
                              std::lgamma(cap - k + 1.0) + k * std::log(p / cap) +
                              (cap - k) * std::log1p(-p / cap);
                pk = std::exp(logp);
            }
            const double fv = f(u);
            acc += pk * (1.0 - pk) * fv * fv;
        }
        return acc / fine;
    };

    for (double t : times) {
        const int ti = ens.time_index(t);
        // Per-site occupancy frequencies from the probe half.
        std::vector<double> probs(ens.n_sites, 0.0);
        for (int rep = 0; rep < half; ++rep) {
            const Configuration& cfg = ens.snapshot(rep, ti);
            for (int i = 0; i < ens.n_sites; ++i) {
                if (cfg.counts[i] == k) probs[i] += 1.0;
            }
        }
        for (double& p : probs) p /= half;

        const int nb = int(ens.replicas.size()) - half;
        std::vector<double> v(nb);
        for (int rep = 0; rep < nb; ++rep) {
            v[rep] = fluctuation_field(ens.snapshot(half + rep, ti), probs, k, f);
        }
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= nb;
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= (nb - 1);
        const double var_se = var * std::sqrt(2.0 / (nb - 1));

        double theory = 0.0;
        for (const auto& s : sigmas) {
            if (std::abs(s.time - t) < 1e-9) theory = project(s, f, f, k, k);
        }

        csv.cell(t);
        csv.cell(std::int64_t(k));
        csv.cell(var);
        csv.cell(var_se);
        csv.cell(theory);
        csv.end_row();
        rows.push_back({{"t", t}, {"var_empirical", var}, {"var_se", var_se},
                        {"var_theory", theory}});

        if (t == 0.0) {
            gates.push_back(gate_fluct_initial(project(sigmas.front(), f, f, k, k),
                                               initial_reference()));
        } else {
            gates.push_back(gate_fluct_dynamic(t, var, var_se, theory));
        }
    }

    json summary = {{"command", "fluct"},    {"seed", r.seed},
                    {"config", config_json(r)}, {"k", k},
                    {"N", r.config.n_sites},    {"rows", rows},
                    {"gates", gates_json(gates)}};
    write_json(r.out_dir + "/fluct_summary.json", summary);
    return finish(gates, options);
}

bool cmd_indep(const ExperimentConfig& config, const CommandOptions& options) {
    Resolved r = resolve(config, options, "indep");
    const RatePolicy policy = r.config.make_policy();
    const InitialProfile profile = r.config.make_profile();

    const double t = r.config.raw.get_double_or("indep", "t", 0.5);
    std::vector<GateResult> gates;

    // Covariance decay across the N sweep.
    std::vector<int> decay_n = r.config.n_list;
    if (r.config.raw.has("indep", "decay_N_list")) {
        decay_n = r.config.raw.get_int_list("indep", "decay_N_list");
    }
    const int decay_replicas =
        int(r.config.raw.get_int_or("indep", "decay_replicas", r.config.replicas));
    DecayPanel panel;
    panel.max_level = int(r.config.raw.get_int_or("indep", "panel_max_level", 3));
    const DecayReport decay = decay_study(policy, profile, t, decay_n, decay_replicas,
                                          Rng::stream(r.seed, 0x9d).next_u64(), panel, r.mode);
    {
        CsvWriter csv(r.out_dir + "/decay_points.csv", preamble(r, "indep"),
                      {"N", "replicas", "max_abs_covariance", "std_error"});
        for (const auto& p : decay.points) {
            csv.cell(std::int64_t(p.n_sites));
            csv.cell(std::int64_t(decay_replicas));
            csv.cell(p.max_abs_covariance);
            csv.cell(p.std_error);
            csv.end_row();
        }
    }
    if (decay_n.size() >= 2) gates.push_back(gate_decay(decay));

    // Influence-set overlap study.
    std::vector<int> overlap_n = decay_n;
    if (r.config.raw.has("indep", "overlap_N_list")) {
        overlap_n = r.config.raw.get_int_list("indep", "overlap_N_list");
    }
    const double overlap_T = r.config.raw.get_double_or("indep", "overlap_T", t);
    const std::size_t overlap_reps =
        std::size_t(r.config.raw.get_int_or("indep", "overlap_replicas", 10000));
    double envelope = 0.0;
    if (r.config.raw.has("indep", "overlap_envelope")) {
        envelope = r.config.raw.get_double("indep", "overlap_envelope");
    } else {
        envelope = sup_rate(policy, 64);
    }

    std::vector<OverlapEstimate> overlaps;
    for (std::size_t i = 0; i < overlap_n.size(); ++i) {
        const int n = overlap_n[i];
        overlaps.push_back(overlap_probability(n, envelope, overlap_T, 0, n / 2, overlap_reps,
                                               Rng::stream(r.seed, 0x0e + i).next_u64(),
                                               r.mode));
    }
    {
        CsvWriter csv(r.out_dir + "/overlap_points.csv", preamble(r, "indep"),
                      {"N", "replicas", "estimate", "ci_low", "ci_high", "paper_bound"});
        for (const auto& e : overlaps) {
            csv.cell(std::int64_t(e.n_sites));
            csv.cell(std::int64_t(e.replicas));
            csv.cell(e.estimate);
            csv.cell(e.ci_low);
            csv.cell(e.ci_high);
            csv.cell(e.explicit_bound);
            csv.end_row();
        }
    }
    gates.push_back(gate_overlap(overlaps));

    json summary = {
        {"command", "indep"},
        {"seed", r.seed},
        {"config", config_json(r)},
        {"t", t},
        {"decay_slope", decay.slope.slope},
        {"decay_slope_se", decay.slope.slope_se},
        {"decay_degenerate", decay.degenerate},
        {"overlap_envelope", envelope},
        {"gates", gates_json(gates)},
    };
    write_json(r.out_dir + "/indep_summary.json", summary);
    return finish(gates, options);
}

} // namespace conserva
