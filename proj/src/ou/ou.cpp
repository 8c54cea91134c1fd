#include "conserva/ou.hpp"

#include <algorithm>
#include <cmath>

#include "conserva/errors.hpp"
#include "conserva/rng.hpp"

namespace conserva {

namespace {

double binomial_pmf(int n, int k, double p) {
    const double lg =
        std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    return std::exp(lg + k * std::log(p) + (n - k) * std::log1p(-p));
}

// A jump on channel (m,l) moves the source site from level m to m-1 and the
// destination from level l to l+1, so its effect on the level-k field is
// coeff_src(k,m) at the source coordinate and coeff_dst(k,l) at the
// destination coordinate. Every case of the drift and noise operator tables
// is this one rule.
inline double coeff_src(int k, int m) {
    return (k == m - 1 ? 1.0 : 0.0) - (k == m ? 1.0 : 0.0);
}
inline double coeff_dst(int k, int l) {
    return (k == l + 1 ? 1.0 : 0.0) - (k == l ? 1.0 : 0.0);
}

void require_finite(const RatePolicy& policy, const char* what) {
    if (!policy.capacity().is_finite()) {
        throw validation_error(std::string(what) + ": finite capacity only");
    }
}

} // namespace

CovarianceState initial_covariance(const HarmonicFn& psi, int capacity, int grid_size) {
    if (capacity < 1) throw validation_error("initial_covariance: capacity must be >= 1");
    if (grid_size < 1) throw validation_error("initial_covariance: grid size must be >= 1");
    const int levels = capacity + 1;
    CovarianceState state;
    state.time = 0.0;
    state.levels = levels;
    state.grid_size = grid_size;
    state.sigma = Matrix(levels * grid_size, levels * grid_size);

    // Multinomial-style covariance of the level indicators, diagonal across
    // grid points; the factor M is the density-representation weight of the
    // Dirac at u_j.
    for (int j = 0; j < grid_size; ++j) {
        const double u = double(j + 1) / grid_size;
        const double v = psi(u);
        if (!(v > 0.0) || !(v < capacity)) {
            throw validation_error("initial_covariance: psi outside (0, K) on the grid");
        }
        std::vector<double> p(levels);
        for (int k = 0; k < levels; ++k) p[k] = binomial_pmf(capacity, k, v / capacity);
        for (int k = 0; k < levels; ++k) {
            for (int m = 0; m < levels; ++m) {
                const double c = p[k] * ((k == m ? 1.0 : 0.0) - p[m]);
                state.sigma(k * grid_size + j, m * grid_size + j) = c * grid_size;
            }
        }
    }
    return state;
}

DriftOperator build_drift(const DensityProfile& profile, const RatePolicy& policy) {
    require_finite(policy, "build_drift");
    GridRateTables tables(policy, policy.capacity().value(), profile.grid_size);
    return build_drift(profile, tables);
}

DriftOperator build_drift(const DensityProfile& profile, const GridRateTables& tables) {
    const int K = tables.kmax();
    const int M = tables.grid_size();
    if (profile.kmax != K || profile.grid_size != M) {
        throw validation_error("build_drift: profile does not match the rate tables");
    }
    const int dim = (K + 1) * M;
    DriftOperator drift;
    drift.time = profile.time;
    drift.levels = K + 1;
    drift.grid_size = M;
    drift.matrix = Matrix(dim, dim);
    Matrix& a = drift.matrix;
    const double inv_m = 1.0 / M;

    // The pairing <V_k, f> drifts by sum_channels of the source and
    // destination contributions; collecting the action on component mc gives
    // an operator G_{k,mc} on test vectors, and the drift block acting on the
    // density representation is its transpose against the grid weights.
    //
    // Channel (m,l): intensity kernel phi_{m,l}(u,v) rho_m(u) rho_l(v).
    // Linearizing in rho_m and rho_l:
    //   G_{k,m} f += coeff_src(k,m) f(u) I_l(u) + coeff_dst(k,l) (T_l f)(u)
    //   G_{k,l} f += coeff_src(k,m) (S_m f)(v) + coeff_dst(k,l) f(v) J_m(v)
    // where I_l(u) = int phi(u,v) rho_l(v) dv, (T_l f)(u) = int phi(u,v)
    // rho_l(v) f(v) dv, J_m(v) = int phi(u,v) rho_m(u) du and (S_m f)(v) =
    // int phi(u,v) rho_m(u) f(u) du, all as M-point Riemann sums.
    for (int m = 0; m <= K; ++m) {
        const double* rho_m = profile.level(m);
        for (int l = 0; l <= K; ++l) {
            const double* rho_l = profile.level(l);
            const double* tb = tables.table(m, l);

            // Only levels with a nonzero coefficient see this channel.
            const int src_ks[2] = {m - 1, m};
            const int dst_ks[2] = {l, l + 1};

            // I_l(u) = int phi(u,v) rho_l(v) dv and J_m(v) = int phi(u,v)
            // rho_m(u) du on the grid.
            std::vector<double> i_l(M, 0.0), j_m(M, 0.0);
            for (int j = 0; j < M; ++j) {
                const double* row = tb + std::size_t(j) * M;
                double acc = 0.0;
                for (int jp = 0; jp < M; ++jp) acc += row[jp] * rho_l[jp];
                i_l[j] = acc * inv_m;
            }
            for (int jp = 0; jp < M; ++jp) {
                double acc = 0.0;
                for (int j = 0; j < M; ++j) acc += tb[std::size_t(j) * M + jp] * rho_m[j];
                j_m[jp] = acc * inv_m;
            }

            for (int k : src_ks) {
                if (k < 0 || k > K) continue;
                const double cu = coeff_src(k, m);
                if (cu == 0.0) continue;
                // G_{k,m} f(u_j) += cu * [f(u_j) I_l(u_j)]; transpose lands on
                // block row k, column m as diag(I_l).
                for (int j = 0; j < M; ++j) {
                    a(k * M + j, m * M + j) += cu * i_l[j];
                }
                // G_{k,l} += cu * S_m with (S_m f)(v) = int phi(u,v) rho_m(u)
                // f(u) du; the density-side block (k,l) picks up S_m^T, whose
                // (u_j, u_jp) entry is phi(u_j, u_jp) rho_m(u_j) / M.
                for (int j = 0; j < M; ++j) {
                    const double w = cu * rho_m[j] * inv_m;
                    if (w == 0.0) continue;
                    const double* row = tb + std::size_t(j) * M;
                    for (int jp = 0; jp < M; ++jp) {
                        a(k * M + j, l * M + jp) += w * row[jp];
                    }
                }
            }
            for (int k : dst_ks) {
                if (k < 0 || k > K) continue;
                const double cv = coeff_dst(k, l);
                if (cv == 0.0) continue;
                // G_{k,m} += cv * T_l with (T_l f)(u) = int phi(u,v) rho_l(v)
                // f(v) dv; its transpose on block (k,m) has (u_j, u_jp) entry
                // phi(u_jp, u_j) rho_l(u_j) / M.
                for (int j = 0; j < M; ++j) {
                    const double w = cv * rho_l[j] * inv_m;
                    if (w == 0.0) continue;
                    for (int jp = 0; jp < M; ++jp) {
                        a(k * M + j, m * M + jp) += w * tb[std::size_t(jp) * M + j];
                    }
                }
                // G_{k,l} f(v) += cv * f(v) J_m(v): diagonal on block (k,l).
                for (int j = 0; j < M; ++j) {
                    a(k * M + j, l * M + j) += cv * j_m[j];
                }
            }
        }
    }
    return drift;
}

NoiseCovariance build_noise_cov(const DensityProfile& profile, const RatePolicy& policy) {
    require_finite(policy, "build_noise_cov");
    GridRateTables tables(policy, policy.capacity().value(), profile.grid_size);
    NoiseCovariance noise = build_noise_cov(profile, tables);
    // Assembly check: the channel structure is a sum of B B^T terms, so any
    // negative eigenvalue beyond rounding means a broken assembly.
    const Matrix& q = noise.matrix;
    const double scale = q.max_abs();
    if (scale > 0.0) {
        const double min_eig = min_eigenvalue_estimate(q, 200);
        if (min_eig < -1e-9 * scale * q.rows()) {
            throw numeric_error("build_noise_cov: assembled noise covariance is not PSD");
        }
    }
    return noise;
}

NoiseCovariance build_noise_cov(const DensityProfile& profile, const GridRateTables& tables) {
    const int K = tables.kmax();
    const int M = tables.grid_size();
    if (profile.kmax != K || profile.grid_size != M) {
        throw validation_error("build_noise_cov: profile does not match the rate tables");
    }
    const int dim = (K + 1) * M;
    NoiseCovariance noise;
    noise.time = profile.time;
    noise.levels = K + 1;
    noise.grid_size = M;
    noise.matrix = Matrix(dim, dim);
    Matrix& q = noise.matrix;

    // Channel (m,l) has squared noise kernel S(u,v) = phi(u,v) rho_m(u)
    // rho_l(v). For levels k1, k2 touched by the channel, the quadratic form
    // (1/M^2) f^T Q g must equal the double Riemann sum of
    // S(u,v) (cu1 f(u) + cv1 f(v)) (cu2 g(u) + cv2 g(v)), which splits into
    // row-sum diagonals and the S / S^T cross blocks.
    for (int m = 0; m <= K; ++m) {
        const double* rho_m = profile.level(m);
        for (int l = 0; l <= K; ++l) {
            const double* rho_l = profile.level(l);
            const double* tb = tables.table(m, l);

            // Skip channels whose kernel vanishes identically (structural
            // zeros dominate for small K).
            double kernel_max = 0.0;
            for (std::size_t i = 0; i < std::size_t(M) * M; ++i) {
                kernel_max = std::max(kernel_max, tb[i]);
            }
            if (kernel_max == 0.0) continue;

            std::vector<double> s_row(M, 0.0), s_col(M, 0.0);
            for (int j = 0; j < M; ++j) {
                const double* row = tb + std::size_t(j) * M;
                double acc = 0.0;
                for (int jp = 0; jp < M; ++jp) acc += row[jp] * rho_l[jp];
                s_row[j] = acc * rho_m[j]; // sum_{j'} S[j][j']
            }
            for (int jp = 0; jp < M; ++jp) {
                double acc = 0.0;
                for (int j = 0; j < M; ++j) acc += tb[std::size_t(j) * M + jp] * rho_m[j];
                s_col[jp] = acc * rho_l[jp]; // sum_j S[j][j']
            }

            // Candidate levels touched by this channel, deduplicated: the
            // adjacent channels (m, m-1) would otherwise repeat entries.
            int ks[4];
            int n_ks = 0;
            for (int cand : {m - 1, m, l, l + 1}) {
                if (cand < 0 || cand > K) continue;
                bool seen = false;
                for (int i = 0; i < n_ks; ++i) seen = seen || ks[i] == cand;
                if (!seen) ks[n_ks++] = cand;
            }
            for (int i1 = 0; i1 < n_ks; ++i1) {
                const int k1 = ks[i1];
                const double cu1 = coeff_src(k1, m);
                const double cv1 = coeff_dst(k1, l);
                if (cu1 == 0.0 && cv1 == 0.0) continue;
                for (int i2 = 0; i2 < n_ks; ++i2) {
                    const int k2 = ks[i2];
                    const double cu2 = coeff_src(k2, m);
                    const double cv2 = coeff_dst(k2, l);
                    if (cu2 == 0.0 && cv2 == 0.0) continue;

                    // Diagonal (u-u and v-v) contributions.
                    if (cu1 * cu2 != 0.0) {
                        for (int j = 0; j < M; ++j) {
                            q(k1 * M + j, k2 * M + j) += cu1 * cu2 * s_row[j];
                        }
                    }
                    if (cv1 * cv2 != 0.0) {
                        for (int jp = 0; jp < M; ++jp) {
                            q(k1 * M + jp, k2 * M + jp) += cv1 * cv2 * s_col[jp];
                        }
                    }
                    // Cross (u-v and v-u) contributions: S and S^T kernels.
                    if (cu1 * cv2 != 0.0) {
                        for (int j = 0; j < M; ++j) {
                            const double* row = tb + std::size_t(j) * M;
                            for (int jp = 0; jp < M; ++jp) {
                                q(k1 * M + j, k2 * M + jp) +=
                                    cu1 * cv2 * row[jp] * rho_m[j] * rho_l[jp];
                            }
                        }
                    }
                    if (cv1 * cu2 != 0.0) {
                        for (int j = 0; j < M; ++j) {
                            const double* row = tb + std::size_t(j) * M;
                            for (int jp = 0; jp < M; ++jp) {
                                q(k1 * M + jp, k2 * M + j) +=
                                    cv1 * cu2 * row[jp] * rho_m[j] * rho_l[jp];
                            }
                        }
                    }
                }
            }
        }
    }

    return noise;
}

std::vector<CovarianceState> evolve_covariance_raw(
    const CovarianceState& sigma0, const std::function<Matrix(double)>& drift_at,
    const std::function<Matrix(double)>& noise_at, double horizon, double dt,
    const EvolveOptions& options, ExecMode mode) {
    if (!(dt > 0.0)) throw validation_error("evolve_covariance: dt must be positive");
    const double span = horizon - sigma0.time;
    if (span < 0.0) throw validation_error("evolve_covariance: horizon before the start time");
    const long long steps = std::llround(span / dt);
    if (std::abs(steps * dt - span) > 1e-9 * std::max(1.0, span)) {
        throw validation_error("evolve_covariance: horizon must be an integer number of steps");
    }

    const auto keep = [&](double t) {
        if (options.keep_times.empty()) return true;
        for (double kt : options.keep_times) {
            if (std::abs(kt - t) < 1e-9) return true;
        }
        return false;
    };

    std::vector<CovarianceState> series;
    CovarianceState state = sigma0;
    if (keep(state.time)) series.push_back(state);

    Matrix k1, k2, k3, k4, tmp, work;
    const auto flow = [&](double t, const Matrix& sigma, Matrix& out) {
        const Matrix a = drift_at(t);
        const Matrix q = noise_at(t);
        matmul(a, sigma, out, mode);          // A Sigma
        Matrix at = a.transposed();
        matmul(sigma, at, work, mode);        // Sigma A^T
        add_scaled(out, 1.0, work, 1.0, out);
        add_scaled(out, 1.0, q, 1.0, out);
    };

    const double t0 = sigma0.time;
    for (long long step = 0; step < steps; ++step) {
        const double t = t0 + step * dt;
        flow(t, state.sigma, k1);
        add_scaled(state.sigma, 1.0, k1, 0.5 * dt, tmp);
        flow(t + 0.5 * dt, tmp, k2);
        add_scaled(state.sigma, 1.0, k2, 0.5 * dt, tmp);
        flow(t + 0.5 * dt, tmp, k3);
        add_scaled(state.sigma, 1.0, k3, dt, tmp);
        flow(t + dt, tmp, k4);

        add_scaled(k2, 2.0, k3, 2.0, k2);
        add_scaled(k1, 1.0, k4, 1.0, k1);
        add_scaled(k1, 1.0, k2, 1.0, k1);
        add_scaled(state.sigma, 1.0, k1, dt / 6.0, state.sigma);
        symmetrize(state.sigma);
        state.time = t0 + (step + 1) * dt;

        if (options.psd_check_stride > 0 &&
            ((step + 1) % options.psd_check_stride == 0 || step + 1 == steps)) {
            const double scale = state.sigma.max_abs();
            if (scale > 0.0) {
                const double min_eig = min_eigenvalue_estimate(state.sigma, 120);
                if (min_eig < -options.psd_tolerance * scale * state.sigma.rows()) {
                    throw numeric_error(
                        "evolve_covariance: covariance lost positive semidefiniteness "
                        "at step " + std::to_string(step + 1));
                }
            }
        }
        if (keep(state.time)) series.push_back(state);
    }
    return series;
}

namespace {

/// Linear interpolation of profiles in time; callers guarantee coverage.
DensityProfile interpolate_profile(std::span<const DensityProfile> profiles, double t) {
    if (profiles.empty()) throw validation_error("profile interpolation: empty series");
    if (t <= profiles.front().time + 1e-12) return profiles.front();
    if (t >= profiles.back().time - 1e-12) return profiles.back();
    std::size_t hi = 1;
    while (hi < profiles.size() && profiles[hi].time < t) ++hi;
    const DensityProfile& a = profiles[hi - 1];
    const DensityProfile& b = profiles[hi];
    const double w = (t - a.time) / (b.time - a.time);
    DensityProfile out = a;
    out.time = t;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = (1.0 - w) * a.values[i] + w * b.values[i];
    }
    return out;
}

} // namespace

std::vector<CovarianceState> evolve_covariance(const CovarianceState& sigma0,
                                               std::span<const DensityProfile> profiles,
                                               const RatePolicy& policy, double horizon,
                                               double dt, const EvolveOptions& options,
                                               ExecMode mode) {
    require_finite(policy, "evolve_covariance");
    if (profiles.empty()) throw validation_error("evolve_covariance: no profiles");
    if (profiles.back().time < horizon - 1e-9) {
        throw validation_error("evolve_covariance: profiles do not cover the horizon");
    }
    GridRateTables tables(policy, policy.capacity().value(), sigma0.grid_size);
    const auto drift_at = [&](double t) {
        return build_drift(interpolate_profile(profiles, t), tables).matrix;
    };
    const auto noise_at = [&](double t) {
        return build_noise_cov(interpolate_profile(profiles, t), tables).matrix;
    };
    return evolve_covariance_raw(sigma0, drift_at, noise_at, horizon, dt, options, mode);
}

double project(const CovarianceState& sigma, const TestFn& f, const TestFn& g, int k, int m) {
    return project_block(sigma.sigma, sigma.grid_size, f, g, k, m);
}

double project_block(const Matrix& stacked, int grid_size, const TestFn& f, const TestFn& g,
                     int k, int m) {
    const int levels = stacked.rows() / grid_size;
    if (k < 0 || m < 0 || k >= levels || m >= levels) {
        throw validation_error("project: level outside range");
    }
    std::vector<double> fv(grid_size), gv(grid_size);
    for (int j = 0; j < grid_size; ++j) {
        const double u = double(j + 1) / grid_size;
        fv[j] = f(u);
        gv[j] = g(u);
    }
    double s = 0.0;
    for (int i = 0; i < grid_size; ++i) {
        const double* row = stacked.row(k * grid_size + i) + m * grid_size;
        double acc = 0.0;
        for (int j = 0; j < grid_size; ++j) acc += row[j] * gv[j];
        s += fv[i] * acc;
    }
    return s / (double(grid_size) * grid_size);
}

OuPathStats simulate_ou(const CovarianceState& sigma0,
                        std::span<const DensityProfile> profiles, const RatePolicy& policy,
                        double horizon, double dt, int paths, std::uint64_t seed,
                        std::span<const double> keep_times, ExecMode mode) {
    require_finite(policy, "simulate_ou");
    if (paths < 2) throw validation_error("simulate_ou: need at least two paths");
    if (!(dt > 0.0)) throw validation_error("simulate_ou: dt must be positive");
    const long long steps = std::llround(horizon / dt);
    if (std::abs(steps * dt - horizon) > 1e-9 * std::max(1.0, horizon)) {
        throw validation_error("simulate_ou: horizon must be an integer number of steps");
    }
    const int dim = sigma0.sigma.rows();

    GridRateTables tables(policy, policy.capacity().value(), sigma0.grid_size);

    // Precompute per-step drift matrices and noise factors once; paths share
    // them.
    std::vector<Matrix> drifts(steps), noise_factors(steps);
    for (long long s = 0; s < steps; ++s) {
        const double t = s * dt;
        DensityProfile p = interpolate_profile(profiles, t);
        drifts[s] = build_drift(p, tables).matrix;
        noise_factors[s] = psd_factor(build_noise_cov(p, tables).matrix, 1e-7);
    }
    const Matrix init_factor = psd_factor(sigma0.sigma, 1e-7);

    std::vector<double> keep(keep_times.begin(), keep_times.end());
    if (keep.empty()) keep.push_back(horizon);
    std::vector<long long> keep_steps;
    for (double kt : keep) {
        const long long s = std::llround(kt / dt);
        if (std::abs(s * dt - kt) > 1e-9 || s < 0 || s > steps) {
            throw validation_error("simulate_ou: keep time is not on the step grid");
        }
        keep_steps.push_back(s);
    }

    // states[path][keep_idx] stacked vectors, reduced serially afterwards.
    std::vector<std::vector<std::vector<double>>> states(
        paths, std::vector<std::vector<double>>(keep.size(), std::vector<double>(dim)));

    const bool par = (mode == ExecMode::parallel);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
    for (int p = 0; p < paths; ++p) {
        Rng rng = Rng::stream(seed, std::uint64_t(p));
        std::vector<double> v(dim), xi(dim), av(dim);
        // v0 ~ N(0, Sigma0) via the PSD factor.
        for (int i = 0; i < dim; ++i) xi[i] = rng.normal();
        for (int i = 0; i < dim; ++i) {
            double acc = 0.0;
            const double* row = init_factor.row(i);
            for (int j = 0; j < dim; ++j) acc += row[j] * xi[j];
            v[i] = acc;
        }
        for (std::size_t ki = 0; ki < keep_steps.size(); ++ki) {
            if (keep_steps[ki] == 0) states[p][ki] = v;
        }
        const double sqrt_dt = std::sqrt(dt);
        for (long long s = 0; s < steps; ++s) {
            const Matrix& a = drifts[s];
            const Matrix& b = noise_factors[s];
            for (int i = 0; i < dim; ++i) xi[i] = rng.normal();
            for (int i = 0; i < dim; ++i) {
                const double* arow = a.row(i);
                const double* brow = b.row(i);
                double drift_acc = 0.0, noise_acc = 0.0;
                for (int j = 0; j < dim; ++j) {
                    drift_acc += arow[j] * v[j];
                    noise_acc += brow[j] * xi[j];
                }
                av[i] = v[i] + dt * drift_acc + sqrt_dt * noise_acc;
            }
            std::swap(v, av);
            for (std::size_t ki = 0; ki < keep_steps.size(); ++ki) {
                if (keep_steps[ki] == s + 1) states[p][ki] = v;
            }
        }
    }
    (void)par;

    OuPathStats stats;
    stats.paths = paths;
    for (std::size_t ki = 0; ki < keep.size(); ++ki) {
        stats.times.push_back(keep[ki]);
        Matrix cov(dim, dim);
        std::vector<double> mean(dim, 0.0);
        for (int p = 0; p < paths; ++p) {
            for (int i = 0; i < dim; ++i) mean[i] += states[p][ki][i];
        }
        for (int i = 0; i < dim; ++i) mean[i] /= paths;
        for (int p = 0; p < paths; ++p) {
            const auto& v = states[p][ki];
            for (int i = 0; i < dim; ++i) {
                const double di = v[i] - mean[i];
                for (int j = 0; j < dim; ++j) cov(i, j) += di * (v[j] - mean[j]);
            }
        }
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j < dim; ++j) cov(i, j) /= (paths - 1);
        }
        stats.sample_covariance.push_back(std::move(cov));
    }
    return stats;
}

} // namespace conserva
