#include "conserva/meanfield.hpp"

#include <algorithm>
#include <cmath>

#include "conserva/errors.hpp"
#include "conserva/stats.hpp"

namespace conserva {

double DensityProfile::normalization_error() const {
    double worst = 0.0;
    for (int j = 0; j < grid_size; ++j) {
        double s = 0.0;
        for (int k = 0; k <= kmax; ++k) s += at(k, j);
        worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
}

double DensityProfile::min_value() const {
    double m = values.empty() ? 0.0 : values[0];
    for (double v : values) m = std::min(m, v);
    return m;
}

double DensityProfile::mass() const {
    double s = 0.0;
    for (int k = 1; k <= kmax; ++k) {
        const double* row = level(k);
        double rs = 0.0;
        for (int j = 0; j < grid_size; ++j) rs += row[j];
        s += double(k) * rs;
    }
    return s / grid_size;
}

std::vector<double> DensityProfile::theta() const {
    std::vector<double> th(grid_size, 0.0);
    for (int k = 1; k <= kmax; ++k) {
        const double* row = level(k);
        for (int j = 0; j < grid_size; ++j) th[j] += double(k) * row[j];
    }
    return th;
}

namespace {

double log_binomial(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double binomial_pmf(int n, int k, double p) {
    if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
    if (p >= 1.0) return k == n ? 1.0 : 0.0;
    return std::exp(log_binomial(n, k) + k * std::log(p) + (n - k) * std::log1p(-p));
}

double poisson_pmf(int k, double lambda) {
    return std::exp(-lambda + k * std::log(lambda) - std::lgamma(k + 1.0));
}

// P(X > kmax) for X ~ Poisson(lambda).
double poisson_tail(int kmax, double lambda) {
    double cdf = 0.0;
    for (int k = 0; k <= kmax; ++k) cdf += poisson_pmf(k, lambda);
    return std::max(0.0, 1.0 - cdf);
}

} // namespace

InitReport init_profile(const HarmonicFn& psi, Capacity capacity, int kmax, int grid_size) {
    if (grid_size < 8) throw validation_error("init_profile: grid size must be >= 8");
    InitReport report;
    DensityProfile& p = report.profile;
    p.grid_size = grid_size;
    p.time = 0.0;

    if (capacity.is_finite()) {
        const int cap = capacity.value();
        if (kmax != cap) {
            throw validation_error("init_profile: kmax must equal the finite capacity");
        }
        p.kmax = cap;
        p.values.assign(std::size_t(cap + 1) * grid_size, 0.0);
        for (int j = 0; j < grid_size; ++j) {
            const double v = psi(p.grid_coord(j));
            if (!(v > 0.0) || !(v < cap)) {
                throw validation_error("init_profile: psi outside (0, K) on the grid");
            }
            for (int k = 0; k <= cap; ++k) p.at(k, j) = binomial_pmf(cap, k, v / cap);
        }
        return report;
    }

    if (kmax < 1) throw validation_error("init_profile: unbounded capacity needs kmax >= 1");
    const double psi_max = psi.max_on_grid(std::max(grid_size, 256));
    const double worst_tail = poisson_tail(kmax, psi_max);
    if (worst_tail > 1e-12) {
        throw validation_error("init_profile: Poisson tail beyond kmax exceeds 1e-12; "
                               "raise the truncation level");
    }
    p.kmax = kmax;
    p.values.assign(std::size_t(kmax + 1) * grid_size, 0.0);
    double dropped = 0.0;
    for (int j = 0; j < grid_size; ++j) {
        const double v = psi(p.grid_coord(j));
        if (!(v > 0.0)) throw validation_error("init_profile: psi not positive on the grid");
        double sum = 0.0;
        for (int k = 0; k <= kmax; ++k) {
            const double q = poisson_pmf(k, v);
            p.at(k, j) = q;
            sum += q;
        }
        dropped = std::max(dropped, 1.0 - sum);
        for (int k = 0; k <= kmax; ++k) p.at(k, j) /= sum; // renormalize over 0..kmax
    }
    report.dropped_mass = dropped;
    return report;
}

TailReport tail_check(const DensityProfile& profile) {
    TailReport report;
    report.time = profile.time;
    const int kmax = profile.kmax;
    const std::vector<int> ladder = {kmax / 2, 3 * kmax / 4, kmax};
    for (int level : ladder) {
        double sup = 0.0;
        for (int j = 0; j < profile.grid_size; ++j) {
            double s = 0.0;
            for (int k = std::max(level, 0); k <= kmax; ++k) {
                s += double(k) * profile.at(k, j);
            }
            sup = std::max(sup, s);
        }
        report.ladder.push_back({level, sup});
    }
    report.flagged = report.ladder.front().sup_tail > 1e-8;

    std::vector<double> xs, ys, sd;
    for (const auto& e : report.ladder) {
        if (e.sup_tail > 0.0) {
            xs.push_back(double(e.level));
            ys.push_back(std::log(e.sup_tail));
            sd.push_back(1.0);
        }
    }
    const SlopeFit fit = weighted_line_fit(xs, ys, sd);
    report.log_slope = fit.slope;
    report.slope_defined = fit.defined;
    return report;
}

MeanfieldSystem::MeanfieldSystem(const RatePolicy& policy, int kmax, int grid_size)
    : tables_(policy, kmax, grid_size), finite_(policy.capacity().is_finite()) {}

void MeanfieldSystem::gain_loss_fields(const DensityProfile& profile,
                                       std::vector<double>& out_field,
                                       std::vector<double>& in_field, ExecMode mode) const {
    const int K = tables_.kmax();
    const int M = tables_.grid_size();
    out_field.assign(std::size_t(K + 1) * M, 0.0);
    in_field.assign(std::size_t(K + 1) * M, 0.0);
    const double inv_m = 1.0 / M;
    const bool par = (mode == ExecMode::parallel);

    // out_field[k][j] = sum_l (1/M) sum_j' phi_{k,l}(u_j,u_j') rho_l(u_j'):
    // the intensity with which a level-k site at u_j sheds a particle.
    // in_field[k][j] = sum_{l>=1} (1/M) sum_j' phi_{l,k}(u_j',u_j) rho_l(u_j'):
    // the intensity with which a level-k site at u_j receives one.
    // Each k-row is written by exactly one worker, so the parallel and serial
    // paths agree bitwise.
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
    for (int k = 0; k <= K; ++k) {
        double* out_row = out_field.data() + std::size_t(k) * M;
        for (int l = 0; l <= K; ++l) {
            const double* tb = tables_.table(k, l);
            const double* rho_l = profile.level(l);
            for (int j = 0; j < M; ++j) {
                const double* row = tb + std::size_t(j) * M;
                double acc = 0.0;
                for (int jp = 0; jp < M; ++jp) acc += row[jp] * rho_l[jp];
                out_row[j] += acc * inv_m;
            }
        }
        double* in_row = in_field.data() + std::size_t(k) * M;
        for (int l = 1; l <= K; ++l) {
            const double* tb = tables_.table(l, k);
            const double* rho_l = profile.level(l);
            for (int jp = 0; jp < M; ++jp) {
                const double w = rho_l[jp] * inv_m;
                if (w == 0.0) continue;
                const double* row = tb + std::size_t(jp) * M;
                for (int j = 0; j < M; ++j) in_row[j] += w * row[j];
            }
        }
    }
    (void)par;
}

void MeanfieldSystem::rhs(const DensityProfile& profile, std::span<double> out,
                          ExecMode mode) const {
    const int K = tables_.kmax();
    const int M = tables_.grid_size();
    if (profile.kmax != K || profile.grid_size != M) {
        throw validation_error("meanfield rhs: profile does not match the system grid");
    }
    if (out.size() != profile.values.size()) {
        throw validation_error("meanfield rhs: output size mismatch");
    }
    std::vector<double> out_field, in_field;
    gain_loss_fields(profile, out_field, in_field, mode);

    // d rho_k = -rho_k*(out_k + in_k) + rho_{k-1}*in_{k-1} + rho_{k+1}*out_{k+1},
    // with the boundary rows losing the absent neighbours. At the top level the
    // in-flow loss is dropped: for finite capacity it is structurally zero
    // (phi_{l,K} == 0), and for a truncated unbounded system the promotion out
    // of the tracked range is suppressed so normalization stays exact and the
    // truncation error surfaces in the mass functional instead.
    const bool par = (mode == ExecMode::parallel);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
    for (int k = 0; k <= K; ++k) {
        const double* rho_k = profile.level(k);
        const double* ofk = out_field.data() + std::size_t(k) * M;
        const double* ifk = in_field.data() + std::size_t(k) * M;
        double* dk = out.data() + std::size_t(k) * M;
        for (int j = 0; j < M; ++j) {
            double d = -rho_k[j] * ofk[j];
            if (k < K) d -= rho_k[j] * ifk[j];
            if (k > 0) {
                const double* rho_km = profile.level(k - 1);
                const double* ifm = in_field.data() + std::size_t(k - 1) * M;
                d += rho_km[j] * ifm[j];
            }
            if (k < K) {
                const double* rho_kp = profile.level(k + 1);
                const double* ofp = out_field.data() + std::size_t(k + 1) * M;
                d += rho_kp[j] * ofp[j];
            }
            dk[j] = d;
        }
    }
    (void)par;
}

double MeanfieldSystem::max_total_rate(const DensityProfile& profile) const {
    std::vector<double> out_field, in_field;
    gain_loss_fields(profile, out_field, in_field, ExecMode::serial);
    double m = 0.0;
    for (std::size_t i = 0; i < out_field.size(); ++i) {
        m = std::max(m, out_field[i] + in_field[i]);
    }
    return m;
}

IntegrationResult MeanfieldSystem::integrate(const DensityProfile& initial, double horizon,
                                             double dt, const IntegrationOptions& options,
                                             ExecMode mode) const {
    if (!(dt > 0.0)) throw validation_error("integrate: dt must be positive");
    if (horizon < 0.0) throw validation_error("integrate: negative horizon");
    if (initial.normalization_error() > 1e-6) {
        throw validation_error("integrate: initial profile is not normalized");
    }
    const double rate_bound = max_total_rate(initial);
    if (dt * rate_bound >= 0.5) {
        throw validation_error("integrate: dt too large for the rate scale "
                               "(stability precheck dt*max_rate < 0.5 failed)");
    }

    const std::size_t dim = initial.values.size();
    const long long steps = std::llround(horizon / dt);
    if (std::abs(steps * dt - horizon) > 1e-9 * std::max(1.0, horizon)) {
        throw validation_error("integrate: horizon must be an integer number of steps");
    }

    IntegrationResult result;
    DensityProfile state = initial;
    const double mass0 = state.mass();
    result.series.push_back(state);
    result.monitors.push_back({state.time, state.normalization_error(), state.min_value(),
                               mass0});
    result.min_value = state.min_value();

    std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim);
    DensityProfile stage = state;

    for (long long step = 0; step < steps; ++step) {
        rhs(state, k1, mode);
        for (std::size_t i = 0; i < dim; ++i) {
            stage.values[i] = state.values[i] + 0.5 * dt * k1[i];
        }
        rhs(stage, k2, mode);
        for (std::size_t i = 0; i < dim; ++i) {
            stage.values[i] = state.values[i] + 0.5 * dt * k2[i];
        }
        rhs(stage, k3, mode);
        for (std::size_t i = 0; i < dim; ++i) {
            stage.values[i] = state.values[i] + dt * k3[i];
        }
        rhs(stage, k4, mode);
        for (std::size_t i = 0; i < dim; ++i) {
            state.values[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        state.time = (step + 1) * dt;

        const double norm_err = state.normalization_error();
        const double min_v = state.min_value();
        const double mass = state.mass();
        result.monitors.push_back({state.time, norm_err, min_v, mass});
        result.max_normalization_error = std::max(result.max_normalization_error, norm_err);
        result.min_value = std::min(result.min_value, min_v);
        result.max_mass_drift = std::max(result.max_mass_drift, std::abs(mass - mass0));
        if (norm_err > options.normalization_tolerance) {
            throw numeric_error("integrate: normalization drifted beyond tolerance at step " +
                                std::to_string(step + 1));
        }
        if (min_v < options.negativity_tolerance) {
            throw numeric_error("integrate: negativity beyond tolerance at step " +
                                std::to_string(step + 1));
        }
        if ((step + 1) % options.save_stride == 0 ||
            (step + 1 == steps && steps % options.save_stride != 0)) {
            result.series.push_back(state);
        }
    }
    return result;
}

std::vector<double> meanfield_rhs(const DensityProfile& profile, const RatePolicy& policy) {
    MeanfieldSystem system(policy, profile.kmax, profile.grid_size);
    std::vector<double> out(profile.values.size());
    system.rhs(profile, out);
    return out;
}

double profile_pairing(const DensityProfile& profile, int k, const TestFn& f) {
    if (k < 0 || k > profile.kmax) {
        throw validation_error("profile_pairing: level outside the tracked range");
    }
    const double* row = profile.level(k);
    double s = 0.0;
    for (int j = 0; j < profile.grid_size; ++j) s += row[j] * f(profile.grid_coord(j));
    return s / profile.grid_size;
}

} // namespace conserva
