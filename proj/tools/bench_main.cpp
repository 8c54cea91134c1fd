// Benchmark of the OpenMP kernels against their serial reference paths:
// replica simulation, the mean-field right-hand side, and the dense matrix
// product behind the covariance flow. The two paths must agree bitwise; the
// benchmark reports wall times and the speedup.

#include <chrono>
#include <cstdio>
#include <cstring>

#include "conserva/linalg.hpp"
#include "conserva/meanfield.hpp"
#include "conserva/model.hpp"
#include "conserva/parallel.hpp"
#include "conserva/rng.hpp"
#include "conserva/sim.hpp"

using namespace conserva;

namespace {

double seconds(void (*fn)(ExecMode, void*), ExecMode mode, void* ctx, int repeats) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < repeats; ++i) fn(mode, ctx);
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / repeats;
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
    std::printf("%-22s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx   %s\n", name,
                serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
                identical ? "bitwise-equal" : "MISMATCH");
}

struct RhsCtx {
    const MeanfieldSystem* system;
    const DensityProfile* profile;
    std::vector<double> out;
};

void run_rhs(ExecMode mode, void* p) {
    auto* ctx = static_cast<RhsCtx*>(p);
    ctx->system->rhs(*ctx->profile, ctx->out, mode);
}

struct MatmulCtx {
    const Matrix* a;
    const Matrix* b;
    Matrix out;
};

void run_matmul(ExecMode mode, void* p) {
    auto* ctx = static_cast<MatmulCtx*>(p);
    matmul(*ctx->a, *ctx->b, ctx->out, mode);
}

struct ReplicaCtx {
    const InitialProfile* profile;
    const RatePolicy* policy;
    ReplicaEnsemble out;
};

void run_replica(ExecMode mode, void* p) {
    auto* ctx = static_cast<ReplicaCtx*>(p);
    const std::vector<double> obs = {0.5};
    ctx->out = run_replicas(*ctx->profile, *ctx->policy, 256, 0.5, obs, 64, 12345, {}, mode);
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

} // namespace

int main() {
    std::printf("conserva benchmark, %d worker(s)\n\n", worker_count());

    PairKernel phi(1.0);
    phi.add_diff({1, 0.0, 0.5});
    ModelPreset preset;
    preset.kind = PresetKind::generalized_exclusion;
    preset.capacity = 4;
    preset.base = phi;
    const RatePolicy policy = make_preset(preset);

    // Mean-field right-hand side at K=4, M=128.
    const HarmonicFn psi(2.0, {{1, 0.5, 0.0}});
    const InitReport init = init_profile(psi, Capacity::finite(4), 4, 128);
    MeanfieldSystem system(policy, 4, 128);
    RhsCtx rhs_serial{&system, &init.profile, std::vector<double>(init.profile.values.size())};
    RhsCtx rhs_parallel = rhs_serial;
    const double t_rhs_s = seconds(run_rhs, ExecMode::serial, &rhs_serial, 20);
    const double t_rhs_p = seconds(run_rhs, ExecMode::parallel, &rhs_parallel, 20);
    report("meanfield rhs", t_rhs_s, t_rhs_p, same_bits(rhs_serial.out, rhs_parallel.out));

    // Dense matmul at the covariance-flow dimension (K+1)M = 256.
    Rng rng(7);
    Matrix a(256, 256), b(256, 256);
    for (double& v : a.data()) v = rng.uniform01() - 0.5;
    for (double& v : b.data()) v = rng.uniform01() - 0.5;
    MatmulCtx mm_serial{&a, &b, Matrix(256, 256)};
    MatmulCtx mm_parallel{&a, &b, Matrix(256, 256)};
    const double t_mm_s = seconds(run_matmul, ExecMode::serial, &mm_serial, 10);
    const double t_mm_p = seconds(run_matmul, ExecMode::parallel, &mm_parallel, 10);
    report("matmul 256x256", t_mm_s, t_mm_p,
           same_bits(mm_serial.out.data(), mm_parallel.out.data()));

    // Replica ensemble, exclusion at N=256, R=64.
    ModelPreset excl;
    excl.kind = PresetKind::exclusion;
    excl.base = phi;
    const RatePolicy excl_policy = make_preset(excl);
    InitialProfile iprof{HarmonicFn(0.5, {{1, 0.25, 0.0}}), Capacity::finite(1)};
    ReplicaCtx rep_serial{&iprof, &excl_policy, {}};
    ReplicaCtx rep_parallel{&iprof, &excl_policy, {}};
    const double t_rep_s = seconds(run_replica, ExecMode::serial, &rep_serial, 3);
    const double t_rep_p = seconds(run_replica, ExecMode::parallel, &rep_parallel, 3);
    bool rep_same = rep_serial.out.replicas.size() == rep_parallel.out.replicas.size();
    for (std::size_t i = 0; rep_same && i < rep_serial.out.replicas.size(); ++i) {
        const auto& x = rep_serial.out.replicas[i];
        const auto& y = rep_parallel.out.replicas[i];
        rep_same = x.snapshots.size() == y.snapshots.size();
        for (std::size_t s = 0; rep_same && s < x.snapshots.size(); ++s) {
            rep_same = x.snapshots[s].counts == y.snapshots[s].counts;
        }
    }
    report("replica ensemble", t_rep_s, t_rep_p, rep_same);
    return 0;
}
