#include <doctest.h>

#include <cmath>

#include "conserva/errors.hpp"
#include "conserva/model.hpp"

using namespace conserva;

namespace {

PairKernel cos_diff_kernel(double c0, double amp) {
    PairKernel k(c0);
    k.add_diff({1, 0.0, amp});
    return k;
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("structural zeros dominate the wrapped function") {
    RatePolicy policy("raw", Capacity::finite(3),
                      [](int, int, double, double) { return 2.0; });
    CHECK(policy.eval(0, 2, 0.3, 0.7) == 0.0); // nothing to move
    CHECK(policy.eval(1, 3, 0.3, 0.7) == 0.0); // destination full
    CHECK(policy.eval(1, 1, 0.3, 0.7) == 2.0);
}

TEST_CASE("exclusion forces the k=1,l=1 zero") {
    ModelPreset preset;
    preset.kind = PresetKind::exclusion;
    preset.base = PairKernel::constant(1.0);
    const RatePolicy policy = make_preset(preset);
    CHECK(policy.capacity().value() == 1);
    CHECK(policy.eval(1, 1, 0.2, 0.9) == 0.0);
    CHECK(policy.eval(1, 0, 0.2, 0.9) == doctest::Approx(1.0));
}

TEST_CASE("ehrenfest rates are k times the kernel") {
    ModelPreset preset;
    preset.kind = PresetKind::ehrenfest;
    preset.base = PairKernel::constant(1.0);
    const RatePolicy policy = make_preset(preset);
    CHECK(!policy.capacity().is_finite());
    CHECK(policy.infinite_bound() == doctest::Approx(1.0));
    CHECK(policy.eval(3, 5, 0.1, 0.9) == doctest::Approx(3.0));
}

TEST_CASE("sup_rate envelopes a constant rate") {
    ModelPreset preset;
    preset.kind = PresetKind::exclusion;
    preset.base = PairKernel::constant(2.5);
    const RatePolicy policy = make_preset(preset);
    const double k1 = sup_rate(policy, 64);
    CHECK(k1 >= 2.5);
    CHECK(k1 <= 2.5 * 1.05 + 1e-12);
}

TEST_CASE("sup_rate envelopes a smooth rate against a denser grid") {
    PairKernel k(1.0);
    k.add_u({1, 0.5, 0.0}); // 1 + 0.5 sin(2 pi u), true sup 1.5
    ModelPreset preset;
    preset.kind = PresetKind::exclusion;
    preset.base = k;
    const RatePolicy policy = make_preset(preset);
    const double envelope = sup_rate(policy, 64);

    // Dense-grid oracle at 10x the resolution.
    double dense = 0.0;
    for (int iu = 0; iu < 640; ++iu) {
        for (int iv = 0; iv < 640; ++iv) {
            dense = std::max(dense, policy.eval(1, 0, iu / 640.0, iv / 640.0));
        }
    }
    CHECK(envelope >= dense);
    CHECK(envelope <= 1.5 * 1.05 + 1e-9);
}

TEST_CASE("sup_rate of an all-zero policy is zero") {
    RatePolicy policy("zero", Capacity::finite(2),
                      [](int, int, double, double) { return 0.0; });
    CHECK(sup_rate(policy, 32) == 0.0);
}

TEST_CASE("sup_rate rejects unbounded capacity") {
    ModelPreset preset;
    preset.kind = PresetKind::ehrenfest;
    preset.base = PairKernel::constant(1.0);
    const RatePolicy policy = make_preset(preset);
    CHECK_THROWS_AS(sup_rate(policy, 32), validation_error);
}

TEST_CASE("misanthrope preset accepts k/(1+l) and the lint rejects violations") {
    ModelPreset preset;
    preset.kind = PresetKind::misanthrope;
    preset.capacity = 4;
    preset.base = PairKernel::constant(1.0);
    CHECK_NOTHROW(make_preset(preset));

    // A family increasing in the destination count is not a misanthrope model.
    RatePolicy prefers_crowds("prefers_crowds", Capacity::finite(4),
                              [](int k, int l, double, double) {
                                  return double(k) * (1.0 + l) / 5.0;
                              });
    CHECK_THROWS_AS(lint_misanthrope_monotonicity(prefers_crowds, 4), validation_error);

    // Decreasing in the source count fails the other direction.
    RatePolicy lazy_crowds("lazy_crowds", Capacity::finite(4),
                           [](int k, int l, double, double) {
                               return k >= 1 ? 1.0 / (1.0 + k + l) : 0.0;
                           });
    CHECK_THROWS_AS(lint_misanthrope_monotonicity(lazy_crowds, 4), validation_error);
}

TEST_CASE("unbounded capacity requires an envelope constant") {
    CHECK_THROWS_AS(RatePolicy("no_c1", Capacity::infinite(),
                               [](int k, int, double, double) { return double(k); }),
                    validation_error);
}

TEST_CASE("linear envelope violations are caught on the validation grid") {
    CHECK_THROWS_AS(RatePolicy("too_big", Capacity::infinite(),
                               [](int k, int, double, double) { return 2.0 * k; }, 1.0),
                    validation_error);
}

TEST_CASE("negative rates are rejected") {
    CHECK_THROWS_AS(RatePolicy("neg", Capacity::finite(1),
                               [](int, int, double u, double) { return u - 0.5; }),
                    validation_error);
}

TEST_CASE("occupancy outside the finite range is a domain error") {
    ModelPreset preset;
    preset.kind = PresetKind::exclusion;
    preset.base = PairKernel::constant(1.0);
    const RatePolicy policy = make_preset(preset);
    CHECK_THROWS_AS(policy.eval(2, 0, 0.1, 0.1), validation_error);
    CHECK_THROWS_AS(policy.eval(1, -1, 0.1, 0.1), validation_error);
}

TEST_CASE("closed-form presets are periodic in both coordinates") {
    ModelPreset preset;
    preset.kind = PresetKind::exclusion;
    preset.base = cos_diff_kernel(1.0, 0.5);
    preset.base.add_u({2, 0.25, 0.0});
    const RatePolicy policy = make_preset(preset);
    for (int iu = 0; iu < 16; ++iu) {
        for (int iv = 0; iv < 16; ++iv) {
            const double u = iu / 16.0, v = iv / 16.0;
            const double base = policy.eval(1, 0, u, v);
            CHECK(policy.eval(1, 0, u + 1.0, v) == doctest::Approx(base).epsilon(1e-12));
            CHECK(policy.eval(1, 0, u, v + 1.0) == doctest::Approx(base).epsilon(1e-12));
        }
    }
}

TEST_CASE("unbounded policies satisfy the C1*k bound on sampled points") {
    ModelPreset preset;
    preset.kind = PresetKind::zero_range;
    preset.base = cos_diff_kernel(1.0, 0.5);
    preset.occupancy = OccupancyLaw::saturating;
    const RatePolicy policy = make_preset(preset);
    const double c1 = policy.infinite_bound();
    for (int k = 0; k <= 64; ++k) {
        for (int iu = 0; iu < 8; ++iu) {
            for (int iv = 0; iv < 8; ++iv) {
                CHECK(policy.eval(k, 3, iu / 8.0, iv / 8.0) <= c1 * k + 1e-12);
            }
        }
    }
}

} // TEST_SUITE
