#include "conserva/model.hpp"

#include <cmath>

#include "conserva/errors.hpp"

namespace conserva {

Capacity Capacity::finite(int k) {
    if (k < 1) throw validation_error("capacity: finite value must be >= 1");
    return Capacity(k);
}

int Capacity::value() const {
    if (!is_finite()) throw validation_error("capacity: unbounded, no finite value");
    return raw_;
}

namespace {

double wrap01(double u) {
    double w = u - std::floor(u);
    return w < 1.0 ? w : 0.0;
}

} // namespace

RatePolicy::RatePolicy(std::string name, Capacity capacity, RateFn rate,
                       std::optional<double> infinite_bound)
    : name_(std::move(name)),
      capacity_(capacity),
      rate_(std::move(rate)),
      infinite_bound_(infinite_bound) {
    if (!rate_) throw validation_error("rate policy '" + name_ + "': missing rate function");
    if (!capacity_.is_finite() && !infinite_bound_) {
        throw validation_error("rate policy '" + name_ +
                               "': unbounded capacity requires an envelope constant C1");
    }
    validate();
}

double RatePolicy::eval(int k, int l, double u, double v) const {
    if (k < 0 || l < 0) {
        throw validation_error("rate policy '" + name_ + "': negative occupancy");
    }
    if (capacity_.is_finite()) {
        const int cap = capacity_.value();
        if (k > cap || l > cap) {
            throw validation_error("rate policy '" + name_ +
                                   "': occupancy exceeds finite capacity");
        }
        if (l == cap) return 0.0; // destination full
    }
    if (k == 0) return 0.0; // nothing to move
    const double r = rate_(k, l, wrap01(u), wrap01(v));
    return r;
}

double RatePolicy::infinite_bound() const {
    if (capacity_.is_finite()) {
        throw validation_error("rate policy '" + name_ + "': no C1 for finite capacity");
    }
    return *infinite_bound_;
}

void RatePolicy::validate() const {
    const int grid = 64;
    const int kmax = capacity_.is_finite()
                         ? std::min(capacity_.value(), kValidationOccupancyCeiling)
                         : kValidationOccupancyCeiling;
    for (int k = 0; k <= kmax; ++k) {
        for (int l = 0; l <= kmax; ++l) {
            for (int iu = 0; iu < grid; ++iu) {
                for (int iv = 0; iv < grid; ++iv) {
                    const double u = double(iu) / grid;
                    const double v = double(iv) / grid;
                    const double r = eval(k, l, u, v);
                    if (!(r >= 0.0) || !std::isfinite(r)) {
                        throw validation_error("rate policy '" + name_ +
                                               "': rate is negative or non-finite "
                                               "on the validation grid");
                    }
                    if (!capacity_.is_finite() && r > *infinite_bound_ * k + 1e-12) {
                        throw validation_error("rate policy '" + name_ +
                                               "': rate exceeds C1*k on the "
                                               "validation grid");
                    }
                }
            }
        }
    }
}

double sup_rate(const RatePolicy& policy, int grid_resolution) {
    if (!policy.capacity().is_finite()) {
        throw validation_error("sup_rate: unsupported for unbounded capacity; "
                               "use the C1 envelope instead");
    }
    if (grid_resolution < 1) throw validation_error("sup_rate: grid resolution must be >= 1");
    const int cap = policy.capacity().value();
    double m = 0.0;
    for (int k = 0; k <= cap; ++k) {
        for (int l = 0; l <= cap; ++l) {
            for (int iu = 0; iu < grid_resolution; ++iu) {
                for (int iv = 0; iv < grid_resolution; ++iv) {
                    m = std::max(m, policy.eval(k, l, double(iu) / grid_resolution,
                                                double(iv) / grid_resolution));
                }
            }
        }
    }
    return m * 1.05;
}

namespace {

double kernel_envelope(const PairKernel& base) {
    // Exact for constants; grid max with the same 5% inflation otherwise.
    if (base.is_constant()) return base.constant_part();
    return base.max_on_grid(256) * 1.05;
}

void check_kernel_nonnegative(const PairKernel& base, const char* what) {
    if (base.min_on_grid(128) < 0.0) {
        throw validation_error(std::string(what) + ": base kernel is negative somewhere");
    }
}

} // namespace

void lint_misanthrope_monotonicity(const RatePolicy& policy, int kmax) {
    const int grid = 16;
    for (int iu = 0; iu < grid; ++iu) {
        for (int iv = 0; iv < grid; ++iv) {
            const double u = double(iu) / grid;
            const double v = double(iv) / grid;
            for (int k = 1; k < kmax; ++k) {
                for (int l = 0; l < kmax; ++l) {
                    if (policy.eval(k + 1, l, u, v) < policy.eval(k, l, u, v) - 1e-12) {
                        throw validation_error(
                            "misanthrope lint: rate not increasing in source count");
                    }
                    if (policy.eval(k, l + 1, u, v) > policy.eval(k, l, u, v) + 1e-12) {
                        throw validation_error(
                            "misanthrope lint: rate not decreasing in destination count");
                    }
                }
            }
        }
    }
}

const char* preset_name(PresetKind kind) {
    switch (kind) {
        case PresetKind::generalized_exclusion: return "generalized_exclusion";
        case PresetKind::exclusion: return "exclusion";
        case PresetKind::zero_range: return "zero_range";
        case PresetKind::ehrenfest: return "ehrenfest";
        case PresetKind::misanthrope: return "misanthrope";
    }
    return "?";
}

RatePolicy make_preset(const ModelPreset& preset) {
    const PairKernel base = preset.base;
    check_kernel_nonnegative(base, preset_name(preset.kind));

    switch (preset.kind) {
        case PresetKind::exclusion: {
            return RatePolicy("exclusion", Capacity::finite(1),
                              [base](int, int, double u, double v) { return base(u, v); });
        }
        case PresetKind::generalized_exclusion: {
            const int cap = preset.capacity;
            RateFn fn;
            switch (preset.occupancy) {
                case OccupancyLaw::indicator:
                    fn = [base](int, int, double u, double v) { return base(u, v); };
                    break;
                case OccupancyLaw::linear:
                    fn = [base, cap](int k, int l, double u, double v) {
                        return double(k) * double(cap - l) / cap * base(u, v);
                    };
                    break;
                case OccupancyLaw::saturating:
                    fn = [base](int k, int, double u, double v) {
                        return double(k) / (1.0 + k) * base(u, v);
                    };
                    break;
            }
            return RatePolicy("generalized_exclusion", Capacity::finite(cap), std::move(fn));
        }
        case PresetKind::zero_range: {
            const double c1 = kernel_envelope(base);
            RateFn fn;
            switch (preset.occupancy) {
                case OccupancyLaw::indicator:
                    fn = [base](int k, int, double u, double v) {
                        return k >= 1 ? base(u, v) : 0.0;
                    };
                    break;
                case OccupancyLaw::linear:
                    fn = [base](int k, int, double u, double v) { return k * base(u, v); };
                    break;
                case OccupancyLaw::saturating:
                    fn = [base](int k, int, double u, double v) {
                        return double(k) / (1.0 + k) * base(u, v);
                    };
                    break;
            }
            return RatePolicy("zero_range", Capacity::infinite(), std::move(fn), c1);
        }
        case PresetKind::ehrenfest: {
            // Independent particles: phi_k = k * phi.
            const double c1 = kernel_envelope(base);
            return RatePolicy("ehrenfest", Capacity::infinite(),
                              [base](int k, int, double u, double v) { return k * base(u, v); },
                              c1);
        }
        case PresetKind::misanthrope: {
            RateFn fn = [base](int k, int l, double u, double v) {
                return double(k) / (1.0 + l) * base(u, v);
            };
            RatePolicy policy =
                preset.misanthrope_infinite
                    ? RatePolicy("misanthrope", Capacity::infinite(), std::move(fn),
                                 kernel_envelope(base))
                    : RatePolicy("misanthrope", Capacity::finite(preset.capacity),
                                 std::move(fn));
            const int kmax = policy.capacity().is_finite()
                                 ? policy.capacity().value()
                                 : 8;
            lint_misanthrope_monotonicity(policy, std::max(kmax, 2));
            return policy;
        }
    }
    throw validation_error("make_preset: unknown preset kind");
}

} // namespace conserva
