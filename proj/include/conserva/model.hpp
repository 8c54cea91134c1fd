#ifndef CONSERVA_MODEL_HPP
#define CONSERVA_MODEL_HPP

#include <functional>
#include <optional>
#include <string>

#include "conserva/functions.hpp"

namespace conserva {

/// Per-site particle capacity: a finite integer K >= 1 or unbounded.
class Capacity {
  public:
    static Capacity finite(int k);
    static Capacity infinite() { return Capacity(-1); }

    bool is_finite() const { return raw_ >= 0; }
    int value() const; // finite only

    bool operator==(const Capacity&) const = default;

  private:
    explicit Capacity(int raw) : raw_(raw) {}
    int raw_;
};

/// Jump-rate evaluator: (source count k, destination count l, source
/// coordinate u, destination coordinate v) -> rate before the 1/N scaling.
using RateFn = std::function<double(int, int, double, double)>;

/// Immutable rate family phi_{k,l}(u,v) with capacity and, for unbounded
/// capacity, the linear envelope constant C1 with phi_{k,l} <= C1*k.
///
/// eval() applies the structural zeros (no jump out of an empty site, no jump
/// into a full site) regardless of the wrapped function, and wraps coordinates
/// onto [0,1) so the family is periodic by construction. Construction samples
/// a 64x64 coordinate grid and occupancies up to min(K, 64) to validate
/// nonnegativity and, for unbounded capacity, the C1*k envelope.
class RatePolicy {
  public:
    RatePolicy(std::string name, Capacity capacity, RateFn rate,
               std::optional<double> infinite_bound = std::nullopt);

    double eval(int k, int l, double u, double v) const;

    Capacity capacity() const { return capacity_; }
    double infinite_bound() const; // unbounded capacity only
    const std::string& name() const { return name_; }

    /// Occupancy ceiling used for sampled validation.
    static constexpr int kValidationOccupancyCeiling = 64;

  private:
    void validate() const;

    std::string name_;
    Capacity capacity_;
    RateFn rate_;
    std::optional<double> infinite_bound_;
};

/// Upper bound on sup phi over admissible occupancies and a dense coordinate
/// grid, inflated by 5% so smooth rates cannot exceed it between grid nodes.
/// Used as the thinning envelope; an acceptance probability above one later
/// is still trapped as a hard error. Finite capacity only.
double sup_rate(const RatePolicy& policy, int grid_resolution);

/// Named model families from the literature, constructed over a closed-form
/// base kernel.
enum class PresetKind {
    generalized_exclusion,
    exclusion,
    zero_range,
    ehrenfest,
    misanthrope,
};

/// Occupancy modulation g(k) (or g(k,l)) applied on top of the base kernel.
enum class OccupancyLaw {
    indicator,  // 1 for every admissible jump
    linear,     // k (independent particles when capacity is unbounded)
    saturating, // k / (1 + k)
};

struct ModelPreset {
    PresetKind kind = PresetKind::exclusion;
    PairKernel base = PairKernel::constant(1.0);
    int capacity = 1;                              // generalized_exclusion / misanthrope
    OccupancyLaw occupancy = OccupancyLaw::indicator; // zero_range / generalized_exclusion
    bool misanthrope_infinite = false;
};

RatePolicy make_preset(const ModelPreset& preset);

const char* preset_name(PresetKind kind);

/// Sampled misanthrope lint: rates must be increasing in the source count and
/// decreasing in the destination count on a coordinate/occupancy sample grid.
/// Raises validation_error on a violation. Applied by the misanthrope preset;
/// callable on any policy as a classification check.
void lint_misanthrope_monotonicity(const RatePolicy& policy, int occupancy_ceiling);

} // namespace conserva

#endif
