#ifndef CONSERVA_FUNCTIONS_HPP
#define CONSERVA_FUNCTIONS_HPP

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace conserva {

/// One trigonometric term: sin_c*sin(2*pi*freq*u) + cos_c*cos(2*pi*freq*u).
struct HarmonicTerm {
    int freq = 1;
    double sin_c = 0.0;
    double cos_c = 0.0;
};

/// Closed-form periodic function on the unit torus:
///   c0 + sum_j [ sin_c_j*sin(2*pi*f_j*u) + cos_c_j*cos(2*pi*f_j*u) ].
/// Periodic by construction, so policies and profiles built from it satisfy
/// the torus invariants exactly.
class HarmonicFn {
  public:
    HarmonicFn() = default;
    explicit HarmonicFn(double c0) : c0_(c0) {}
    HarmonicFn(double c0, std::vector<HarmonicTerm> terms)
        : c0_(c0), terms_(std::move(terms)) {}

    static HarmonicFn constant(double c) { return HarmonicFn(c); }

    double operator()(double u) const {
        double v = c0_;
        for (const auto& t : terms_) {
            const double a = 2.0 * std::numbers::pi * t.freq * u;
            v += t.sin_c * std::sin(a) + t.cos_c * std::cos(a);
        }
        return v;
    }

    double min_on_grid(int resolution) const {
        double m = (*this)(0.0);
        for (int i = 1; i < resolution; ++i)
            m = std::min(m, (*this)(double(i) / resolution));
        return m;
    }

    double max_on_grid(int resolution) const {
        double m = (*this)(0.0);
        for (int i = 1; i < resolution; ++i)
            m = std::max(m, (*this)(double(i) / resolution));
        return m;
    }

    double constant_part() const { return c0_; }
    const std::vector<HarmonicTerm>& terms() const { return terms_; }
    bool is_constant() const { return terms_.empty(); }

  private:
    double c0_ = 0.0;
    std::vector<HarmonicTerm> terms_;
};

/// Closed-form kernel on the torus square:
///   c0 + harmonics of (u - v) + harmonics of u + harmonics of v.
/// Covers the rate families used by the presets; difference harmonics with
/// sine coefficients give asymmetric kernels.
class PairKernel {
  public:
    PairKernel() = default;
    explicit PairKernel(double c0) : c0_(c0) {}

    static PairKernel constant(double c) { return PairKernel(c); }

    PairKernel& add_diff(HarmonicTerm t) { diff_.push_back(t); return *this; }
    PairKernel& add_u(HarmonicTerm t) { u_.push_back(t); return *this; }
    PairKernel& add_v(HarmonicTerm t) { v_.push_back(t); return *this; }

    double operator()(double u, double v) const {
        double r = c0_;
        for (const auto& t : diff_) {
            const double a = 2.0 * std::numbers::pi * t.freq * (u - v);
            r += t.sin_c * std::sin(a) + t.cos_c * std::cos(a);
        }
        for (const auto& t : u_) {
            const double a = 2.0 * std::numbers::pi * t.freq * u;
            r += t.sin_c * std::sin(a) + t.cos_c * std::cos(a);
        }
        for (const auto& t : v_) {
            const double a = 2.0 * std::numbers::pi * t.freq * v;
            r += t.sin_c * std::sin(a) + t.cos_c * std::cos(a);
        }
        return r;
    }

    double constant_part() const { return c0_; }
    bool is_constant() const { return diff_.empty() && u_.empty() && v_.empty(); }

    double max_on_grid(int resolution) const {
        double m = (*this)(0.0, 0.0);
        for (int i = 0; i < resolution; ++i)
            for (int j = 0; j < resolution; ++j)
                m = std::max(m, (*this)(double(i) / resolution, double(j) / resolution));
        return m;
    }

    double min_on_grid(int resolution) const {
        double m = (*this)(0.0, 0.0);
        for (int i = 0; i < resolution; ++i)
            for (int j = 0; j < resolution; ++j)
                m = std::min(m, (*this)(double(i) / resolution, double(j) / resolution));
        return m;
    }

  private:
    double c0_ = 0.0;
    std::vector<HarmonicTerm> diff_, u_, v_;
};

/// Scalar test function on the torus, as consumed by the field estimators.
using TestFn = std::function<double(double)>;

} // namespace conserva

#endif
