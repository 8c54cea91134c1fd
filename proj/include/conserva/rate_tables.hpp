#ifndef CONSERVA_RATE_TABLES_HPP
#define CONSERVA_RATE_TABLES_HPP

#include <vector>

#include "conserva/model.hpp"

namespace conserva {

/// Rates tabulated on the uniform torus grid u_j = (j+1)/M:
/// table(k,l)[j*M + j'] = phi_{k,l}(u_j, u_j'). Built once per (policy, M,
/// kmax) and shared by the mean-field right-hand side and the fluctuation
/// operator assembly, which both reduce torus integrals to M-point Riemann
/// sums over this grid.
class GridRateTables {
  public:
    GridRateTables(const RatePolicy& policy, int kmax, int grid_size);

    int kmax() const { return kmax_; }
    int grid_size() const { return grid_; }

    const double* table(int k, int l) const {
        return data_.data() + (std::size_t(k) * (kmax_ + 1) + l) * grid_ * grid_;
    }

    double grid_coord(int j) const { return double(j + 1) / grid_; }

  private:
    int kmax_;
    int grid_;
    std::vector<double> data_;
};

} // namespace conserva

#endif
