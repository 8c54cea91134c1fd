#include "conserva/rate_tables.hpp"

#include "conserva/errors.hpp"

namespace conserva {

GridRateTables::GridRateTables(const RatePolicy& policy, int kmax, int grid_size)
    : kmax_(kmax), grid_(grid_size) {
    if (kmax < 0) throw validation_error("rate tables: negative occupancy ceiling");
    if (grid_size < 1) throw validation_error("rate tables: grid size must be >= 1");
    if (policy.capacity().is_finite() && kmax != policy.capacity().value()) {
        throw validation_error("rate tables: kmax must equal the finite capacity");
    }
    data_.resize(std::size_t(kmax + 1) * (kmax + 1) * grid_ * grid_);
    std::size_t idx = 0;
    for (int k = 0; k <= kmax; ++k) {
        for (int l = 0; l <= kmax; ++l) {
            for (int j = 0; j < grid_; ++j) {
                const double u = grid_coord(j);
                for (int jp = 0; jp < grid_; ++jp) {
                    data_[idx++] = policy.eval(k, l, u, grid_coord(jp));
                }
            }
        }
    }
}

} // namespace conserva
