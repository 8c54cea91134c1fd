#ifndef CONSERVA_ERRORS_HPP
#define CONSERVA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace conserva {

// Raised when an input (config, policy, profile, argument) violates a
// documented precondition. The CLI maps this to exit code 2.
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a computation goes numerically wrong at runtime (envelope
// violation, integrator blow-up, PSD failure). CLI exit code 3.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace conserva

#endif
