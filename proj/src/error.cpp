#include "sdlab/error.hpp"

#include <sstream>

namespace sdlab {

namespace {
std::string with_residual(const std::string& what, double residual) {
    std::ostringstream os;
    os << what << " (residual " << residual << ")";
    return os.str();
}
}  // namespace

SolverError::SolverError(const std::string& what, double residual)
    : Error(with_residual(what, residual)), residual_(residual) {}

int exit_code_for(const Error& e) noexcept {
    if (dynamic_cast<const IoError*>(&e)) return 2;
    if (dynamic_cast<const InvalidInput*>(&e)) return 1;
    if (dynamic_cast<const DegenerateDesign*>(&e)) return 1;
    return 3;
}

}  // namespace sdlab
