#include "mmexit/errors.hpp"

#include <utility>

namespace mmexit {

SingularMatrixError::SingularMatrixError(const std::string& what, double condition_estimate)
    : NumericalError(what), condition_(condition_estimate)
{
}

ConvergenceError::ConvergenceError(const std::string& what, double residual,
                                   std::vector<double> history)
    : Error(what), residual_(residual), history_(std::move(history))
{
}

} // namespace mmexit
