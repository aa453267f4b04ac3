#include "mmexit/linalg.hpp"

#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "mmexit/errors.hpp"

namespace mmexit {

namespace {

template <typename Mat>
double condition_estimate(const Eigen::PartialPivLU<Mat>& lu)
{
    double rc = lu.rcond();
    if (!(rc > 0.0) || !std::isfinite(rc)) return std::numeric_limits<double>::infinity();
    return 1.0 / rc;
}

template <typename Mat>
Mat solve_impl(const Mat& a, const Mat& b)
{
    if (a.rows() != a.cols() || a.rows() != b.rows()) {
        throw ArgumentError("solve: dimension mismatch");
    }
    Eigen::PartialPivLU<Mat> lu(a);
    double cond = condition_estimate(lu);
    if (cond > kMaxConditionEstimate) {
        std::ostringstream os;
        os << "solve: matrix is singular or ill-conditioned (condition estimate " << cond << ")";
        throw SingularMatrixError(os.str(), cond);
    }
    Mat x = lu.solve(b);
    if (!all_finite(x)) throw NumericalError("solve: non-finite solution");
    return x;
}

} // namespace

RealMatrix mat_exp(const RealMatrix& a)
{
    if (a.rows() != a.cols()) throw ArgumentError("mat_exp: matrix must be square");
    if (!all_finite(a)) throw NumericalError("mat_exp: non-finite input");
    RealMatrix r = a.exp();
    if (!all_finite(r)) throw NumericalError("mat_exp: result overflows double precision");
    return r;
}

ComplexMatrix solve(const ComplexMatrix& a, const ComplexMatrix& b) { return solve_impl(a, b); }

RealMatrix solve(const RealMatrix& a, const RealMatrix& b) { return solve_impl(a, b); }

RealMatrix inverse(const RealMatrix& a) { return solve(a, identity(a.rows())); }

double inf_norm(const RealMatrix& a)
{
    if (a.size() == 0) return 0.0;
    return a.cwiseAbs().rowwise().sum().maxCoeff();
}

double inf_norm(const ComplexMatrix& a)
{
    if (a.size() == 0) return 0.0;
    return a.cwiseAbs().rowwise().sum().maxCoeff();
}

bool all_finite(const RealMatrix& a) { return a.allFinite(); }

bool all_finite(const ComplexMatrix& a)
{
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a(i).real()) || !std::isfinite(a(i).imag())) return false;
    }
    return true;
}

} // namespace mmexit
