#pragma once

#include <complex>

#include <Eigen/Dense>

namespace mmexit {

using Complex = std::complex<double>;
using RealMatrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

/// Largest condition estimate accepted by solve() before it reports a singular system.
inline constexpr double kMaxConditionEstimate = 1e14;

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
///
/// Throws NumericalError when the result is not representable (entries overflow).
RealMatrix mat_exp(const RealMatrix& a);

/// Solves A X = B with partial-pivot LU.
///
/// Throws SingularMatrixError carrying the reciprocal-condition based estimate when the
/// estimate exceeds kMaxConditionEstimate.
ComplexMatrix solve(const ComplexMatrix& a, const ComplexMatrix& b);
RealMatrix solve(const RealMatrix& a, const RealMatrix& b);

/// Evaluates expression arguments; the right-hand side takes the scalar type of `a`.
template <typename DA, typename DB>
auto solve(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b)
{
    using Scalar = typename DA::Scalar;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    return solve(Mat(a), Mat(b.template cast<Scalar>()));
}

/// Inverse via solve(A, I); used only where the inverse is cached and reused.
RealMatrix inverse(const RealMatrix& a);

/// Maximum absolute row sum.
double inf_norm(const RealMatrix& a);
double inf_norm(const ComplexMatrix& a);

inline ComplexMatrix to_complex(const RealMatrix& a) { return a.cast<Complex>(); }

inline RealMatrix identity(Eigen::Index m) { return RealMatrix::Identity(m, m); }

bool all_finite(const RealMatrix& a);
bool all_finite(const ComplexMatrix& a);

} // namespace mmexit
