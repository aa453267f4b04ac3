#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mmexit/linalg.hpp"

namespace mmexit {

/// Settings of the midpoint-rule Fourier inversion.
struct InversionConfig {
    double alpha_max = 80.0;
    int n_alpha = 1 << 14;
    double tol = 1e-7;

    /// Throws ArgumentError unless alpha_max > 0, n_alpha >= 16 and even, tol > 0.
    void check() const;
    double step() const { return alpha_max / n_alpha; }
};

using MatrixCf = std::function<ComplexMatrix(double)>;

struct LocatedAtom {
    double location = 0.0;
    RealMatrix mass;
};

/// Gil-Pelaez inversion of a matrix characteristic function.
///
/// Declared atoms are subtracted from `cf` before inversion and re-added, so the returned
/// values are P{X < y} (strict inequality) for each y. The truncation error is
/// self-estimated by comparing against the inversion on [0, alpha_max / 2]; an estimate
/// above cfg.tol raises ConvergenceError.
std::vector<RealMatrix> invert_cf_to_cdf(const MatrixCf& cf, const std::vector<LocatedAtom>& atoms,
                                         std::span<const double> y, const InversionConfig& cfg);

/// Inversion of a matrix measure with a density on (-inf, 0).
///
/// `expansion[j-1]` is the coefficient of (i alpha)^{-j} in the large-alpha expansion of
/// the transform. The first terms are removed with the exactly invertible reference
/// sum_j b_j / (kappa + i alpha)^j, leaving a remainder decaying like alpha^{-(K+1)}.
class HalfLineInverter {
public:
    HalfLineInverter(const MatrixCf& continuous_cf, const std::vector<RealMatrix>& expansion,
                     double kappa, const InversionConfig& cfg);

    int dim() const { return dim_; }
    /// Mass of (-inf, y) for y <= 0.
    RealMatrix cdf(double y) const;
    RealMatrix density(double y) const;
    /// Integral of exp(c t) f(t) over (-inf, w], c > 0, w <= 0.
    RealMatrix laplace_below(double c, double w) const;
    /// Bound on the density truncation error from the decay of the remainder.
    double truncation_estimate() const { return truncation_estimate_; }

private:
    RealMatrix reference_cdf(double kappa, double y) const;

    int dim_;
    double kappa_;
    InversionConfig cfg_;
    std::vector<RealMatrix> ref_coeffs_;
    RealMatrix remainder_at_zero_;
    std::vector<ComplexMatrix> samples_;
    double truncation_estimate_ = 0.0;
};

/// Matrix measure on (-inf, 0]: a density on (-inf, 0) plus an atom at 0.
class LowerMeasure {
public:
    virtual ~LowerMeasure() = default;
    virtual int dim() const = 0;
    virtual RealMatrix atom() const = 0;
    virtual RealMatrix density(double y) const = 0;
    /// Mass of the density part on (-inf, y), y <= 0.
    virtual RealMatrix cdf(double y) const = 0;
    /// Integral of exp(c t) over the density part on (-inf, w], w <= 0.
    virtual RealMatrix laplace_below(double c, double w) const = 0;
};

/// `left * base`, used for s^{-1} p*_+(s) P^-(s, .).
class ScaledMeasure final : public LowerMeasure {
public:
    ScaledMeasure(RealMatrix left, std::shared_ptr<const LowerMeasure> base);
    int dim() const override { return base_->dim(); }
    RealMatrix atom() const override { return left_ * base_->atom(); }
    RealMatrix density(double y) const override { return left_ * base_->density(y); }
    RealMatrix cdf(double y) const override { return left_ * base_->cdf(y); }
    RealMatrix laplace_below(double c, double w) const override
    {
        return left_ * base_->laplace_below(c, w);
    }

private:
    RealMatrix left_;
    std::shared_ptr<const LowerMeasure> base_;
};

struct LimitResult {
    RealMatrix value;
    double error_estimate = 0.0;
};

/// Polynomial (Neville) extrapolation of f(s_i) to s = 0.
///
/// Assumes f(s) = f(0) + a s + o(s) along a strictly decreasing positive sequence. The
/// error estimate is the gap between the last two diagonal extrapolants. Raises
/// ConvergenceError when successive values move apart (divergence) or when the estimate
/// exceeds rel_tol * (1 + |limit|).
LimitResult extrapolate_to_zero(std::span<const double> s, std::span<const RealMatrix> values,
                                double rel_tol = 1e-4);

LimitResult limit_s_to_zero(const std::function<RealMatrix(double)>& f,
                            std::span<const double> s_seq, double rel_tol = 1e-4);

/// s0, s0*ratio, s0*ratio^2, ... (n terms).
std::vector<double> geometric_sequence(double s0, double ratio, int n);

/// Pointwise limit of a family of measures indexed by a decreasing s sequence.
class ExtrapolatedMeasure final : public LowerMeasure {
public:
    ExtrapolatedMeasure(std::vector<double> s_seq,
                        std::vector<std::shared_ptr<const LowerMeasure>> members,
                        double rel_tol = 1e-4);
    int dim() const override { return members_.front()->dim(); }
    RealMatrix atom() const override;
    RealMatrix density(double y) const override;
    RealMatrix cdf(double y) const override;
    RealMatrix laplace_below(double c, double w) const override;

private:
    RealMatrix combine(const std::function<RealMatrix(const LowerMeasure&)>& f) const;

    std::vector<double> s_;
    std::vector<std::shared_ptr<const LowerMeasure>> members_;
    double rel_tol_;
};

} // namespace mmexit
