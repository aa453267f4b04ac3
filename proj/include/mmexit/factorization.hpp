#pragma once

#include <memory>
#include <span>
#include <vector>

#include "mmexit/linalg.hpp"
#include "mmexit/model.hpp"
#include "mmexit/transforms.hpp"

namespace mmexit {

struct PlusFactorOptions {
    double tol = 1e-12;
    int max_iterations = 10000;
    double damping = 0.5;
};

/// Law of the supremum at the killing time: P{sup = 0} and the exponential tail.
struct PlusFactor {
    double s = 0.0;
    RealMatrix Ps;
    RealMatrix p_plus;
    RealMatrix q_plus;
    RealMatrix p_star;
    RealMatrix R_star;
    double residual = 0.0;
    int iterations = 0;
};

/// Solves for p*_+(s) by damped successive substitution of
/// (sI + Lambda + N)(I - p) = Lambda Fbar_0(0) + int dK_0(z) (I - p) exp(C p z) over z <= 0.
PlusFactor solve_plus_factor(const ModelSpec& spec, double s, const PlusFactorOptions& opts = {});
PlusFactor solve_plus_factor(const ModelSpec& spec, double s, double tol);

/// Right-hand side minus left-hand side of the fixed-point equation at a given p.
RealMatrix plus_factor_defect(const ModelSpec& spec, double s, const RealMatrix& p_star);

/// E exp(i alpha sup) = [p* + (I - p*) R (R - i alpha)^{-1}] P_s.
ComplexMatrix phi_plus(const PlusFactor& factor, Complex alpha);

/// P_s Phi_+^{-1} Phi, computed as (C - i alpha p*^{-1}) (C - i alpha)^{-1} Phi.
ComplexMatrix phi_minus(const ModelSpec& spec, const PlusFactor& factor, Complex alpha);

/// P{sup > x} = (I - p*) exp(-R x) P_s for x > 0.
RealMatrix sup_tail(const PlusFactor& factor, double x);

/// Default inversion settings sized from the model's rates.
InversionConfig default_inversion(const ModelSpec& spec);

/// Law of the post-supremum value at the killing time, ready for pointwise queries.
///
/// The atom at 0 is exact (large-alpha limit of the transform); the density part is
/// recovered by Fourier inversion after removing the leading terms of its exact
/// asymptotic expansion. Negative-jump atoms away from 0 are not supported here.
class MinusLaw final : public LowerMeasure {
public:
    static constexpr int kExpansionTerms = 4;

    MinusLaw(const ModelSpec& spec, const PlusFactor& factor, const InversionConfig& cfg);

    int dim() const override { return m_; }
    double s() const { return s_; }
    RealMatrix atom() const override { return atom_; }
    RealMatrix density(double y) const override;
    RealMatrix cdf(double y) const override;
    RealMatrix laplace_below(double c, double w) const override;
    double truncation_estimate() const;

private:
    int m_;
    double s_;
    RealMatrix atom_;
    std::unique_ptr<HalfLineInverter> inverter_;
    bool trivial_ = false;
};

struct MinusGrid {
    double s = 0.0;
    std::vector<double> y;
    std::vector<RealMatrix> cdf;
    RealMatrix atom_at_zero;
};

/// Samples P{post-supremum < y} on a grid of y <= 0.
MinusGrid minus_grid(const MinusLaw& law, std::span<const double> y_grid, double tol);
MinusGrid minus_grid(const ModelSpec& spec, const PlusFactor& factor, std::span<const double> y_grid,
                     double alpha_max, int n_alpha);

} // namespace mmexit
