#pragma once

#include <vector>

#include "mmexit/factorization.hpp"
#include "mmexit/linalg.hpp"
#include "mmexit/model.hpp"
#include "mmexit/transforms.hpp"

namespace mmexit {

/// Risk process with stochastic premiums and a reserve capped at B.
///
/// Premiums arrive at rate lambda1[k] with Exp(c[k]) sizes, claims at rate lambda2[k] with
/// law `claims[k]` (a unit-mass distribution on (-inf, 0) of minus the claim size).
/// Transitions of the chain never move the reserve.
struct RiskModelSpec {
    ModelSpec base;
    RealVector lambda1;
    RealVector lambda2;
    std::vector<NegJumpDist> claims;
    double B = 0.0;
    double u = 0.0;

    double v() const { return B - u; }
    RealVector claim_means() const;
    /// Lambda F_0(0) = diag(lambda2).
    RealMatrix claim_intensity() const;
};

/// Builds `base` from the risk parameters and validates the result.
RiskModelSpec make_risk_model(RealVector nu, RealMatrix P, RealVector c, RealVector lambda1,
                              RealVector lambda2, std::vector<NegJumpDist> claims, double B, double u);

/// Throws ValidationError listing every violated invariant.
void require_valid(const RiskModelSpec& rs);

struct DriftReport {
    double m10 = 0.0;
    RealVector pi;
};
DriftReport drift(const RiskModelSpec& rs);

/// E exp(-s zeta_*) = (sI + Lambda F_0(0) - Q)^{-1} Lambda F_0(0), s >= 0.
RealMatrix zeta_star_transform(const RiskModelSpec& rs, double s);

/// Defect of the equation for p*_+(s) written with claim laws: RHS - LHS.
RealMatrix risk_plus_factor_defect(const RiskModelSpec& rs, double s, const RealMatrix& p_star);

/// Integral of dF^1_0(z) Phi_{B, B+z}(s, alpha), closed form that needs every lambda2 > 0.
ComplexMatrix phi_tilde_B(const RiskModelSpec& rs, const PlusFactor& factor, double alpha);
/// Same quantity from its renewal equation; valid for any claim intensities.
ComplexMatrix phi_tilde_B_renewal(const RiskModelSpec& rs, const PlusFactor& factor, double alpha);

/// E exp(i alpha eta_{B,u}(theta_s)). `factor` must be solved for rs.base at the same s.
ComplexMatrix phi_eta(const RiskModelSpec& rs, const PlusFactor& factor, double alpha);

/// Ingredients of the s -> 0 limits: p*_+(0), R*_+(0) and lim s p*_+(s)^{-1}.
struct EtaLimit {
    RealMatrix p_star0;
    RealMatrix R0;
    RealMatrix p_hat;
    double error_estimate = 0.0;
};

/// Extrapolates the limit ingredients; requires a positive drift m10.
EtaLimit eta_limit_ingredients(const RiskModelSpec& rs,
                               const std::vector<double>& s_seq = {0.02, 0.01, 0.005, 0.0025, 0.00125},
                               double rel_tol = 1e-4);

/// E exp(i alpha eta_{B,u}) for the limit law. alpha = 0 is reached by symmetric extrapolation.
ComplexMatrix eta_limit(const RiskModelSpec& rs, const EtaLimit& lim, double alpha);
/// P{eta_{B,u} = B} for the limit law.
RealMatrix eta_atom(const RiskModelSpec& rs, const EtaLimit& lim);

/// E exp(-mu Y_{B,u}(theta_s)) for the dividend process, mu >= 0.
RealMatrix dividend_transform(const RiskModelSpec& rs, const PlusFactor& factor, double mu);
/// P{Y_{B,u}(theta_s) = 0} = P{sup < v}.
RealMatrix dividend_atom(const RiskModelSpec& rs, const PlusFactor& factor);
/// E Y_{B,u}(theta_s) = -d/dmu of the transform at mu = 0.
RealMatrix dividend_mean(const RiskModelSpec& rs, const PlusFactor& factor);

} // namespace mmexit
