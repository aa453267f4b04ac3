#include "mmexit/risk_dividend.hpp"

#include <cmath>
#include <sstream>

#include "mmexit/errors.hpp"

namespace mmexit {

namespace {

// int dF^1_0(z) left exp(R z), row k taken against the claim law of state k.
RealMatrix claim_image(const RiskModelSpec& rs, const RealMatrix& left, const RealMatrix& R)
{
    const int m = rs.base.m;
    RealMatrix out = RealMatrix::Zero(m, m);
    for (int k = 0; k < m; ++k) {
        const NegJumpDist& d = rs.claims[k];
        for (const auto& e : d.exponentials) {
            RealMatrix mu_i = e.rate * identity(m);
            out.row(k) += e.weight * (left * solve(RealMatrix(mu_i + R), mu_i)).row(k);
        }
        for (const auto& a : d.atoms) out.row(k) += a.weight * (left * mat_exp(R * a.location)).row(k);
    }
    return out;
}

ComplexMatrix claim_cf(const RiskModelSpec& rs, double alpha)
{
    const int m = rs.base.m;
    ComplexMatrix out = ComplexMatrix::Zero(m, m);
    for (int k = 0; k < m; ++k) out(k, k) = rs.claims[k].transform(alpha);
    return out;
}

ComplexMatrix minus_i_alpha(const RealMatrix& a, double alpha)
{
    return to_complex(a) - Complex(0.0, alpha) * ComplexMatrix::Identity(a.rows(), a.cols());
}

// Common factor ((C - i alpha) p* e^{-i alpha v} - (I - p*) e^{-Rv} R) (R - i alpha)^{-1} Phi^-.
ComplexMatrix below_v_part(const RiskModelSpec& rs, const PlusFactor& f, double alpha)
{
    const RealMatrix& R = f.R_star;
    RealMatrix A = identity(rs.base.m) - f.p_star;
    ComplexMatrix lead = minus_i_alpha(rs.base.C(), alpha) * to_complex(f.p_star) * std::polar(1.0, -alpha * rs.v()) -
                         to_complex(RealMatrix(A * mat_exp(-R * rs.v()) * R));
    ComplexMatrix tail = solve(minus_i_alpha(R, alpha), phi_minus(rs.base, f, Complex(alpha, 0.0)));
    return lead * tail;
}

void check_factor(const RiskModelSpec& rs, const PlusFactor& f)
{
    if (f.p_star.rows() != rs.base.m) throw ArgumentError("risk: factor has the wrong dimension");
    if (!(f.s > 0.0)) throw ArgumentError("risk: factor must be solved at s > 0");
}

} // namespace

RealVector RiskModelSpec::claim_means() const
{
    RealVector out(base.m);
    for (int k = 0; k < base.m; ++k) out(k) = claims[k].mean_abs();
    return out;
}

RealMatrix RiskModelSpec::claim_intensity() const { return lambda2.asDiagonal(); }

RiskModelSpec make_risk_model(RealVector nu, RealMatrix P, RealVector c, RealVector lambda1,
                              RealVector lambda2, std::vector<NegJumpDist> claims, double B, double u)
{
    const int m = static_cast<int>(nu.size());
    if (P.rows() != m || P.cols() != m || c.size() != m || lambda1.size() != m ||
        lambda2.size() != m || static_cast<int>(claims.size()) != m) {
        throw ValidationError("risk model: all per-state inputs must have length m");
    }
    RiskModelSpec rs;
    rs.lambda1 = std::move(lambda1);
    rs.lambda2 = std::move(lambda2);
    rs.claims = std::move(claims);
    rs.B = B;
    rs.u = u;
    ModelSpec& b = rs.base;
    b.m = m;
    b.nu = std::move(nu);
    b.P = std::move(P);
    b.c = std::move(c);
    b.lambda = rs.lambda1 + rs.lambda2;
    b.pos_jump_prob.resize(m);
    b.neg_jump.resize(m);
    for (int k = 0; k < m; ++k) {
        double total = b.lambda(k);
        double p = total > 0.0 ? rs.lambda1(k) / total : 1.0;
        b.pos_jump_prob(k) = p;
        b.neg_jump[k] = rs.claims[k].scaled(1.0 - p);
    }
    b.trans_jump = ModelSpec::zero_transition_jumps(b.P);
    require_valid(rs);
    return rs;
}

void require_valid(const RiskModelSpec& rs)
{
    std::vector<std::string> v;
    const int m = rs.base.m;
    for (int k = 0; k < m; ++k) {
        std::string at = std::to_string(k + 1);
        if (!(rs.lambda1(k) >= 0.0) || !std::isfinite(rs.lambda1(k))) v.push_back("lambda1 " + at + " must be nonnegative");
        if (!(rs.lambda2(k) >= 0.0) || !std::isfinite(rs.lambda2(k))) v.push_back("lambda2 " + at + " must be nonnegative");
        const NegJumpDist& d = rs.claims[k];
        if (std::abs(d.total_mass() - 1.0) > 1e-9) v.push_back("claim law " + at + " must have unit mass");
        if (d.zero_atom() > 0.0) v.push_back("claim law " + at + " puts mass on zero-size claims");
        double mean = d.mean_abs();
        if (!(mean > 0.0) || !std::isfinite(mean)) v.push_back("claim mean " + at + " must be positive and finite");
    }
    if (!(rs.u > 0.0 && rs.u <= rs.B) || !std::isfinite(rs.B)) v.push_back("reserve needs 0 < u <= B");
    ValidationReport base = validate(rs.base);
    for (auto& s : base.violations) v.push_back(std::move(s));
    if (!v.empty()) {
        std::ostringstream os;
        os << "invalid risk model:";
        for (const auto& s : v) os << " " << s << ";";
        throw ValidationError(os.str());
    }
}

DriftReport drift(const RiskModelSpec& rs)
{
    DriftReport d;
    d.pi = stationary_distribution(rs.base.Q());
    RealVector means = rs.claim_means();
    for (int k = 0; k < rs.base.m; ++k) {
        d.m10 += d.pi(k) * (rs.lambda1(k) / rs.base.c(k) - rs.lambda2(k) * means(k));
    }
    return d;
}

RealMatrix zeta_star_transform(const RiskModelSpec& rs, double s)
{
    if (!(s >= 0.0) || !std::isfinite(s)) throw ArgumentError("zeta_star_transform: s must be >= 0");
    const int m = rs.base.m;
    RealMatrix L2 = rs.claim_intensity();
    return solve(RealMatrix(s * identity(m) + L2 - rs.base.Q()), L2);
}

RealMatrix risk_plus_factor_defect(const RiskModelSpec& rs, double s, const RealMatrix& p_star)
{
    const int m = rs.base.m;
    RealMatrix A = identity(m) - p_star;
    RealMatrix S = s * identity(m) + rs.base.Lambda() - rs.base.Q();
    RealMatrix J = claim_image(rs, A, rs.base.C() * p_star);
    return rs.base.upward_intensity() + rs.claim_intensity() * J - S * A;
}

ComplexMatrix phi_tilde_B(const RiskModelSpec& rs, const PlusFactor& f, double alpha)
{
    check_factor(rs, f);
    const int m = rs.base.m;
    for (int k = 0; k < m; ++k) {
        if (!(rs.lambda2(k) > 0.0)) throw ArgumentError("phi_tilde_B: closed form needs every claim rate positive");
    }
    const double s = f.s;
    RealMatrix eye = identity(m);
    RealMatrix L2 = rs.claim_intensity();
    RealMatrix G = s * eye + L2 - rs.base.Q();
    RealMatrix S = s * eye + rs.base.Lambda() - rs.base.Q();
    RealMatrix J = claim_image(rs, RealMatrix(eye - f.p_star), f.R_star);

    ComplexMatrix jump = claim_cf(rs, alpha) * minus_i_alpha(rs.base.C(), alpha) - to_complex(RealMatrix(J * rs.base.C()));
    ComplexMatrix phi_part = jump * to_complex(f.p_star) *
                             solve(minus_i_alpha(f.R_star, alpha), phi_minus(rs.base, f, Complex(alpha, 0.0)));
    ComplexMatrix integral = to_complex(L2) * (to_complex(RealMatrix(s * J * inverse(G))) + phi_part);
    RealMatrix front = solve(L2, G) * inverse(f.p_star) * inverse(S);
    return std::polar(1.0, alpha * rs.B) * to_complex(front) * integral;
}

ComplexMatrix phi_tilde_B_renewal(const RiskModelSpec& rs, const PlusFactor& f, double alpha)
{
    check_factor(rs, f);
    const int m = rs.base.m;
    const double s = f.s;
    RealMatrix eye = identity(m);
    RealMatrix L2 = rs.claim_intensity();
    RealMatrix Ginv = inverse(RealMatrix(s * eye + L2 - rs.base.Q()));
    RealMatrix J = claim_image(rs, RealMatrix(eye - f.p_star), f.R_star);

    ComplexMatrix jump = claim_cf(rs, alpha) * minus_i_alpha(rs.base.C(), alpha) - to_complex(RealMatrix(J * rs.base.C()));
    ComplexMatrix rhs = jump * to_complex(f.p_star) *
                            solve(minus_i_alpha(f.R_star, alpha), phi_minus(rs.base, f, Complex(alpha, 0.0))) +
                        to_complex(RealMatrix(s * J * Ginv));
    RealMatrix lhs = eye - J * Ginv * L2;
    return std::polar(1.0, alpha * rs.B) * solve(to_complex(lhs), rhs);
}

ComplexMatrix phi_eta(const RiskModelSpec& rs, const PlusFactor& f, double alpha)
{
    check_factor(rs, f);
    const int m = rs.base.m;
    const double s = f.s;
    RealMatrix eye = identity(m);
    RealMatrix L2 = rs.claim_intensity();
    bool closed_form = (rs.lambda2.array() > 0.0).all();
    ComplexMatrix tilde = closed_form ? phi_tilde_B(rs, f, alpha) : phi_tilde_B_renewal(rs, f, alpha);

    Complex at_B = std::polar(1.0, alpha * rs.B);
    RealMatrix up = (eye - f.p_star) * mat_exp(-f.R_star * rs.v());
    RealMatrix G = s * eye + L2 - rs.base.Q();
    ComplexMatrix waiting = to_complex(solve(G, eye)) * (Complex(s) * at_B * ComplexMatrix::Identity(m, m) +
                                                         to_complex(L2) * tilde);
    return at_B * below_v_part(rs, f, alpha) + to_complex(up) * waiting;
}

EtaLimit eta_limit_ingredients(const RiskModelSpec& rs, const std::vector<double>& s_seq, double rel_tol)
{
    DriftReport d = drift(rs);
    if (!(d.m10 > 0.0)) {
        std::ostringstream os;
        os << "eta limit: limit theorem hypothesis violated, drift m10 = " << d.m10 << " is not positive";
        throw ArgumentError(os.str());
    }
    std::vector<RealMatrix> p_stars, scaled_inv;
    for (double s : s_seq) {
        PlusFactor f = solve_plus_factor(rs.base, s);
        p_stars.push_back(f.p_star);
        scaled_inv.push_back(s * inverse(f.p_star));
    }
    LimitResult p0 = extrapolate_to_zero(s_seq, p_stars, rel_tol);
    LimitResult hat = extrapolate_to_zero(s_seq, scaled_inv, rel_tol);
    EtaLimit out;
    out.p_star0 = p0.value;
    out.R0 = rs.base.C() * p0.value;
    out.p_hat = hat.value;
    out.error_estimate = std::max(p0.error_estimate, hat.error_estimate);
    return out;
}

namespace {

// Shared front (I - p*(0)) e^{-R0 v} p_hat (Lambda - Q)^{-1} Lambda F_0(0).
RealMatrix limit_front(const RiskModelSpec& rs, const EtaLimit& lim)
{
    const int m = rs.base.m;
    RealMatrix eye = identity(m);
    RealMatrix S0 = rs.base.Lambda() - rs.base.Q();
    return (eye - lim.p_star0) * mat_exp(-lim.R0 * rs.v()) * lim.p_hat * solve(S0, rs.claim_intensity());
}

ComplexMatrix eta_limit_at(const RiskModelSpec& rs, const EtaLimit& lim, double alpha)
{
    const int m = rs.base.m;
    RealMatrix eye = identity(m);
    RealMatrix J0 = claim_image(rs, RealMatrix(eye - lim.p_star0), lim.R0);
    RealMatrix G0inv = inverse(RealMatrix(rs.claim_intensity() - rs.base.Q()));
    const ComplexMatrix ceye = ComplexMatrix::Identity(m, m);
    ComplexMatrix psi_inv = solve(cumulant(rs.base, alpha), ceye);
    ComplexMatrix C = to_complex(rs.base.C());
    ComplexMatrix overshoot = C * solve(minus_i_alpha(rs.base.C(), alpha), ceye);
    ComplexMatrix inner = -claim_cf(rs, alpha) * psi_inv +
                          to_complex(J0) * (to_complex(G0inv) + overshoot * psi_inv);
    return std::polar(1.0, alpha * rs.B) * to_complex(limit_front(rs, lim)) * inner;
}

} // namespace

ComplexMatrix eta_limit(const RiskModelSpec& rs, const EtaLimit& lim, double alpha)
{
    if (alpha != 0.0) return eta_limit_at(rs, lim, alpha);
    // Psi(0) = Q is singular; the combination is continuous, so extrapolate symmetric means.
    const double h = 1e-3;
    auto mean_at = [&](double a) {
        return ComplexMatrix(0.5 * (eta_limit_at(rs, lim, a) + eta_limit_at(rs, lim, -a)));
    };
    return (4.0 * mean_at(h) - mean_at(2.0 * h)) / 3.0;
}

RealMatrix eta_atom(const RiskModelSpec& rs, const EtaLimit& lim)
{
    const int m = rs.base.m;
    RealMatrix eye = identity(m);
    RealMatrix J0 = claim_image(rs, RealMatrix(eye - lim.p_star0), lim.R0);
    return limit_front(rs, lim) * J0 * inverse(RealMatrix(rs.claim_intensity() - rs.base.Q()));
}

RealMatrix dividend_transform(const RiskModelSpec& rs, const PlusFactor& f, double mu)
{
    check_factor(rs, f);
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw ArgumentError("dividend_transform: mu must be >= 0");
    const int m = rs.base.m;
    RealMatrix eye = identity(m);
    RealMatrix up = (eye - f.p_star) * mat_exp(-f.R_star * rs.v());
    RealMatrix ratio = mu * inverse(RealMatrix(mu * eye + f.R_star));
    return (eye - up * ratio) * f.Ps;
}

RealMatrix dividend_atom(const RiskModelSpec& rs, const PlusFactor& f)
{
    check_factor(rs, f);
    RealMatrix eye = identity(rs.base.m);
    return f.Ps - (eye - f.p_star) * mat_exp(-f.R_star * rs.v()) * f.Ps;
}

RealMatrix dividend_mean(const RiskModelSpec& rs, const PlusFactor& f)
{
    check_factor(rs, f);
    RealMatrix eye = identity(rs.base.m);
    return (eye - f.p_star) * mat_exp(-f.R_star * rs.v()) * solve(f.R_star, f.Ps);
}

} // namespace mmexit
