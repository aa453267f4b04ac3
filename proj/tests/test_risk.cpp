#include <gtest/gtest.h>

#include <cmath>

#include "mmexit/errors.hpp"
#include "mmexit/factorization.hpp"
#include "mmexit/risk_dividend.hpp"
#include "models.hpp"

using namespace mmexit;
using namespace mmexit::testing;

TEST(Risk, DriftArithmetic)
{
    EXPECT_NEAR(drift(r1()).m10, 0.0, 1e-15);
    EXPECT_NEAR(drift(r2()).m10, 0.5, 1e-15);
    // Two states with drifts +d and -d spending equal time.
    RealVector nu = RealVector::Ones(2), c = RealVector::Ones(2), l1(2), l2(2);
    l1 << 1.5, 0.5;
    l2 << 0.5, 1.5;
    RealMatrix P(2, 2);
    P << 0.0, 1.0, 1.0, 0.0;
    auto sym = make_risk_model(nu, P, c, l1, l2, {NegJumpDist::exponential(1, 1), NegJumpDist::exponential(1, 1)}, 2, 1);
    EXPECT_NEAR(drift(sym).m10, 0.0, 1e-15);
}

TEST(Risk, BaseModelIsDerived)
{
    RiskModelSpec rs = r_mixed();
    EXPECT_DOUBLE_EQ(rs.base.lambda(0), 3.0);
    EXPECT_DOUBLE_EQ(rs.base.pos_jump_prob(0), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(rs.base.pos_jump_prob(1), 1.0);
    EXPECT_NEAR(rs.base.neg_jump[0].total_mass(), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(rs.claim_means()(0), 0.7 + 0.3 / 4.0, 1e-15);
}

TEST(Risk, InvalidScenariosRejected)
{
    EXPECT_THROW(scalar_risk(1.0, 1.0, 2.0), ValidationError);
    EXPECT_THROW(scalar_risk(1.0, 1.0, 0.0), ValidationError);
    EXPECT_THROW(scalar_risk(-1.0), ValidationError);
    RealVector one = RealVector::Ones(1);
    EXPECT_THROW(make_risk_model(one, RealMatrix::Ones(1, 1), one, one, one, {NegJumpDist::exponential(0.5, 1.0)}, 2, 1),
                 ValidationError);
}

TEST(Risk, ClaimWaitingTransform)
{
    for (double s : {0.0, 0.5, 3.0}) EXPECT_NEAR(zeta_star_transform(r1(), s)(0, 0), 1.0 / (s + 1.0), 1e-14);
    RealMatrix z0 = zeta_star_transform(r_two(), 0.0);
    EXPECT_LT((z0.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
    // Claims only in state 1 still arrive a.s. from state 2 via the chain.
    RealMatrix zm = zeta_star_transform(r_mixed(), 0.0);
    EXPECT_LT((zm.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
    EXPECT_LT(zeta_star_transform(r_two(), 1e9).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_THROW(zeta_star_transform(r1(), -1.0), ArgumentError);
}

TEST(Risk, PlusFactorEquationWithClaimLaws)
{
    for (const auto& rs : {r1(), r2(), r_two(), r_mixed()}) {
        for (double s : {0.2, 1.0}) {
            PlusFactor f = solve_plus_factor(rs.base, s);
            EXPECT_LT(inf_norm(risk_plus_factor_defect(rs, s, f.p_star)), 1e-10);
        }
    }
}

TEST(Risk, TotalMassOfReserveLaw)
{
    for (const auto& rs : {r1(), r2(), r_two(), r_mixed(), scalar_risk(1.0, 2.0, 2.0)}) {
        for (double s : {0.3, 1.0}) {
            PlusFactor f = solve_plus_factor(rs.base, s);
            EXPECT_LT(inf_norm(ComplexMatrix(phi_eta(rs, f, 0.0) - to_complex(f.Ps))), 1e-10);
        }
    }
}

TEST(Risk, RenewalFormMatchesClosedForm)
{
    for (const auto& rs : {r1(), r2(), r_two()}) {
        PlusFactor f = solve_plus_factor(rs.base, 0.8);
        for (double a : {-1.0, 0.0, 0.5, 2.0}) {
            EXPECT_LT(inf_norm(ComplexMatrix(phi_tilde_B(rs, f, a) - phi_tilde_B_renewal(rs, f, a))), 1e-10);
        }
    }
    PlusFactor fm = solve_plus_factor(r_mixed().base, 0.8);
    EXPECT_THROW(phi_tilde_B(r_mixed(), fm, 0.5), ArgumentError);
}

TEST(Risk, StartAtBarrierIsContinuousInU)
{
    // v -> 0 limit of the general formula equals the barrier start.
    RiskModelSpec at = scalar_risk(1.0, 2.0, 2.0), near = scalar_risk(1.0, 2.0, 2.0 - 1e-7);
    PlusFactor f = solve_plus_factor(at.base, 1.0);
    for (double a : {0.5, 1.0}) EXPECT_LT(std::abs(phi_eta(at, f, a)(0, 0) - phi_eta(near, f, a)(0, 0)), 1e-6);
}

TEST(Risk, LimitRequiresPositiveDrift)
{
    EXPECT_THROW(eta_limit_ingredients(r1()), ArgumentError);
    EtaLimit lim = eta_limit_ingredients(r2());
    ComplexMatrix at0 = eta_limit(r2(), lim, 0.0);
    EXPECT_NEAR(at0(0, 0).real(), 1.0, 1e-4);
    RealMatrix atom = eta_atom(r2(), lim);
    EXPECT_GT(atom(0, 0), 0.0);
    EXPECT_LT(atom(0, 0), 1.0);
}

TEST(Risk, LimitMatchesSmallS)
{
    RiskModelSpec rs = r_two();
    EtaLimit lim = eta_limit_ingredients(rs);
    PlusFactor f = solve_plus_factor(rs.base, 1e-4);
    for (double a : {0.4, 1.0}) EXPECT_LT(inf_norm(ComplexMatrix(eta_limit(rs, lim, a) - phi_eta(rs, f, a))), 1e-3);
    ComplexMatrix at0 = eta_limit(rs, lim, 0.0);
    EXPECT_LT((at0.real().rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-4);
}

TEST(Risk, LimitLawNormalizedByInversion)
{
    // Mass of the limit law: atom at B plus the inverted continuous part below B.
    RiskModelSpec rs = r2();
    EtaLimit lim = eta_limit_ingredients(rs);
    const double atom = eta_atom(rs, lim)(0, 0);
    // Gil-Pelaez at B for the continuous part, whose transform is cf - atom e^{i a B}.
    const double h = 0.01, L = 400.0;
    double mass = 0.0;
    for (double a = 0.5 * h; a < L; a += h) {
        Complex g = eta_limit(rs, lim, a)(0, 0) * std::polar(1.0, -a * rs.B) - atom;
        mass += h * g.imag() / a;
    }
    double cont = 0.5 * (1.0 - atom) - mass / M_PI;
    EXPECT_NEAR(atom + cont, 1.0, 1e-3);
}

TEST(Dividend, TransformLimits)
{
    for (const auto& rs : {r1(), r_two()}) {
        PlusFactor f = solve_plus_factor(rs.base, 1.0);
        EXPECT_LT(inf_norm(RealMatrix(dividend_transform(rs, f, 0.0) - f.Ps)), 1e-10);
        EXPECT_LT(inf_norm(RealMatrix(dividend_transform(rs, f, 1e12) - dividend_atom(rs, f))), 1e-10);
        RealMatrix sup = (identity(rs.base.m) - f.p_star) * mat_exp(-f.R_star * rs.v()) * f.Ps;
        EXPECT_LT(inf_norm(RealMatrix(dividend_atom(rs, f) - (f.Ps - sup))), 1e-14);
    }
}

TEST(Dividend, CompletelyMonotoneInMu)
{
    RiskModelSpec rs = r_two();
    PlusFactor f = solve_plus_factor(rs.base, 1.0);
    std::vector<RealMatrix> v;
    for (int i = 0; i <= 40; ++i) v.push_back(dividend_transform(rs, f, 0.25 * i));
    for (std::size_t i = 1; i < v.size(); ++i) EXPECT_LE((v[i] - v[i - 1]).maxCoeff(), 1e-14);
    for (std::size_t i = 1; i + 1 < v.size(); ++i) EXPECT_GE((v[i + 1] - 2.0 * v[i] + v[i - 1]).minCoeff(), -1e-8);
}

TEST(Dividend, MeanIsSlopeAtZero)
{
    for (const auto& rs : {r1(), r_two()}) {
        PlusFactor f = solve_plus_factor(rs.base, 1.0);
        const double h = 1e-4;
        RealMatrix slope = -(-3.0 * dividend_transform(rs, f, 0.0) + 4.0 * dividend_transform(rs, f, h) -
                             dividend_transform(rs, f, 2.0 * h)) /
                           (2.0 * h);
        EXPECT_LT(inf_norm(RealMatrix(slope - dividend_mean(rs, f))), 1e-7);
    }
}

TEST(Dividend, ScalarAtomFromSupremum)
{
    // One state: P{sup < v} = 1 - (1 - p*) e^{-R v}.
    RiskModelSpec rs = r1();
    PlusFactor f = solve_plus_factor(rs.base, 1.0);
    double p = f.p_star(0, 0), R = f.R_star(0, 0);
    EXPECT_NEAR(dividend_atom(rs, f)(0, 0), 1.0 - (1.0 - p) * std::exp(-R * 1.0), 1e-14);
}
