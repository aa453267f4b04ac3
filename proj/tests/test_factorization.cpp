#include <gtest/gtest.h>

#include <cmath>

#include "mmexit/errors.hpp"
#include "mmexit/factorization.hpp"
#include "mmexit/transforms.hpp"
#include "models.hpp"

using namespace mmexit;
using namespace mmexit::testing;

namespace {

const Complex kI(0.0, 1.0);

double identity_residual(const ModelSpec& spec, const PlusFactor& f, double alpha)
{
    ComplexMatrix phi = char_function(spec, f.s, alpha);
    ComplexMatrix rebuilt = phi_plus(f, alpha) * to_complex(inverse(f.Ps)) * phi_minus(spec, f, alpha);
    return inf_norm(ComplexMatrix(phi - rebuilt));
}

} // namespace

TEST(PlusFactor, ScalarClosedForm)
{
    for (double s : {0.3, 1.0, 4.0}) {
        PlusFactor f = solve_plus_factor(s1(), s);
        EXPECT_NEAR(f.p_star(0, 0), s / (s + 2.0), 1e-12);
        EXPECT_NEAR(f.R_star(0, 0), s / (s + 2.0), 1e-12);
        EXPECT_NEAR(f.Ps(0, 0), 1.0, 1e-15);
    }
}

TEST(PlusFactor, ScalarWithDownJumpsSolvesRootEquation)
{
    // For one state R = c p* is the positive root of Psi(-i R) = s.
    PlusFactor f = solve_plus_factor(s2(), 1.0);
    double R = f.R_star(0, 0);
    Complex psi = cumulant(s2(), Complex(0.0, -R))(0, 0);
    EXPECT_LT(std::abs(1.0 - psi), 1e-10);
    EXPECT_NEAR(R, 0.8 * f.p_star(0, 0), 1e-14);
}

TEST(PlusFactor, DefectVanishes)
{
    for (const auto& spec : {s1(), s2(), m2()}) {
        for (double s : {0.1, 1.0, 3.0}) {
            PlusFactor f = solve_plus_factor(spec, s);
            EXPECT_LT(inf_norm(plus_factor_defect(spec, s, f.p_star)), 1e-10);
        }
    }
}

TEST(PlusFactor, FactorizationIdentityOnAlphaGrid)
{
    for (const auto& spec : {s1(), s2(), m2()}) {
        PlusFactor f = solve_plus_factor(spec, 1.0);
        for (int i = 0; i <= 40; ++i) EXPECT_LT(identity_residual(spec, f, -10.0 + 0.5 * i), 1e-8);
    }
}

TEST(PlusFactor, SupremumLawIsSubstochastic)
{
    PlusFactor f = solve_plus_factor(m2(), 0.7);
    RealMatrix zero = f.p_plus;
    RealMatrix tail0 = sup_tail(f, 1e-12);
    EXPECT_LT(inf_norm(RealMatrix(zero + tail0 - f.Ps)), 1e-10);
    RealMatrix prev = tail0;
    for (double x : {0.5, 1.0, 2.0, 4.0}) {
        RealMatrix t = sup_tail(f, x);
        EXPECT_GE(t.minCoeff(), 0.0);
        EXPECT_LE((t - prev).maxCoeff(), 1e-14);
        prev = t;
    }
}

TEST(PlusFactor, RejectsBadInput)
{
    EXPECT_THROW(solve_plus_factor(s1(), 0.0), ArgumentError);
    EXPECT_THROW(solve_plus_factor(s1(), -1.0), ArgumentError);
}

TEST(MinusLaw, TotalMassAndTransform)
{
    for (const auto& spec : {s2(), m2()}) {
        PlusFactor f = solve_plus_factor(spec, 1.0);
        MinusLaw law(spec, f, default_inversion(spec));
        EXPECT_LT(inf_norm(RealMatrix(law.atom() + law.cdf(0.0) - f.Ps)), 1e-7);
        // Transform of the recovered law by quadrature against the closed-form one.
        for (double a : {0.5, 2.0}) {
            ComplexMatrix acc = to_complex(law.atom());
            const double h = 0.005;
            for (double y = -40.0 + 0.5 * h; y < 0.0; y += h) acc += std::exp(kI * (a * y)) * h * to_complex(law.density(y));
            EXPECT_LT(inf_norm(ComplexMatrix(acc - phi_minus(spec, f, a))), 1e-5);
        }
    }
}

TEST(MinusLaw, DensityMatchesCdfSlope)
{
    PlusFactor f = solve_plus_factor(m2(), 1.0);
    MinusLaw law(m2(), f, default_inversion(m2()));
    for (double y : {-3.0, -1.0, -0.2}) {
        const double h = 1e-4;
        RealMatrix slope = (law.cdf(y + h) - law.cdf(y - h)) / (2.0 * h);
        EXPECT_LT(inf_norm(RealMatrix(slope - law.density(y))), 1e-6);
    }
}

TEST(MinusLaw, ScalarAtomFromClosedForm)
{
    // Only upward jumps: the post-supremum value is 0 a.s.
    PlusFactor f = solve_plus_factor(s1(), 1.0);
    MinusLaw law(s1(), f, default_inversion(s1()));
    EXPECT_NEAR(law.atom()(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(law.cdf(-1.0)(0, 0), 0.0, 1e-12);
}

TEST(MinusGrid, MonotoneCdf)
{
    PlusFactor f = solve_plus_factor(m2(), 1.0);
    MinusLaw law(m2(), f, default_inversion(m2()));
    std::vector<double> ys = {-6.0, -3.0, -1.0, -0.5, -0.1};
    MinusGrid g = minus_grid(law, ys, 1e-7);
    for (std::size_t i = 1; i < g.cdf.size(); ++i) EXPECT_GE((g.cdf[i] - g.cdf[i - 1]).minCoeff(), -1e-12);
}

TEST(Inversion, ExponentialLawRecovered)
{
    // cf of Exp(2): 2 / (2 - i a).
    MatrixCf cf = [](double a) {
        ComplexMatrix v(1, 1);
        v(0, 0) = 2.0 / Complex(2.0, -a);
        return v;
    };
    InversionConfig cfg;
    cfg.alpha_max = 4000.0;
    cfg.n_alpha = 1 << 18;
    cfg.tol = 1e-3;
    std::vector<double> y = {0.25, 0.5, 1.0, 2.0};
    auto cdf = invert_cf_to_cdf(cf, {}, y, cfg);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(cdf[i](0, 0), 1.0 - std::exp(-2.0 * y[i]), 1e-3);
}

TEST(Inversion, DeclaredAtomIsReAdded)
{
    // Half mass at 0, half Exp(1).
    MatrixCf cf = [](double a) {
        ComplexMatrix v(1, 1);
        v(0, 0) = 0.5 + 0.5 / Complex(1.0, -a);
        return v;
    };
    InversionConfig cfg;
    cfg.alpha_max = 4000.0;
    cfg.n_alpha = 1 << 18;
    cfg.tol = 1e-3;
    std::vector<double> y = {-0.5, 0.5, 1.5};
    auto cdf = invert_cf_to_cdf(cf, {{0.0, RealMatrix::Constant(1, 1, 0.5)}}, y, cfg);
    EXPECT_NEAR(cdf[0](0, 0), 0.0, 1e-3);
    EXPECT_NEAR(cdf[1](0, 0), 0.5 + 0.5 * (1.0 - std::exp(-0.5)), 1e-3);
    EXPECT_NEAR(cdf[2](0, 0), 0.5 + 0.5 * (1.0 - std::exp(-1.5)), 1e-3);
}

TEST(Extrapolation, RecoversPolynomialLimit)
{
    auto s = geometric_sequence(0.1, 0.5, 5);
    std::vector<RealMatrix> v;
    for (double x : s) v.push_back(RealMatrix::Constant(1, 1, 3.0 + 2.0 * x - 5.0 * x * x));
    LimitResult r = extrapolate_to_zero(s, v);
    EXPECT_NEAR(r.value(0, 0), 3.0, 1e-12);
}

TEST(Extrapolation, DivergenceRaises)
{
    auto s = geometric_sequence(0.1, 0.5, 5);
    std::vector<RealMatrix> v;
    for (double x : s) v.push_back(RealMatrix::Constant(1, 1, 1.0 / x));
    EXPECT_THROW(extrapolate_to_zero(s, v), ConvergenceError);
}

TEST(InversionConfig, Checks)
{
    InversionConfig c;
    c.n_alpha = 15;
    EXPECT_THROW(c.check(), ArgumentError);
}
