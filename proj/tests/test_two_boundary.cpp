#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "mmexit/errors.hpp"
#include "mmexit/factorization.hpp"
#include "mmexit/two_boundary.hpp"
#include "models.hpp"

using namespace mmexit;
using namespace mmexit::testing;

namespace {

struct Solved {
    ModelSpec spec;
    PlusFactor factor;
    std::unique_ptr<TwoBoundaryEngine> engine;
};

Solved make(const ModelSpec& spec, double s, double T, int n)
{
    Solved st{spec, solve_plus_factor(spec, s), nullptr};
    st.engine = std::make_unique<TwoBoundaryEngine>(spec, make_exit_kernel(spec, st.factor, default_inversion(spec)), T, n);
    return st;
}

class EachModel : public ::testing::TestWithParam<int> {
protected:
    ModelSpec model() const
    {
        switch (GetParam()) {
        case 0: return s1();
        case 1: return s2();
        default: return m2();
        }
    }
};

} // namespace

TEST(TwoBoundary, ScalarUpwardClosedForm)
{
    // Only upward jumps: B^T(s, x) = lambda/(s+lambda) exp(-c s x/(s+lambda)), whatever T.
    Solved st = make(s1(), 1.0, 1.0, 128);
    for (int j = 1; j < 128; ++j) {
        double x = st.engine->node(j);
        EXPECT_NEAR(st.engine->exit_up(j)(0, 0), (2.0 / 3.0) * std::exp(-x / 3.0), 1e-10);
    }
}

TEST_P(EachModel, AgreesWithNystromOracle)
{
    Solved st = make(model(), 1.0, 2.0, 256);
    auto ny = volterra_oracle_BT(model(), 1.0, 2.0, 256);
    double worst = 0.0;
    for (int j = 1; j < 256; ++j) worst = std::max(worst, inf_norm(RealMatrix(st.engine->exit_up(j) - ny[j])));
    EXPECT_LT(worst, 1e-4);
}

TEST_P(EachModel, KilledLawAccountsForAllMass)
{
    const ModelSpec spec = model();
    Solved st = make(spec, 1.0, 2.0, 256);
    const int j = 128;
    KilledLaw law = killed_law(*st.engine, j);
    auto nyB = volterra_oracle(spec, 1.0, 2.0, 256, identity(spec.m), identity(spec.m));
    ExitSplit split = exit_split(st.engine->exit_up(j), law, st.factor.Ps);
    EXPECT_LT(inf_norm(RealMatrix(split.B - nyB[j])), 1e-4);
    auto nyLow = volterra_oracle(spec, 1.0, 2.0, 256, RealMatrix::Zero(spec.m, spec.m), identity(spec.m));
    EXPECT_LT(inf_norm(RealMatrix(split.BTlow - nyLow[j])), 1e-4);
    for (const auto& d : law.density) EXPECT_GE(d.minCoeff(), -1e-8);
}

TEST_P(EachModel, KilledTransformSplitsByExitSide)
{
    const ModelSpec spec = model();
    Solved st = make(spec, 1.0, 2.0, 256);
    const int j = 128;
    const double x = st.engine->node(j);
    KilledLaw law = killed_law(*st.engine, j);
    const ComplexMatrix eye = ComplexMatrix::Identity(spec.m, spec.m);
    for (int i = -10; i <= 10; ++i) {
        const double a = 0.5 * i;
        ComplexMatrix V = killed_cf(*st.engine, law, a);
        ComplexMatrix up = overshoot_transform(spec, st.engine->exit_up(j), x, a).shifted;
        ComplexMatrix down = lower_exit_transform(*st.engine, law, a);
        ComplexMatrix rhs = (eye - up - down) * char_function(spec, 1.0, a);
        EXPECT_LT(inf_norm(ComplexMatrix(V - rhs)), 1e-6) << "alpha " << a;
        EXPECT_LT(inf_norm(ComplexMatrix(V - killed_cf_projection(*st.engine, j, a))), 1e-6);
    }
    // At alpha = 0 the upper part is B^T itself.
    ComplexMatrix up0 = overshoot_transform(spec, st.engine->exit_up(j), x, 0.0).upper;
    EXPECT_LT(inf_norm(ComplexMatrix(up0 - to_complex(st.engine->exit_up(j)))), 1e-14);
}

TEST_P(EachModel, UpperTailTendsToExitTransform)
{
    const ModelSpec spec = model();
    Solved st = make(spec, 1.0, 2.0, 256);
    const int j = 128;
    KilledLaw law = killed_law(*st.engine, j);
    RealMatrix near = bratiichuk_tails(*st.engine, law, st.engine->node(j) + 1e-9);
    EXPECT_LT(inf_norm(RealMatrix(near - 1.0 * st.engine->exit_up(j))), 1e-5);
}

TEST_P(EachModel, AtomAtZeroIsPathWithoutMoves)
{
    const ModelSpec spec = model();
    Solved st = make(spec, 1.0, 2.0, 256);
    KilledLaw law = killed_law(*st.engine, 128);
    MinusLaw ml(spec, st.factor, default_inversion(spec));
    EXPECT_LT(inf_norm(RealMatrix(law.atom_at_zero - st.factor.p_star * ml.atom())), 1e-8);
}

INSTANTIATE_TEST_SUITE_P(Models, EachModel, ::testing::Values(0, 1, 2));

TEST(TwoBoundary, GridSizeMakesXANode)
{
    int n = grid_size_for(2.0, 0.3, 100);
    EXPECT_GE(n, 100);
    double j = 0.3 * n / 2.0;
    EXPECT_NEAR(j, std::round(j), 1e-9);
}

TEST(TwoBoundary, NystromScalarMatchesClosedForm)
{
    auto ny = volterra_oracle_BT(s1(), 1.0, 1.0, 256);
    for (int j = 1; j < 256; j += 17) {
        double x = j / 256.0;
        EXPECT_NEAR(ny[j](0, 0), (2.0 / 3.0) * std::exp(-x / 3.0), 1e-5);
    }
}

TEST(TwoBoundary, LimitMeasureIdentity)
{
    for (const auto& spec : {s2(), m2_up()}) {
        LimitOptions lo;
        auto M = limit_M(spec, lo);
        LimitResult p0 = limit_p_star(spec, lo);
        for (double r : {0.5, 1.0, 2.0}) {
            auto chk = check_M_identity(spec, *M, p0.value, r);
            EXPECT_LT(chk.rel_error, 1e-3) << "r " << r;
        }
    }
}

TEST(TwoBoundary, LimitExitTransformTwoWays)
{
    LimitOptions lo;
    lo.n = 128;
    LimitBT lim = limit_BT(s2(), 2.0, lo);
    EXPECT_LT(lim.max_difference, 1e-4);
    // Leaving through the top is likelier when the upper level is closer.
    EXPECT_GT(lim.extrapolated.front()(0, 0), lim.extrapolated.back()(0, 0));
}

TEST(TwoBoundary, LimitsNeedPositiveDrift)
{
    EXPECT_LT(mean_drift(m2()), 0.0);
    EXPECT_THROW(limit_M(m2()), ArgumentError);
    EXPECT_THROW(limit_BT(m2(), 1.0), ArgumentError);
}

TEST(TwoBoundary, RejectsBadArguments)
{
    PlusFactor f = solve_plus_factor(s2(), 1.0);
    auto kernel = make_exit_kernel(s2(), f, default_inversion(s2()));
    EXPECT_THROW(TwoBoundaryEngine(s2(), kernel, -1.0, 64), ArgumentError);
    EXPECT_THROW(TwoBoundaryEngine(s2(), kernel, 1.0, 1), ArgumentError);
}
