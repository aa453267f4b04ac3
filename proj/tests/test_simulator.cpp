#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mmexit/errors.hpp"
#include "mmexit/factorization.hpp"
#include "mmexit/simulator.hpp"
#include "models.hpp"

using namespace mmexit;
using namespace mmexit::testing;

namespace {

// Kolmogorov-Smirnov distance of a sample to a continuous cdf.
template <class Cdf>
double ks_distance(std::vector<double> xs, Cdf F)
{
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = F(xs[i]);
        d = std::max({d, f - i / n, (i + 1) / n - f});
    }
    return d;
}

McOptions small(long long n, int threads = 0)
{
    McOptions o;
    o.n = n;
    o.seed = 7;
    o.threads = threads;
    return o;
}

} // namespace

TEST(Simulator, ThreadCountDoesNotChangeResults)
{
    McQuery q{"BT"};
    auto one = estimate(m2(), q, {0.0}, small(20'000, 1));
    auto four = estimate(m2(), q, {0.0}, small(20'000, 4));
    EXPECT_EQ(one[0].value, four[0].value);
    EXPECT_EQ(one[0].std_err, four[0].std_err);
    auto again = estimate(m2(), q, {0.0}, small(20'000, 3));
    EXPECT_EQ(one[0].value, again[0].value);
}

TEST(Simulator, SeedChangesResults)
{
    McQuery q{"BT"};
    McOptions a = small(5'000), b = small(5'000);
    b.seed = 8;
    EXPECT_NE(estimate(s2(), q, {0.0}, a)[0].value, estimate(s2(), q, {0.0}, b)[0].value);
}

TEST(Simulator, FrozenProcessNeverExits)
{
    ModelSpec still = s1();
    still.lambda(0) = 0.0;
    auto e = estimate(still, McQuery{"nonexit"}, {0.0}, small(10'000));
    EXPECT_EQ(e[0].value(0, 0), 1.0);
    EXPECT_EQ(e[0].std_err(0, 0), 0.0);
}

TEST(Simulator, UpwardOnlyPathsExitThroughTheTop)
{
    McQuery q{"BTlow"};
    q.s = 0.0;
    auto e = estimate(s1(), q, {0.0}, small(10'000));
    EXPECT_EQ(e[0].value(0, 0), 0.0);
}

TEST(Simulator, OvershootIsExponential)
{
    // Memoryless upward jumps: the overshoot over x is Exp(c).
    std::vector<double> over;
    for (long long b = 0; b < 50; ++b) {
        auto rng = block_engine(3, 0, b);
        for (long long i = 0; i < kReplicationBlock; ++i) {
            PathSummary p = simulate_until(s1(), 0, rng, ExitInterval{0.5, 1.0, 0.0});
            ASSERT_EQ(p.side, ExitSide::up);
            over.push_back(p.overshoot);
        }
    }
    EXPECT_LT(ks_distance(over, [](double z) { return 1.0 - std::exp(-z); }), 0.01);
}

TEST(Simulator, KillingTimeIsExponential)
{
    std::vector<double> theta;
    long long at_zero = 0;
    for (long long b = 0; b < 50; ++b) {
        auto rng = block_engine(4, 0, b);
        for (long long i = 0; i < kReplicationBlock; ++i) {
            PathSummary p = simulate_until(s1(), 0, rng, ExpKill{1.5});
            theta.push_back(p.stop_time);
            at_zero += p.xi == 0.0;
        }
    }
    EXPECT_LT(ks_distance(theta, [](double t) { return 1.0 - std::exp(-1.5 * t); }), 0.01);
    // No jump before theta with probability s / (s + lambda).
    const double n = static_cast<double>(theta.size()), p = 1.5 / 3.5;
    EXPECT_LT(std::abs(at_zero / n - p), 4.0 * std::sqrt(p * (1.0 - p) / n));
}

TEST(Simulator, OccupancyApproachesStationaryLaw)
{
    McQuery q{"occupancy"};
    q.t = 20.0;
    auto e = estimate(m2(), q, {0.0}, small(20'000));
    RealVector pi = stationary_distribution(m2().Q());
    for (int k = 0; k < 2; ++k) {
        for (int r = 0; r < 2; ++r) EXPECT_LT(std::abs(e[0].value(k, r) - pi(r)), 4.0 * e[0].std_err(k, r) + 1e-12);
    }
}

TEST(Simulator, ReserveStaysBelowBarrier)
{
    RiskModelSpec rs = r_two();
    for (int start = 0; start < 2; ++start) {
        auto rng = block_engine(5, start, 0);
        for (int i = 0; i < 2000; ++i) {
            std::vector<PathEvent> trace;
            PathSummary p = simulate_until(rs.base, start, rng, RiskBarrier{rs.B, rs.u, 0.5, 0.0}, {}, &trace);
            EXPECT_LE(p.reserve, rs.B);
            EXPECT_GE(p.dividends, 0.0);
            EXPECT_EQ(static_cast<long long>(std::count_if(trace.begin(), trace.end(),
                                                           [](const PathEvent& e) {
                                                               return e.kind == EventKind::barrier_hit;
                                                           })),
                      p.barrier_hits);
            if (p.barrier_hits == 0) EXPECT_EQ(p.dividends, 0.0);
        }
    }
}

TEST(Simulator, ScalarExitMatchesClosedForm)
{
    auto e = estimate(s1(), McQuery{"BT"}, {0.0}, small(100'000));
    const double exact = (2.0 / 3.0) * std::exp(-0.5 / 3.0);
    EXPECT_LT(std::abs(e[0].value(0, 0) - exact), 4.0 * e[0].std_err(0, 0));
}

TEST(Simulator, SupremumTailMatchesFactor)
{
    PlusFactor f = solve_plus_factor(m2(), 1.0);
    auto e = estimate(m2(), McQuery{"supTail"}, {0.5, 1.5}, small(50'000));
    for (std::size_t i = 0; i < e.size(); ++i) {
        RealMatrix exact = sup_tail(f, i == 0 ? 0.5 : 1.5);
        for (int k = 0; k < 2; ++k)
            for (int r = 0; r < 2; ++r) EXPECT_LT(std::abs(e[i].value(k, r) - exact(k, r)), 4.0 * e[i].std_err(k, r));
    }
}

TEST(Simulator, DividendMeanMatchesClosedForm)
{
    RiskModelSpec rs = r_two();
    PlusFactor f = solve_plus_factor(rs.base, 1.0);
    auto e = estimate(rs, McQuery{"dividendMean"}, {0.0}, small(100'000));
    RealMatrix exact = dividend_mean(rs, f);
    for (int k = 0; k < 2; ++k)
        for (int r = 0; r < 2; ++r) EXPECT_LT(std::abs(e[0].value(k, r) - exact(k, r)), 4.0 * e[0].std_err(k, r));
}

TEST(Simulator, ErrorsAreTyped)
{
    EXPECT_THROW(estimate(s1(), McQuery{"nosuch"}, {0.0}, small(10)), ArgumentError);
    EXPECT_THROW(estimate(s1(), McQuery{"etaCfRe"}, {0.0}, small(10)), ArgumentError);
    auto rng = block_engine(1, 0, 0);
    SimulationOptions tight;
    tight.max_events = 10;
    EXPECT_THROW(simulate_until(s1(), 0, rng, FixedTime{1e6}, tight), ConvergenceError);
}

TEST(Simulator, CatalogListsRiskEstimands)
{
    EXPECT_TRUE(is_risk_estimand("dividendMean"));
    EXPECT_FALSE(is_risk_estimand("BT"));
    EXPECT_GE(estimand_catalog().size(), 18u);
}
