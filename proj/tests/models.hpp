#pragma once

#include <random>

#include "mmexit/model.hpp"
#include "mmexit/risk_dividend.hpp"

namespace mmexit::testing {

// Single state, upward exponential jumps only.
inline ModelSpec s1()
{
    ModelSpec m;
    m.m = 1;
    m.nu = RealVector::Ones(1);
    m.P = RealMatrix::Ones(1, 1);
    m.lambda = RealVector::Constant(1, 2.0);
    m.c = RealVector::Ones(1);
    m.pos_jump_prob = RealVector::Ones(1);
    m.neg_jump = {NegJumpDist{}};
    m.trans_jump = ModelSpec::zero_transition_jumps(m.P);
    return m;
}

// Single state with Exp(1) downward jumps; positive drift 0.375.
inline ModelSpec s2()
{
    ModelSpec m = s1();
    m.lambda(0) = 3.0;
    m.c(0) = 0.8;
    m.pos_jump_prob(0) = 0.5;
    m.neg_jump = {NegJumpDist::exponential(0.5, 1.0)};
    return m;
}

// Two states with mixed downward jumps and jumps at chain transitions.
inline ModelSpec m2()
{
    ModelSpec m;
    m.m = 2;
    m.nu = RealVector(2);
    m.nu << 1.0, 2.0;
    m.P = RealMatrix(2, 2);
    m.P << 0.0, 1.0, 1.0, 0.0;
    m.lambda = RealVector(2);
    m.lambda << 2.0, 3.0;
    m.c = RealVector(2);
    m.c << 1.0, 2.0;
    m.pos_jump_prob = RealVector(2);
    m.pos_jump_prob << 0.6, 0.4;
    NegJumpDist a, b;
    a.exponentials = {{0.3, 1.0}, {0.1, 3.0}};
    b.exponentials = {{0.4, 2.0}, {0.2, 0.5}};
    m.neg_jump = {a, b};
    m.trans_jump.assign(2, std::vector<NegJumpDist>(2));
    for (int k = 0; k < 2; ++k) {
        const int r = 1 - k;
        m.trans_jump[k][r].atoms = {{0.5, 0.0}};
        m.trans_jump[k][r].exponentials = {{0.5, 2.0}};
    }
    return m;
}

// M2 with lighter claims and mostly jump-free transitions; positive drift.
inline ModelSpec m2_up()
{
    ModelSpec m = m2();
    m.c << 1.25, 1.5;
    m.neg_jump[1].exponentials = {{0.4, 2.0}, {0.2, 4.0}};
    for (int k = 0; k < 2; ++k) {
        const int r = 1 - k;
        m.trans_jump[k][r].atoms = {{0.9, 0.0}};
        m.trans_jump[k][r].exponentials = {{0.1, 2.0}};
    }
    return m;
}

inline RiskModelSpec scalar_risk(double lambda2, double B = 2.0, double u = 1.0)
{
    RealVector one = RealVector::Ones(1);
    return make_risk_model(one, RealMatrix::Ones(1, 1), one, one, RealVector::Constant(1, lambda2),
                           {NegJumpDist::exponential(1.0, 1.0)}, B, u);
}

// Zero drift.
inline RiskModelSpec r1() { return scalar_risk(1.0); }
// Drift 0.5.
inline RiskModelSpec r2() { return scalar_risk(0.5); }

// Two states, one of them without claims.
inline RiskModelSpec r_mixed()
{
    RealVector nu(2), c(2), l1(2), l2(2);
    nu << 1.0, 2.0;
    c << 1.0, 2.0;
    l1 << 2.0, 3.0;
    l2 << 1.0, 0.0;
    RealMatrix P(2, 2);
    P << 0.0, 1.0, 1.0, 0.0;
    NegJumpDist mix;
    mix.exponentials = {{0.7, 1.0}, {0.3, 4.0}};
    return make_risk_model(nu, P, c, l1, l2, {mix, NegJumpDist::exponential(1.0, 2.0)}, 3.0, 1.2);
}

// Two states, claims in both, one claim law with an atom.
inline RiskModelSpec r_two()
{
    RealVector nu(2), c(2), l1(2), l2(2);
    nu << 1.0, 2.0;
    c << 1.0, 2.0;
    l1 << 2.0, 3.0;
    l2 << 1.0, 0.5;
    RealMatrix P(2, 2);
    P << 0.0, 1.0, 1.0, 0.0;
    return make_risk_model(nu, P, c, l1, l2, {NegJumpDist::exponential(1.0, 1.0), NegJumpDist::point(1.0, -0.7)},
                           3.0, 1.2);
}

// Random valid model with m states and mixed jump laws.
inline ModelSpec random_model(std::mt19937_64& rng, int m)
{
    std::uniform_real_distribution<double> u(0.2, 2.0), p01(0.05, 0.95);
    ModelSpec s;
    s.m = m;
    s.nu.resize(m);
    s.lambda.resize(m);
    s.c.resize(m);
    s.pos_jump_prob.resize(m);
    s.P = RealMatrix::Zero(m, m);
    for (int k = 0; k < m; ++k) {
        s.nu(k) = u(rng);
        s.lambda(k) = u(rng);
        s.c(k) = u(rng);
        s.pos_jump_prob(k) = p01(rng);
        double total = 0.0;
        for (int r = 0; r < m; ++r) {
            s.P(k, r) = (m == 1 || r != k) ? u(rng) : 0.0;
            total += s.P(k, r);
        }
        s.P.row(k) /= total;
        double w = p01(rng);
        NegJumpDist d;
        d.exponentials = {{w * (1.0 - s.pos_jump_prob(k)), u(rng)}};
        d.atoms = {{(1.0 - w) * (1.0 - s.pos_jump_prob(k)), 0.0}};
        s.neg_jump.push_back(d);
    }
    s.trans_jump.assign(m, std::vector<NegJumpDist>(m));
    for (int k = 0; k < m; ++k) {
        for (int r = 0; r < m; ++r) {
            double w = p01(rng);
            s.trans_jump[k][r].exponentials = {{w * s.P(k, r), u(rng)}};
            s.trans_jump[k][r].atoms = {{(1.0 - w) * s.P(k, r), 0.0}};
        }
    }
    return s;
}

} // namespace mmexit::testing
