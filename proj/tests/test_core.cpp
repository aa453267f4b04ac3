#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "mmexit/errors.hpp"
#include "mmexit/linalg.hpp"
#include "mmexit/model.hpp"
#include "mmexit/model_io.hpp"
#include "mmexit/table.hpp"
#include "models.hpp"

using namespace mmexit;
using namespace mmexit::testing;

namespace {

const Complex kI(0.0, 1.0);

} // namespace

TEST(Linalg, ExpOfDiagonalAndNilpotent)
{
    RealMatrix d = RealMatrix::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = -2.0;
    RealMatrix e = mat_exp(d);
    EXPECT_NEAR(e(0, 0), std::exp(1.0), 1e-14);
    EXPECT_NEAR(e(1, 1), std::exp(-2.0), 1e-15);
    RealMatrix n = RealMatrix::Zero(2, 2);
    n(0, 1) = 3.0;
    RealMatrix en = mat_exp(n);
    EXPECT_NEAR(en(0, 1), 3.0, 1e-14);
    EXPECT_NEAR(en(0, 0), 1.0, 1e-14);
}

TEST(Linalg, ExpOfRotationGenerator)
{
    RealMatrix a(2, 2);
    a << 0.0, -1.5, 1.5, 0.0;
    RealMatrix e = mat_exp(a);
    EXPECT_NEAR(e(0, 0), std::cos(1.5), 1e-14);
    EXPECT_NEAR(e(1, 0), std::sin(1.5), 1e-14);
}

TEST(Linalg, SolveRejectsSingularAndMismatched)
{
    RealMatrix a = RealMatrix::Ones(2, 2);
    EXPECT_THROW(solve(a, identity(2)), SingularMatrixError);
    EXPECT_THROW(solve(identity(2), identity(3)), ArgumentError);
    EXPECT_THROW(mat_exp(RealMatrix::Ones(2, 3)), ArgumentError);
}

TEST(Linalg, ComplexSolveMatchesInverse)
{
    ComplexMatrix a(2, 2);
    a << Complex(2, 1), Complex(0, 1), Complex(1, 0), Complex(3, -1);
    ComplexMatrix eye = ComplexMatrix::Identity(2, 2);
    ComplexMatrix x = solve(a, eye);
    EXPECT_LT(inf_norm(ComplexMatrix(a * x - eye)), 1e-14);
}

TEST(Model, TestModelsAreValid)
{
    for (const auto& m : {s1(), s2(), m2()}) EXPECT_TRUE(validate(m).valid()) << validate(m).summary();
    auto rep = validate(m2());
    EXPECT_NEAR(rep.pi(0), 2.0 / 3.0, 1e-14);
    EXPECT_NEAR(rep.pi(1), 1.0 / 3.0, 1e-14);
}

TEST(Model, ValidationListsEveryViolation)
{
    ModelSpec bad = m2();
    bad.nu(0) = -1.0;
    bad.pos_jump_prob(1) = 1.5;
    bad.P(0, 1) = 0.5;
    auto rep = validate(bad);
    EXPECT_GE(rep.violations.size(), 3u);
    EXPECT_THROW(require_valid(bad), ValidationError);
}

TEST(Model, ReducibleChainRejected)
{
    ModelSpec s = m2();
    s.P << 1.0, 0.0, 0.0, 1.0;
    s.trans_jump = ModelSpec::zero_transition_jumps(s.P);
    auto rep = validate(s);
    ASSERT_FALSE(rep.valid());
    EXPECT_NE(rep.summary().find("irreducible"), std::string::npos);
}

TEST(Model, CumulantAtZeroIsGenerator)
{
    std::mt19937_64 rng(11);
    for (int m : {1, 2, 3}) {
        ModelSpec s = random_model(rng, m);
        ASSERT_TRUE(validate(s).valid()) << validate(s).summary();
        EXPECT_LT(inf_norm(ComplexMatrix(cumulant(s, 0.0) - to_complex(s.Q()))), 1e-12);
        for (double sv : {0.5, 1.0, 2.0}) {
            RealMatrix Ps = resolvent_Ps(s, sv);
            EXPECT_LT((Ps.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
            EXPECT_GE(Ps.minCoeff(), 0.0);
        }
    }
}

TEST(Model, ScalarCumulantClosedForm)
{
    // lambda (c / (c - i a) - 1) for upward jumps only.
    for (double a : {-2.0, 0.3, 1.7}) {
        Complex expected = 2.0 * (1.0 / (1.0 - kI * a) - 1.0);
        EXPECT_LT(std::abs(cumulant(s1(), a)(0, 0) - expected), 1e-14);
        Complex phi = 1.0 * (1.0 - kI * a) / (1.0 * 1.0 - kI * a * (1.0 + 2.0));
        EXPECT_LT(std::abs(char_function(s1(), 1.0, a)(0, 0) - phi), 1e-14);
    }
}

TEST(Model, ScalarCumulantWithDownJumps)
{
    for (double a : {-1.0, 0.7, 3.0}) {
        Complex expected = 1.5 * (0.8 / (0.8 - kI * a) - 1.0) + 1.5 * (1.0 / (1.0 + kI * a) - 1.0);
        EXPECT_LT(std::abs(cumulant(s2(), a)(0, 0) - expected), 1e-14);
    }
}

TEST(Model, CumulantDerivativeGivesMeanDrift)
{
    // -i d/da pi Psi(a) 1 at a = 0 equals the stationary mean increment rate.
    ModelSpec s = m2();
    RealVector pi = validate(s).pi;
    const double h = 1e-5;
    ComplexMatrix d = (cumulant(s, h) - cumulant(s, -h)) / (2.0 * h);
    double slope = (pi.transpose() * d.imag() * RealVector::Ones(2))(0);
    double expected = 0.0;
    for (int k = 0; k < 2; ++k) {
        double up = s.lambda(k) * s.pos_jump_prob(k) / s.c(k);
        double down = 0.0;
        for (const auto& e : s.neg_jump[k].exponentials) down += s.lambda(k) * e.weight / e.rate;
        double trans = 0.0;
        for (int r = 0; r < 2; ++r) {
            for (const auto& e : s.trans_jump[k][r].exponentials) trans += s.nu(k) * e.weight / e.rate;
        }
        expected += pi(k) * (up - down - trans);
    }
    EXPECT_NEAR(slope, expected, 1e-8);
}

TEST(Model, TimeReversalConjugatesCumulant)
{
    ModelSpec s = m2();
    ModelSpec rev = time_reversed(s);
    ASSERT_TRUE(validate(rev).valid());
    RealVector pi = validate(s).pi;
    for (double a : {-1.0, 0.5, 2.0}) {
        ComplexMatrix psi = cumulant(s, a), psr = cumulant(rev, a);
        for (int k = 0; k < 2; ++k) {
            for (int r = 0; r < 2; ++r) EXPECT_LT(std::abs(psr(k, r) - psi(r, k) * pi(r) / pi(k)), 1e-14);
        }
    }
}

TEST(ModelIo, FilesMatchBuilders)
{
    auto same = [](const ModelSpec& a, const ModelSpec& b) {
        for (double al : {-1.0, 0.4, 2.5}) {
            EXPECT_LT(inf_norm(ComplexMatrix(cumulant(a, al) - cumulant(b, al))), 1e-14);
        }
    };
    same(load_scenario(MMEXIT_MODEL_DIR "/s1.model").model, s1());
    same(load_scenario(MMEXIT_MODEL_DIR "/s2.model").model, s2());
    same(load_scenario(MMEXIT_MODEL_DIR "/m2.model").model, m2());
    Scenario r = load_scenario(MMEXIT_MODEL_DIR "/r2.model");
    ASSERT_TRUE(r.risk.has_value());
    EXPECT_DOUBLE_EQ(r.risk->lambda2(0), 0.5);
    same(r.model, r2().base);
}

TEST(ModelIo, RoundTripThroughText)
{
    ModelSpec s = m2();
    Scenario back = parse_scenario(to_json_text(s));
    EXPECT_FALSE(back.risk.has_value());
    EXPECT_EQ(to_json_text(back.model), to_json_text(s));
    RiskModelSpec rs = r_mixed();
    Scenario rb = parse_scenario(to_json_text(rs));
    ASSERT_TRUE(rb.risk.has_value());
    EXPECT_EQ(to_json_text(*rb.risk), to_json_text(rs));
}

TEST(ModelIo, SchemaErrors)
{
    EXPECT_THROW(parse_scenario("{"), ValidationError);
    EXPECT_THROW(parse_scenario("[]"), ValidationError);
    EXPECT_THROW(parse_scenario(R"({"nu":[1],"P":[[1]],"lambda":[1],"c":[1],"pos_jump_prob":[1]})"),
                 ValidationError);
    EXPECT_THROW(parse_scenario(R"({"nu":[1],"P":[[1]],"lambda":[1],"c":[1],"pos_jump_prob":[1],"neg_jump":[{}],"typo":1})"),
                 ValidationError);
    EXPECT_THROW(parse_scenario(R"({"nu":[1,2],"P":[[1]],"lambda":[1],"c":[1],"pos_jump_prob":[1],"neg_jump":[{}]})"),
                 ValidationError);
    EXPECT_THROW(load_scenario("/nonexistent/file.model"), ArgumentError);
    // Risk files are checked on load: u must not exceed B.
    EXPECT_THROW(parse_scenario(R"({"nu":[1],"P":[[1]],"c":[1],"lambda1":[1],"lambda2":[1],
        "claims":[{"exponentials":[{"weight":1,"rate":1}]}],"B":1,"u":2})"),
                 ValidationError);
}

TEST(Table, CsvRoundTripIsByteIdentical)
{
    Table t({"quantity", "x", "k", "r", "value"});
    t.add_row({std::string("p_star"), 0.1, 1LL, 2LL, 1.0 / 3.0});
    t.add_row({std::string("with,comma"), std::string(), 2LL, 1LL, -2.5e-17});
    t.add_row({std::string("quote\"d"), 1e300, 1LL, 1LL, 0.0});
    std::string csv = to_csv(t);
    EXPECT_EQ(to_csv(parse_csv(csv)), csv);
    Table back = parse_csv(csv);
    EXPECT_EQ(std::get<double>(back.rows[0][4]), 1.0 / 3.0);
    EXPECT_EQ(std::get<std::string>(back.rows[1][0]), "with,comma");
    EXPECT_THROW(t.add_row({1LL}), ArgumentError);
}

TEST(Table, NumbersUseShortestRoundTrip)
{
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(2.0), "2");
    EXPECT_TRUE(std::holds_alternative<long long>(parse_cell("42")));
    EXPECT_TRUE(std::holds_alternative<double>(parse_cell("0.25")));
    EXPECT_TRUE(std::holds_alternative<std::string>(parse_cell("abc")));
}

TEST(Table, JsonLinesMirrorRows)
{
    Table t({"x", "name"});
    t.add_row({0.5, std::string("a")});
    t.add_row({1LL, std::string("b")});
    EXPECT_EQ(to_json_lines(t), "{\"x\":0.5,\"name\":\"a\"}\n{\"x\":1,\"name\":\"b\"}\n");
}

TEST(Model, MeanDrift)
{
    EXPECT_NEAR(mean_drift(s2()), 3.0 * (0.5 / 0.8 - 0.5), 1e-14);
    EXPECT_NEAR(mean_drift(s1()), 2.0, 1e-14);
    // Slope of the Perron root of Psi(-i r) at r = 0.
    for (const auto& spec : {m2(), m2_up()}) {
        const double h = 1e-5;
        auto root = [&](double r) { return cumulant(spec, Complex(0.0, -r)).real().eigenvalues().real().maxCoeff(); };
        EXPECT_NEAR(mean_drift(spec), (root(h) - root(-h)) / (2.0 * h), 1e-7);
    }
    EXPECT_GT(mean_drift(m2_up()), 0.0);
}
