#include "mmexit/compare.hpp"

#include <cmath>
#include <limits>

#include "mmexit/errors.hpp"
#include "mmexit/factorization.hpp"
#include "mmexit/two_boundary.hpp"

namespace mmexit {

namespace {

struct ExitSetup {
    std::unique_ptr<TwoBoundaryEngine> engine;
    int j = 0;
};

ExitSetup exit_setup(const ModelSpec& spec, const McQuery& q, const AnalyticOptions& opts)
{
    if (!(q.T > 0.0 && q.x > 0.0 && q.x < q.T)) throw ArgumentError("exit estimands need 0 < x < T");
    if (!(q.s > 0.0)) throw ArgumentError("exit estimands need s > 0");
    const int n = grid_size_for(q.T, q.x, opts.n);
    PlusFactor f = solve_plus_factor(spec, q.s);
    ExitSetup out;
    out.engine = std::make_unique<TwoBoundaryEngine>(spec, make_exit_kernel(spec, f, default_inversion(spec)), q.T, n);
    out.j = static_cast<int>(std::lround(q.x * n / q.T));
    return out;
}

// P{no exit, xi(theta) <= z}: the atom at 0 plus the trapezoid integral of h_s up to z.
RealMatrix killed_cdf(const KilledLaw& law, double z)
{
    const ScaledKilledDensity& d = law.scaled;
    const int m = static_cast<int>(law.atom_at_zero.rows());
    RealMatrix out = RealMatrix::Zero(m, m);
    if (z >= 0.0) out += law.atom_at_zero;
    const int iz = d.zero_index;
    auto value = [&](int i, bool from_left) -> const RealMatrix& {
        if (i == iz) return from_left ? d.left_at_zero : d.right_at_zero;
        return d.value[i];
    };
    for (std::size_t i = 0; i + 1 < d.y.size(); ++i) {
        const double a = d.y[i], b = d.y[i + 1];
        if (z <= a) break;
        const RealMatrix& fa = value(static_cast<int>(i), false);
        const RealMatrix& fb = value(static_cast<int>(i) + 1, true);
        if (z >= b) {
            out += 0.5 * (b - a) * law.s * (fa + fb);
        } else {
            const double w = (z - a) / (b - a);
            RealMatrix fz = (1.0 - w) * fa + w * fb;
            out += 0.5 * (z - a) * law.s * (fa + fz);
        }
    }
    return out;
}

const RiskModelSpec& risk_of(const Scenario& sc, const std::string& name)
{
    if (!sc.risk) throw ArgumentError("estimand '" + name + "' needs a risk model file");
    return *sc.risk;
}

} // namespace

std::vector<RealMatrix> analytic_estimand(const Scenario& sc, const McQuery& q, const std::vector<double>& levels_in,
                                          const AnalyticOptions& opts)
{
    const std::string& name = q.estimand;
    is_risk_estimand(name);  // rejects unknown names with the catalog
    const ModelSpec& spec = sc.model;
    require_valid(spec);
    const std::vector<double> levels = levels_in.empty() ? std::vector<double>{0.0} : levels_in;
    const int m = spec.m;
    std::vector<RealMatrix> out;
    auto each = [&](auto fn) {
        for (double l : levels) out.push_back(fn(l));
        return out;
    };

    if (name == "BT" || name == "BTlow" || name == "B" || name == "nonexit" || name == "killedCdf" ||
        name == "overshootCdf" || name == "upperTail" || name == "lowerTail") {
        ExitSetup ex = exit_setup(spec, q, opts);
        const RealMatrix BT = ex.engine->exit_up(ex.j);
        if (name == "BT") return each([&](double) { return BT; });
        if (name == "overshootCdf") {
            return each([&](double z) {
                if (z < 0.0) throw ArgumentError("overshootCdf needs z >= 0");
                RealVector cdf(m);
                for (int r = 0; r < m; ++r) cdf(r) = -std::expm1(-spec.c(r) * z);
                return RealMatrix(BT * cdf.asDiagonal());
            });
        }
        KilledLaw law = killed_law(*ex.engine, ex.j);
        if (name == "nonexit") return each([&](double) { return law.non_exit; });
        if (name == "killedCdf") return each([&](double z) { return killed_cdf(law, z); });
        ExitSplit split = exit_split(BT, law, resolvent_Ps(spec, q.s));
        if (name == "B") return each([&](double) { return split.B; });
        if (name == "BTlow") return each([&](double) { return split.BTlow; });
        if (name == "upperTail") {
            return each([&](double z) {
                if (!(z > q.x)) throw ArgumentError("upperTail needs z > x");
                return RealMatrix(bratiichuk_tails(*ex.engine, law, z) / q.s);
            });
        }
        return each([&](double z) {
            if (!(z < q.x - q.T)) throw ArgumentError("lowerTail needs z < x - T");
            return RealMatrix(bratiichuk_tails(*ex.engine, law, z) / q.s);
        });
    }
    if (name == "exitProb") {
        if (!(q.T > 0.0 && q.x > 0.0 && q.x < q.T)) throw ArgumentError("exitProb needs 0 < x < T");
        LimitOptions lo;
        lo.n = grid_size_for(q.T, q.x, opts.n);
        LimitBT lim = limit_BT(spec, q.T, lo);
        const int j = static_cast<int>(std::lround(q.x * lo.n / q.T));
        return each([&](double) { return lim.extrapolated[j - 1]; });
    }
    if (name == "supTail" || name == "pplus" || name == "minusCdf") {
        if (!(q.s > 0.0)) throw ArgumentError(name + " needs s > 0");
        PlusFactor f = solve_plus_factor(spec, q.s);
        if (name == "pplus") return each([&](double) { return f.p_plus; });
        if (name == "supTail") {
            return each([&](double x) {
                if (!(x > 0.0)) throw ArgumentError("supTail needs x > 0");
                return sup_tail(f, x);
            });
        }
        MinusLaw law(spec, f, default_inversion(spec));
        return each([&](double y) {
            if (!(y < 0.0)) throw ArgumentError("minusCdf needs y < 0");
            return law.cdf(y);
        });
    }
    if (name == "thetaCdf") {
        if (!(q.s > 0.0)) throw ArgumentError("thetaCdf needs s > 0");
        RealMatrix Ps = resolvent_Ps(spec, q.s);
        return each([&](double t) {
            if (t <= 0.0) return RealMatrix(RealMatrix::Zero(m, m));
            RealMatrix decay = mat_exp(RealMatrix((spec.Q() - q.s * identity(m)) * t));
            return RealMatrix(Ps * (identity(m) - decay));
        });
    }
    if (name == "occupancy") {
        RealMatrix e = mat_exp(RealMatrix(spec.Q() * q.t));
        return each([&](double) { return e; });
    }

    const RiskModelSpec& rs = risk_of(sc, name);
    if (name == "etaAtomLongRun") {
        RealMatrix atom = eta_atom(rs, eta_limit_ingredients(rs));
        return each([&](double) { return atom; });
    }
    if (!(q.s > 0.0)) throw ArgumentError(name + " needs s > 0");
    PlusFactor f = solve_plus_factor(rs.base, q.s);
    if (name == "etaCfRe") return each([&](double a) { return RealMatrix(phi_eta(rs, f, a).real()); });
    if (name == "etaCfIm") return each([&](double a) { return RealMatrix(phi_eta(rs, f, a).imag()); });
    if (name == "dividendLaplace") return each([&](double mu) { return dividend_transform(rs, f, mu); });
    if (name == "dividendMean") return each([&](double) { return dividend_mean(rs, f); });
    throw ArgumentError("estimand '" + name + "' has no analytic counterpart");
}

std::vector<ComparisonRow> compare(const Scenario& sc, const McQuery& query, const std::vector<double>& levels_in,
                                   const McOptions& mc, const AnalyticOptions& opts)
{
    const std::vector<double> levels = levels_in.empty() ? std::vector<double>{0.0} : levels_in;
    auto analytic = analytic_estimand(sc, query, levels, opts);
    auto sim = sc.risk ? estimate(*sc.risk, query, levels, mc) : estimate(sc.model, query, levels, mc);
    std::vector<ComparisonRow> out;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        ComparisonRow row;
        row.level = levels[i];
        row.analytic = analytic[i];
        row.mc = sim[i];
        RealMatrix gap = row.analytic - row.mc.value;
        row.zscore = RealMatrix::Zero(gap.rows(), gap.cols());
        for (Eigen::Index k = 0; k < gap.rows(); ++k) {
            for (Eigen::Index r = 0; r < gap.cols(); ++r) {
                double se = row.mc.std_err(k, r);
                if (se > 0.0) {
                    row.zscore(k, r) = gap(k, r) / se;
                } else if (std::abs(gap(k, r)) > 1e-12) {
                    row.zscore(k, r) = std::copysign(std::numeric_limits<double>::infinity(), gap(k, r));
                }
            }
        }
        out.push_back(std::move(row));
    }
    return out;
}

} // namespace mmexit
