#include "mmexit/cli.hpp"

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmexit/compare.hpp"
#include "mmexit/errors.hpp"
#include "mmexit/factorization.hpp"
#include "mmexit/model_io.hpp"
#include "mmexit/risk_dividend.hpp"
#include "mmexit/simulator.hpp"
#include "mmexit/table.hpp"
#include "mmexit/two_boundary.hpp"

namespace mmexit {

namespace {

struct Defaults {
    double s = 1.0;
    double x = 0.5;
    double T = 1.0;
    double t = 50.0;
    int grid = 512;
    int limit_grid = 128;
    std::vector<double> alpha = {0.5, 1.0, 2.0};
    std::vector<double> mu = {0.5, 1.0, 2.0};
    std::vector<double> y = {-4.0, -2.0, -1.0, -0.5, -0.25};
    std::vector<double> z = {-2.0, -1.5, 1.5, 2.0};
    std::vector<double> r = {0.5, 1.0, 2.0};
    long long paths = 100'000;
    std::uint64_t seed = 1;
    std::string format = "csv";
    double minus_tol = 1e-7;
};

const Defaults kDefaults;

std::string list_text(const std::vector<double>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_number(v[i]);
    return out;
}

struct Common {
    std::string model;
    std::string format = kDefaults.format;
    std::string output;
};

struct Params {
    double s = kDefaults.s;
    double x = kDefaults.x;
    double T = kDefaults.T;
    double t = kDefaults.t;
    int grid = kDefaults.grid;
    std::vector<double> alpha = kDefaults.alpha;
    std::vector<double> mu = kDefaults.mu;
    std::vector<double> y = kDefaults.y;
    std::vector<double> z = kDefaults.z;
    std::vector<double> r = kDefaults.r;
    std::vector<double> levels;
    std::string estimand;
    long long paths = kDefaults.paths;
    std::uint64_t seed = kDefaults.seed;
    int threads = 0;
    bool no_split = false;
};

void add_matrix(Table& t, const std::vector<Cell>& prefix, const RealMatrix& a)
{
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
        for (Eigen::Index r = 0; r < a.cols(); ++r) {
            std::vector<Cell> row = prefix;
            row.push_back(static_cast<long long>(k + 1));
            row.push_back(static_cast<long long>(r + 1));
            row.push_back(a(k, r));
            t.add_row(std::move(row));
        }
    }
}

// Rows quantity, arg, k, r, value.
void add_quantity(Table& t, const std::string& name, const Cell& arg, const RealMatrix& a)
{
    add_matrix(t, {name, arg}, a);
}

void add_scalar(Table& t, const std::string& name, double v)
{
    t.add_row({name, std::string(), std::string(), std::string(), v});
}

Scenario load(const Common& c)
{
    if (c.model.empty()) throw ArgumentError("--model is required");
    return load_scenario(c.model);
}

std::string pi_text(const RealVector& pi)
{
    std::vector<double> v(pi.data(), pi.data() + pi.size());
    return "[" + list_text(v) + "]";
}

Table cmd_factorize(const Scenario& sc, const Params& p)
{
    require_valid(sc.model);
    PlusFactor f = solve_plus_factor(sc.model, p.s);
    Table t({"quantity", "y", "k", "r", "value"});
    add_quantity(t, "Ps", std::string(), f.Ps);
    add_quantity(t, "p_plus", std::string(), f.p_plus);
    add_quantity(t, "q_plus", std::string(), f.q_plus);
    add_quantity(t, "p_star", std::string(), f.p_star);
    add_quantity(t, "R_star", std::string(), f.R_star);
    MinusLaw law(sc.model, f, default_inversion(sc.model));
    MinusGrid grid = minus_grid(law, p.y, kDefaults.minus_tol);
    add_quantity(t, "minus_atom", 0.0, grid.atom_at_zero);
    for (std::size_t i = 0; i < grid.y.size(); ++i) add_quantity(t, "minus_cdf", grid.y[i], grid.cdf[i]);
    add_scalar(t, "fixed_point_residual", f.residual);
    add_scalar(t, "iterations", f.iterations);
    return t;
}

std::unique_ptr<TwoBoundaryEngine> make_engine(const ModelSpec& spec, double s, double T, int n)
{
    require_valid(spec);
    if (!(s > 0.0)) throw ArgumentError("--s must be > 0");
    if (!(T > 0.0)) throw ArgumentError("--T must be > 0");
    if (n < 4) throw ArgumentError("--grid must be >= 4");
    PlusFactor f = solve_plus_factor(spec, s);
    return std::make_unique<TwoBoundaryEngine>(spec, make_exit_kernel(spec, f, default_inversion(spec)), T, n);
}

int node_of(const Params& p, int& n)
{
    if (!(p.x > 0.0 && p.x < p.T)) throw ArgumentError("--x must lie in (0, T)");
    n = grid_size_for(p.T, p.x, p.grid);
    return static_cast<int>(std::lround(p.x * n / p.T));
}

Table cmd_exit(const Scenario& sc, const Params& p)
{
    auto engine = make_engine(sc.model, p.s, p.T, p.grid);
    TwoBoundarySolution sol = solve_BT(*engine, !p.no_split);
    std::vector<std::string> cols = {"x", "k", "r", "BT"};
    if (!p.no_split) cols.insert(cols.end(), {"BTlow", "B"});
    Table t(cols);
    for (std::size_t j = 0; j < sol.x.size(); ++j) {
        for (int k = 0; k < sc.model.m; ++k) {
            for (int r = 0; r < sc.model.m; ++r) {
                std::vector<Cell> row = {sol.x[j], static_cast<long long>(k + 1), static_cast<long long>(r + 1),
                                         sol.BT[j](k, r)};
                if (!p.no_split) {
                    row.push_back(sol.BTlow[j](k, r));
                    row.push_back(sol.B[j](k, r));
                }
                t.add_row(std::move(row));
            }
        }
    }
    return t;
}

Table cmd_density(const Scenario& sc, const Params& p)
{
    int n = 0;
    const int j = node_of(p, n);
    auto engine = make_engine(sc.model, p.s, p.T, n);
    KilledLaw law = killed_law(*engine, j);
    Table t({"quantity", "y", "k", "r", "value"});
    for (std::size_t i = 0; i < law.y.size(); ++i) add_quantity(t, "density", law.y[i], law.density[i]);
    add_quantity(t, "atom", 0.0, law.atom_at_zero);
    add_quantity(t, "nonexit", std::string(), law.non_exit);
    return t;
}

Table cmd_tails(const Scenario& sc, const Params& p)
{
    int n = 0;
    const int j = node_of(p, n);
    auto engine = make_engine(sc.model, p.s, p.T, n);
    KilledLaw law = killed_law(*engine, j);
    Table t({"z", "k", "r", "value"});
    for (double z : p.z) {
        if (z <= p.x && z >= p.x - p.T) throw ArgumentError("--z values must lie outside [x - T, x]");
        add_matrix(t, {z}, bratiichuk_tails(*engine, law, z));
    }
    return t;
}

Table cmd_limits(const Scenario& sc, const Params& p)
{
    require_valid(sc.model);
    LimitOptions lo;
    lo.n = p.grid;
    Table t({"quantity", "arg", "k", "r", "value"});
    LimitResult p0 = limit_p_star(sc.model, lo);
    add_quantity(t, "p_star0", std::string(), p0.value);
    LimitBT bt = limit_BT(sc.model, p.T, lo);
    for (std::size_t j = 0; j < bt.x.size(); ++j) add_quantity(t, "BT_extrapolated", bt.x[j], bt.extrapolated[j]);
    for (std::size_t j = 0; j < bt.x.size(); ++j) add_quantity(t, "BT_direct", bt.x[j], bt.direct[j]);
    auto M = limit_M(sc.model, lo);
    for (double r : p.r) {
        MIdentityCheck chk = check_M_identity(sc.model, *M, p0.value, r);
        t.add_row({"M_identity_rel_error", r, std::string(), std::string(), chk.rel_error});
    }
    add_scalar(t, "BT_max_difference", bt.max_difference);
    return t;
}

const RiskModelSpec& need_risk(const Scenario& sc)
{
    if (!sc.risk) throw ArgumentError("this command needs a risk model file (with lambda1, lambda2, claims, B, u)");
    return *sc.risk;
}

Table cmd_risk(const Scenario& sc, const Params& p)
{
    const RiskModelSpec& rs = need_risk(sc);
    if (!(p.s > 0.0)) throw ArgumentError("--s must be > 0");
    PlusFactor f = solve_plus_factor(rs.base, p.s);
    Table t({"quantity", "arg", "k", "r", "re", "im"});
    auto add_complex = [&](const std::string& name, const Cell& arg, const ComplexMatrix& a) {
        for (Eigen::Index k = 0; k < a.rows(); ++k) {
            for (Eigen::Index r = 0; r < a.cols(); ++r) {
                t.add_row({name, arg, static_cast<long long>(k + 1), static_cast<long long>(r + 1), a(k, r).real(),
                           a(k, r).imag()});
            }
        }
    };
    for (double a : p.alpha) add_complex("phi_eta", a, phi_eta(rs, f, a));
    add_complex("zeta_star", p.s, to_complex(zeta_star_transform(rs, p.s)));
    DriftReport d = drift(rs);
    t.add_row({"m10", std::string(), std::string(), std::string(), d.m10, 0.0});
    if (d.m10 > 0.0) {
        EtaLimit lim = eta_limit_ingredients(rs);
        for (double a : p.alpha) add_complex("eta_limit", a, eta_limit(rs, lim, a));
        add_complex("eta_atom", std::string(), to_complex(eta_atom(rs, lim)));
    }
    return t;
}

Table cmd_dividend(const Scenario& sc, const Params& p)
{
    const RiskModelSpec& rs = need_risk(sc);
    if (!(p.s > 0.0)) throw ArgumentError("--s must be > 0");
    PlusFactor f = solve_plus_factor(rs.base, p.s);
    Table t({"quantity", "mu", "k", "r", "value"});
    for (double mu : p.mu) add_quantity(t, "transform", mu, dividend_transform(rs, f, mu));
    add_quantity(t, "atom", std::string(), dividend_atom(rs, f));
    add_quantity(t, "mean", std::string(), dividend_mean(rs, f));
    return t;
}

McQuery query_of(const Params& p)
{
    if (p.estimand.empty()) throw ArgumentError("--estimand is required");
    McQuery q;
    q.estimand = p.estimand;
    q.s = p.s;
    q.x = p.x;
    q.T = p.T;
    q.t = p.t;
    return q;
}

McOptions mc_of(const Params& p)
{
    if (p.paths < 1) throw ArgumentError("--paths must be >= 1");
    McOptions o;
    o.n = p.paths;
    o.seed = p.seed;
    o.threads = p.threads;
    return o;
}

Table cmd_simulate(const Scenario& sc, const Params& p)
{
    McQuery q = query_of(p);
    McOptions o = mc_of(p);
    auto est = sc.risk ? estimate(*sc.risk, q, p.levels, o) : estimate(sc.model, q, p.levels, o);
    Table t({"level", "k", "r", "mc", "stderr", "n", "seed"});
    const std::vector<double> levels = p.levels.empty() ? std::vector<double>{0.0} : p.levels;
    for (std::size_t i = 0; i < est.size(); ++i) {
        for (Eigen::Index k = 0; k < est[i].value.rows(); ++k) {
            for (Eigen::Index r = 0; r < est[i].value.cols(); ++r) {
                t.add_row({levels[i], static_cast<long long>(k + 1), static_cast<long long>(r + 1), est[i].value(k, r),
                           est[i].std_err(k, r), est[i].n, std::to_string(est[i].seed)});
            }
        }
    }
    return t;
}

Table cmd_compare(const Scenario& sc, const Params& p)
{
    McQuery q = query_of(p);
    AnalyticOptions ao;
    ao.n = p.grid;
    auto rows = compare(sc, q, p.levels, mc_of(p), ao);
    Table t({"level", "k", "r", "analytic", "mc", "stderr", "zscore"});
    for (const auto& row : rows) {
        for (Eigen::Index k = 0; k < row.analytic.rows(); ++k) {
            for (Eigen::Index r = 0; r < row.analytic.cols(); ++r) {
                t.add_row({row.level, static_cast<long long>(k + 1), static_cast<long long>(r + 1), row.analytic(k, r),
                           row.mc.value(k, r), row.mc.std_err(k, r), row.zscore(k, r)});
            }
        }
    }
    return t;
}

Table cmd_defaults()
{
    Table t({"name", "value", "meaning"});
    for (const auto& d : cli_defaults()) t.add_row({d.name, d.value, d.meaning});
    return t;
}

Table cmd_estimands()
{
    Table t({"estimand", "risk", "level"});
    for (const auto& [name, level] : estimand_catalog()) {
        t.add_row({name, std::string(is_risk_estimand(name) ? "yes" : "no"), level});
    }
    return t;
}

void emit(const Table& t, const Common& c, std::ostream& out)
{
    std::string text = c.format == "json" ? to_json_lines(t) : to_csv(t);
    if (c.output.empty()) {
        out << text;
        return;
    }
    std::ofstream f(c.output, std::ios::binary);
    if (!f) throw ArgumentError("cannot write '" + c.output + "'");
    f << text;
}

void error_record(std::ostream& err, const char* kind, int code, const std::string& message,
                  std::optional<double> residual = std::nullopt)
{
    nlohmann::ordered_json rec;
    rec["error"] = kind;
    rec["exit_code"] = code;
    rec["message"] = message;
    if (residual) rec["residual"] = *residual;
    err << rec.dump() << '\n';
}

} // namespace

const std::vector<DefaultEntry>& cli_defaults()
{
    static const std::vector<DefaultEntry> table = {
        {"s", format_number(kDefaults.s), "killing rate"},
        {"x", format_number(kDefaults.x), "upper level; the interval is (x - T, x)"},
        {"T", format_number(kDefaults.T), "interval width"},
        {"t", format_number(kDefaults.t), "fixed time for occupancy and etaAtomLongRun"},
        {"grid", std::to_string(kDefaults.grid), "two-boundary grid size (raised until x is a node)"},
        {"limit_grid", std::to_string(kDefaults.limit_grid), "grid size of the limits command"},
        {"alpha", list_text(kDefaults.alpha), "characteristic function arguments"},
        {"mu", list_text(kDefaults.mu), "dividend Laplace arguments"},
        {"y", list_text(kDefaults.y), "post-supremum cdf arguments"},
        {"z", list_text(kDefaults.z), "tail levels outside the interval"},
        {"r", list_text(kDefaults.r), "rates of the limit measure identity"},
        {"paths", std::to_string(kDefaults.paths), "Monte Carlo paths per start state"},
        {"seed", std::to_string(kDefaults.seed), "Monte Carlo seed"},
        {"format", kDefaults.format, "csv or json (one object per line)"},
        {"minus_tol", format_number(kDefaults.minus_tol), "cdf monotonicity tolerance of the minus grid"},
        {"factor_tol", format_number(PlusFactorOptions{}.tol), "fixed-point tolerance of p*_+(s)"},
        {"factor_damping", format_number(PlusFactorOptions{}.damping), "fixed-point damping of p*_+(s)"},
        {"limit_s", list_text(LimitOptions{}.s_seq), "s sequence of the s -> 0 extrapolation"},
        {"limit_rel_tol", format_number(LimitOptions{}.rel_tol), "relative tolerance of the extrapolation"},
        {"max_events", std::to_string(SimulationOptions{}.max_events), "event budget per simulated path"},
        {"block", std::to_string(kReplicationBlock), "replications per random engine"},
        {"MMEXIT_THREADS", "hardware concurrency", "environment cap on simulation threads"},
    };
    return table;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Exit problems and bounded-reserve risk for jump processes on a finite Markov chain"};
    app.require_subcommand(1);
    Common c;
    Params p;
    Table result;

    auto common = [&](CLI::App* sub, bool needs_model = true) {
        if (needs_model) sub->add_option("--model", c.model, "model file (JSON)")->required();
        sub->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--output,-o", c.output, "write to this file instead of stdout");
    };
    auto exit_params = [&](CLI::App* sub) {
        sub->add_option("--s", p.s, "killing rate");
        sub->add_option("--x", p.x, "upper level");
        sub->add_option("--T", p.T, "interval width");
        sub->add_option("--grid", p.grid, "grid size");
    };
    auto mc_params = [&](CLI::App* sub) {
        sub->add_option("--estimand", p.estimand, "named functional (see `estimands`)")->required();
        sub->add_option("--levels", p.levels, "level arguments of the estimand")->delimiter(',');
        sub->add_option("--t", p.t, "fixed time");
        sub->add_option("--paths", p.paths, "paths per start state");
        sub->add_option("--seed", p.seed, "seed");
        sub->add_option("--threads", p.threads, "worker threads (0: automatic)");
    };

    std::function<Table(const Scenario&)> action;
    bool validate_only = false;
    std::function<Table()> no_model_action;

    auto* validate_cmd = app.add_subcommand("validate", "check a model file");
    common(validate_cmd);
    validate_cmd->callback([&] { validate_only = true; });

    auto* factorize = app.add_subcommand("factorize", "supremum factor and post-supremum law");
    common(factorize);
    factorize->add_option("--s", p.s, "killing rate");
    factorize->add_option("--y", p.y, "post-supremum cdf arguments")->delimiter(',');
    factorize->callback([&] { action = [&](const Scenario& sc) { return cmd_factorize(sc, p); }; });

    auto* exit_cmd = app.add_subcommand("exit", "two-boundary exit transforms over the x grid");
    common(exit_cmd);
    exit_cmd->add_option("--s", p.s, "killing rate");
    exit_cmd->add_option("--T", p.T, "interval width");
    exit_cmd->add_option("--grid", p.grid, "grid size");
    exit_cmd->add_flag("--no-split", p.no_split, "skip the lower-exit and total columns");
    exit_cmd->callback([&] { action = [&](const Scenario& sc) { return cmd_exit(sc, p); }; });

    auto* density = app.add_subcommand("density", "killed density, atom at zero and nonexit probability");
    common(density);
    exit_params(density);
    density->callback([&] { action = [&](const Scenario& sc) { return cmd_density(sc, p); }; });

    auto* tails = app.add_subcommand("tails", "tails of the exit value beyond both levels");
    common(tails);
    exit_params(tails);
    tails->add_option("--z", p.z, "tail levels")->delimiter(',');
    tails->callback([&] { action = [&](const Scenario& sc) { return cmd_tails(sc, p); }; });

    auto* limits = app.add_subcommand("limits", "s -> 0 limits");
    common(limits);
    p.grid = kDefaults.grid;
    limits->add_option("--T", p.T, "interval width");
    limits->add_option("--grid", p.grid, "grid size")->default_val(kDefaults.limit_grid);
    limits->add_option("--r", p.r, "rates for the limit measure identity")->delimiter(',');
    limits->callback([&] { action = [&](const Scenario& sc) { return cmd_limits(sc, p); }; });

    auto* risk = app.add_subcommand("risk", "bounded reserve characteristic functions and limits");
    common(risk);
    risk->add_option("--s", p.s, "killing rate");
    risk->add_option("--alpha", p.alpha, "arguments")->delimiter(',');
    risk->callback([&] { action = [&](const Scenario& sc) { return cmd_risk(sc, p); }; });

    auto* dividend = app.add_subcommand("dividend", "dividend Laplace transform, atom and mean");
    common(dividend);
    dividend->add_option("--s", p.s, "killing rate");
    dividend->add_option("--mu", p.mu, "Laplace arguments")->delimiter(',');
    dividend->callback([&] { action = [&](const Scenario& sc) { return cmd_dividend(sc, p); }; });

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimate");
    common(simulate);
    exit_params(simulate);
    mc_params(simulate);
    simulate->callback([&] { action = [&](const Scenario& sc) { return cmd_simulate(sc, p); }; });

    auto* cmp = app.add_subcommand("compare", "analytic value next to its Monte Carlo estimate");
    common(cmp);
    exit_params(cmp);
    mc_params(cmp);
    cmp->callback([&] { action = [&](const Scenario& sc) { return cmd_compare(sc, p); }; });

    auto* defaults = app.add_subcommand("defaults", "list every default");
    common(defaults, false);
    defaults->callback([&] { no_model_action = cmd_defaults; });

    auto* estimands = app.add_subcommand("estimands", "list Monte Carlo estimands");
    common(estimands, false);
    estimands->callback([&] { no_model_action = cmd_estimands; });

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp&) {
            out << app.help();
            return 0;
        } catch (const CLI::CallForAllHelp&) {
            out << app.help("", CLI::AppFormatMode::All);
            return 0;
        } catch (const CLI::ParseError& e) {
            error_record(err, "ArgumentError", 3, e.what());
            return 3;
        }
        if (no_model_action) {
            emit(no_model_action(), c, out);
            return 0;
        }
        Scenario sc = load(c);
        if (validate_only) {
            ValidationReport rep = validate(sc.model);
            if (!rep.valid()) throw ValidationError(rep.summary());
            std::string line = "valid, pi=" + pi_text(rep.pi);
            if (sc.risk) line += ", m10=" + format_number(drift(*sc.risk).m10);
            out << line << '\n';
            return 0;
        }
        emit(action(sc), c, out);
        return 0;
    } catch (const ValidationError& e) {
        error_record(err, "ValidationError", 1, e.what());
        return 1;
    } catch (const ArgumentError& e) {
        error_record(err, "ArgumentError", 3, e.what());
        return 3;
    } catch (const ConvergenceError& e) {
        error_record(err, "ConvergenceError", 2, e.what(), e.residual());
        return 2;
    } catch (const SingularMatrixError& e) {
        error_record(err, "SingularMatrixError", 2, e.what());
        return 2;
    } catch (const NumericalError& e) {
        error_record(err, "NumericalError", 2, e.what());
        return 2;
    } catch (const std::exception& e) {
        error_record(err, "InternalError", 2, e.what());
        return 2;
    }
}

} // namespace mmexit
