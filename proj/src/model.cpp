#include "mmexit/model.hpp"

#include <cmath>
#include <sstream>

#include "mmexit/errors.hpp"

namespace mmexit {

namespace {

constexpr double kMassTol = 1e-9;

std::string at(int k) { return std::to_string(k + 1); }

std::string at(int k, int r) { return "(" + std::to_string(k + 1) + "," + std::to_string(r + 1) + ")"; }

void check_dist(const NegJumpDist& d, const std::string& name, double expected_mass,
                std::vector<std::string>& out)
{
    for (const auto& e : d.exponentials) {
        if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) out.push_back(name + " has a negative exponential weight");
        if (!(e.rate > 0.0) || !std::isfinite(e.rate)) out.push_back(name + " has a non-positive exponential rate");
    }
    for (const auto& a : d.atoms) {
        if (!(a.weight >= 0.0) || !std::isfinite(a.weight)) out.push_back(name + " has a negative atom weight");
        if (!(a.location <= 0.0)) {
            out.push_back(name + " violates upper semicontinuity: atom at positive location");
        }
    }
    double mass = d.total_mass();
    if (std::abs(mass - expected_mass) > kMassTol) {
        std::ostringstream os;
        os << name << " total mass " << mass << " differs from required " << expected_mass;
        out.push_back(os.str());
    }
}

} // namespace

NegJumpDist NegJumpDist::exponential(double weight, double rate)
{
    NegJumpDist d;
    d.exponentials.push_back({weight, rate});
    return d;
}

NegJumpDist NegJumpDist::point(double weight, double location)
{
    NegJumpDist d;
    d.atoms.push_back({weight, location});
    return d;
}

double NegJumpDist::total_mass() const
{
    double s = 0.0;
    for (const auto& e : exponentials) s += e.weight;
    for (const auto& a : atoms) s += a.weight;
    return s;
}

double NegJumpDist::mass_below(double z) const
{
    double s = 0.0;
    for (const auto& e : exponentials) s += e.weight * std::exp(e.rate * z);
    for (const auto& a : atoms) {
        if (a.location <= z) s += a.weight;
    }
    return s;
}

double NegJumpDist::zero_atom() const
{
    double s = 0.0;
    for (const auto& a : atoms) {
        if (a.location == 0.0) s += a.weight;
    }
    return s;
}

bool NegJumpDist::has_nonzero_atoms() const
{
    for (const auto& a : atoms) {
        if (a.location != 0.0 && a.weight != 0.0) return true;
    }
    return false;
}

double NegJumpDist::mean_abs() const
{
    double s = 0.0;
    for (const auto& e : exponentials) s += e.weight / e.rate;
    for (const auto& a : atoms) s += a.weight * std::abs(a.location);
    return s;
}

Complex NegJumpDist::transform(Complex alpha) const
{
    const Complex i(0.0, 1.0);
    Complex s = 0.0;
    for (const auto& e : exponentials) s += e.weight * e.rate / (e.rate + i * alpha);
    for (const auto& a : atoms) s += a.weight * std::exp(i * alpha * a.location);
    return s;
}

NegJumpDist NegJumpDist::scaled(double factor) const
{
    NegJumpDist d = *this;
    for (auto& e : d.exponentials) e.weight *= factor;
    for (auto& a : d.atoms) a.weight *= factor;
    return d;
}

std::vector<std::vector<NegJumpDist>> ModelSpec::zero_transition_jumps(const RealMatrix& P)
{
    std::vector<std::vector<NegJumpDist>> out(P.rows());
    for (Eigen::Index k = 0; k < P.rows(); ++k) {
        for (Eigen::Index r = 0; r < P.cols(); ++r) out[k].push_back(NegJumpDist::point(P(k, r), 0.0));
    }
    return out;
}

RealMatrix ModelSpec::N() const { return nu.asDiagonal(); }

RealMatrix ModelSpec::Q() const { return nu.asDiagonal() * (P - identity(m)); }

RealMatrix ModelSpec::Lambda() const { return lambda.asDiagonal(); }

RealMatrix ModelSpec::C() const { return c.asDiagonal(); }

RealMatrix ModelSpec::upward_intensity() const
{
    return lambda.cwiseProduct(pos_jump_prob).asDiagonal();
}

RealMatrix ModelSpec::downward_intensity() const
{
    RealVector d(m);
    for (int k = 0; k < m; ++k) d(k) = lambda(k) * (1.0 - pos_jump_prob(k));
    return d.asDiagonal();
}

bool ModelSpec::is_degenerate() const
{
    for (int k = 0; k < m; ++k) {
        if (lambda(k) * pos_jump_prob(k) > 0.0) return false;
        const auto& d = neg_jump[k];
        if (lambda(k) > 0.0 && d.total_mass() - d.zero_atom() > 0.0) return false;
        for (int r = 0; r < m; ++r) {
            const auto& t = trans_jump[k][r];
            if (t.total_mass() - t.zero_atom() > 0.0) return false;
        }
    }
    return true;
}

bool ModelSpec::has_nonzero_atoms() const
{
    for (int k = 0; k < m; ++k) {
        if (lambda(k) > 0.0 && neg_jump[k].has_nonzero_atoms()) return true;
        for (int r = 0; r < m; ++r) {
            if (trans_jump[k][r].has_nonzero_atoms()) return true;
        }
    }
    return false;
}

std::string ValidationReport::summary() const
{
    std::ostringstream os;
    if (valid()) {
        os << "valid, pi=[";
        for (Eigen::Index k = 0; k < pi.size(); ++k) os << (k ? "," : "") << pi(k);
        os << "]";
    } else {
        os << "invalid:";
        for (const auto& v : violations) os << " " << v << ";";
    }
    return os.str();
}

std::vector<KernelTerm> negative_kernel(const ModelSpec& spec)
{
    std::vector<KernelTerm> terms;
    for (int k = 0; k < spec.m; ++k) {
        for (int r = 0; r < spec.m; ++r) {
            const auto& d = spec.trans_jump[k][r];
            for (const auto& e : d.exponentials) {
                if (e.weight > 0.0) terms.push_back({k, r, spec.nu(k) * e.weight, false, e.rate});
            }
            for (const auto& a : d.atoms) {
                if (a.weight > 0.0) terms.push_back({k, r, spec.nu(k) * a.weight, true, a.location});
            }
        }
        if (spec.lambda(k) > 0.0) {
            const auto& d = spec.neg_jump[k];
            for (const auto& e : d.exponentials) {
                if (e.weight > 0.0) terms.push_back({k, k, spec.lambda(k) * e.weight, false, e.rate});
            }
            for (const auto& a : d.atoms) {
                if (a.weight > 0.0) terms.push_back({k, k, spec.lambda(k) * a.weight, true, a.location});
            }
        }
    }
    return terms;
}

double mean_drift(const ModelSpec& spec)
{
    require_valid(spec);
    const RealVector pi = stationary_distribution(spec.Q());
    double d = 0.0;
    for (int k = 0; k < spec.m; ++k) {
        double local = spec.lambda(k) * (spec.pos_jump_prob(k) / spec.c(k) - spec.neg_jump[k].mean_abs());
        for (int r = 0; r < spec.m; ++r) local -= spec.nu(k) * spec.trans_jump[k][r].mean_abs();
        d += pi(k) * local;
    }
    return d;
}

RealVector stationary_distribution(const RealMatrix& Q)
{
    const Eigen::Index m = Q.rows();
    RealMatrix a = Q.transpose();
    a.row(m - 1).setOnes();
    RealMatrix b = RealMatrix::Zero(m, 1);
    b(m - 1, 0) = 1.0;
    return solve(a, b).col(0);
}

ModelSpec time_reversed(const ModelSpec& spec)
{
    const int m = spec.m;
    RealVector pi = stationary_distribution(spec.Q());
    if (!(pi.minCoeff() > 0.0)) throw ArgumentError("time_reversed: the chain needs a positive stationary law");
    ModelSpec out = spec;
    for (int k = 0; k < m; ++k) {
        for (int r = 0; r < m; ++r) {
            double flux = pi(r) * spec.nu(r) * spec.P(r, k);
            out.P(k, r) = spec.nu(k) > 0.0 ? flux / (pi(k) * spec.nu(k)) : spec.P(k, r);
            const NegJumpDist& src = spec.trans_jump[r][k];
            out.trans_jump[k][r] = spec.P(r, k) > 0.0 ? src.scaled(out.P(k, r) / spec.P(r, k)) : src;
        }
    }
    return out;
}

ValidationReport validate(const ModelSpec& spec)
{
    ValidationReport rep;
    auto& v = rep.violations;
    const int m = spec.m;
    if (m < 1) {
        v.push_back("number of states must be at least 1");
        return rep;
    }
    auto sized = [&](Eigen::Index n, const char* name) {
        if (n != m) v.push_back(std::string(name) + " has wrong length");
        return n == m;
    };
    bool ok = sized(spec.nu.size(), "nu") & sized(spec.lambda.size(), "lambda") &
              sized(spec.c.size(), "c") & sized(spec.pos_jump_prob.size(), "pos_jump_prob") &
              sized(static_cast<Eigen::Index>(spec.neg_jump.size()), "neg_jump") &
              sized(static_cast<Eigen::Index>(spec.trans_jump.size()), "trans_jump");
    if (spec.P.rows() != m || spec.P.cols() != m) {
        v.push_back("P must be m x m");
        ok = false;
    }
    for (const auto& row : spec.trans_jump) {
        if (static_cast<int>(row.size()) != m) {
            v.push_back("trans_jump rows must have m entries");
            ok = false;
            break;
        }
    }
    if (!ok) return rep;

    for (int k = 0; k < m; ++k) {
        if (!(spec.nu(k) > 0.0) || !std::isfinite(spec.nu(k))) v.push_back("nu " + at(k) + " must be positive");
        if (!(spec.lambda(k) >= 0.0) || !std::isfinite(spec.lambda(k))) v.push_back("lambda " + at(k) + " must be nonnegative");
        if (!(spec.c(k) > 0.0) || !std::isfinite(spec.c(k))) v.push_back("c " + at(k) + " must be positive");
        double p = spec.pos_jump_prob(k);
        if (!(p >= 0.0 && p <= 1.0)) v.push_back("pos_jump_prob " + at(k) + " outside [0,1]");
        double row_sum = 0.0;
        for (int r = 0; r < m; ++r) {
            if (!(spec.P(k, r) >= 0.0)) v.push_back("P entry " + at(k, r) + " negative");
            row_sum += spec.P(k, r);
        }
        if (std::abs(row_sum - 1.0) > kMassTol) v.push_back("P row " + at(k) + " not stochastic");
        check_dist(spec.neg_jump[k], "neg_jump " + at(k), 1.0 - p, v);
        for (int r = 0; r < m; ++r) {
            check_dist(spec.trans_jump[k][r], "trans_jump " + at(k, r), spec.P(k, r), v);
        }
    }
    if (!v.empty()) return rep;

    // Irreducibility on the generator graph, primitivity of the uniformized chain.
    RealMatrix Q = spec.Q();
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> reach(m, m);
    for (int k = 0; k < m; ++k) {
        for (int r = 0; r < m; ++r) reach(k, r) = (k == r) || Q(k, r) > 0.0;
    }
    for (int via = 0; via < m; ++via) {
        for (int k = 0; k < m; ++k) {
            for (int r = 0; r < m; ++r) reach(k, r) = reach(k, r) || (reach(k, via) && reach(via, r));
        }
    }
    bool irreducible = reach.all();
    if (!irreducible) v.push_back("chain is not irreducible");
    if (irreducible) {
        double q = 1.0 + Q.diagonal().cwiseAbs().maxCoeff();
        RealMatrix u = identity(m) + Q / q;
        RealMatrix power = u;
        for (int i = 1; i < m; ++i) power = power * u;
        if (!((power.array() > 0.0).all())) v.push_back("uniformized chain is not primitive");
    }
    if (v.empty()) rep.pi = stationary_distribution(Q);
    return rep;
}

void require_valid(const ModelSpec& spec)
{
    auto rep = validate(spec);
    if (!rep.valid()) throw ValidationError(rep.summary());
}

ComplexMatrix cumulant(const ModelSpec& spec, Complex alpha)
{
    const Complex i(0.0, 1.0);
    const int m = spec.m;
    ComplexMatrix psi = to_complex(spec.Q());
    for (int k = 0; k < m; ++k) {
        double up = spec.lambda(k) * spec.pos_jump_prob(k);
        if (up > 0.0) psi(k, k) += up * (spec.c(k) / (spec.c(k) - i * alpha) - 1.0);
    }
    for (const auto& t : negative_kernel(spec)) {
        Complex tr = t.atom ? std::exp(i * alpha * t.param) : t.param / (t.param + i * alpha);
        psi(t.row, t.col) += t.coef * (tr - 1.0);
    }
    return psi;
}

ComplexMatrix char_function(const ModelSpec& spec, double s, Complex alpha)
{
    if (!(s > 0.0)) throw ArgumentError("char_function: s must be positive");
    ComplexMatrix a = Complex(s) * ComplexMatrix::Identity(spec.m, spec.m) - cumulant(spec, alpha);
    ComplexMatrix rhs = Complex(s) * ComplexMatrix::Identity(spec.m, spec.m);
    return solve(a, rhs);
}

RealMatrix resolvent_Ps(const ModelSpec& spec, double s)
{
    if (!(s > 0.0)) throw ArgumentError("resolvent_Ps: s must be positive");
    RealMatrix eye = identity(spec.m);
    return solve(s * eye - spec.Q(), s * eye);
}

ComplexMatrix k0_transform(const ModelSpec& spec, double alpha)
{
    const Complex i(0.0, 1.0);
    ComplexMatrix out = ComplexMatrix::Zero(spec.m, spec.m);
    for (const auto& t : negative_kernel(spec)) {
        Complex tr = t.atom ? std::exp(i * alpha * t.param) : t.param / (t.param + i * alpha);
        out(t.row, t.col) += t.coef * tr;
    }
    return out;
}

RealMatrix k0_tails(const ModelSpec& spec, double z)
{
    if (z == 0.0 || !std::isfinite(z)) throw ArgumentError("k0_tails: z must be finite and nonzero");
    RealMatrix out = RealMatrix::Zero(spec.m, spec.m);
    if (z > 0.0) {
        for (int k = 0; k < spec.m; ++k) {
            out(k, k) = spec.lambda(k) * spec.pos_jump_prob(k) * std::exp(-spec.c(k) * z);
        }
        return out;
    }
    for (const auto& t : negative_kernel(spec)) {
        if (t.atom) {
            if (t.param <= z) out(t.row, t.col) += t.coef;
        } else {
            out(t.row, t.col) += t.coef * std::exp(t.param * z);
        }
    }
    return out;
}

RealMatrix k0_mass(const ModelSpec& spec)
{
    RealMatrix out = RealMatrix::Zero(spec.m, spec.m);
    for (const auto& t : negative_kernel(spec)) out(t.row, t.col) += t.coef;
    return out;
}

} // namespace mmexit
