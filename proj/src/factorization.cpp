#include "mmexit/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "mmexit/errors.hpp"

namespace mmexit {

namespace {

const Complex kI(0.0, 1.0);

// int dK_0(z) A exp(R z) over the negative kernel, one exponential transform per distinct
// rate or atom location.
RealMatrix kernel_image(const ModelSpec& spec, const std::vector<KernelTerm>& terms,
                        const RealMatrix& A, const RealMatrix& R)
{
    const int m = spec.m;
    RealMatrix out = RealMatrix::Zero(m, m);
    std::map<std::pair<bool, double>, RealMatrix> cache;
    for (const auto& t : terms) {
        auto key = std::make_pair(t.atom, t.param);
        auto it = cache.find(key);
        if (it == cache.end()) {
            RealMatrix tr;
            if (t.atom) {
                tr = mat_exp(R * t.param);
            } else {
                RealMatrix mu_i = t.param * identity(m);
                tr = solve(RealMatrix(mu_i + R), mu_i);
            }
            it = cache.emplace(key, A * tr).first;
        }
        out.row(t.row) += t.coef * it->second.row(t.col);
    }
    return out;
}

RealMatrix fixed_point_map(const ModelSpec& spec, const std::vector<KernelTerm>& terms,
                           const RealMatrix& lhs, const RealMatrix& p)
{
    const int m = spec.m;
    RealMatrix A = identity(m) - p;
    RealMatrix R = spec.C() * p;
    RealMatrix rhs = spec.upward_intensity() + kernel_image(spec, terms, A, R);
    return identity(m) - solve(lhs, rhs);
}

} // namespace

PlusFactor solve_plus_factor(const ModelSpec& spec, double s, double tol)
{
    PlusFactorOptions opts;
    opts.tol = tol;
    return solve_plus_factor(spec, s, opts);
}

PlusFactor solve_plus_factor(const ModelSpec& spec, double s, const PlusFactorOptions& opts)
{
    if (!(s > 0.0) || !std::isfinite(s)) throw ArgumentError("solve_plus_factor: s must be positive");
    if (!(opts.tol > 0.0)) throw ArgumentError("solve_plus_factor: tol must be positive");
    if (!(opts.damping > 0.0 && opts.damping <= 1.0)) throw ArgumentError("solve_plus_factor: damping must be in (0,1]");
    const int m = spec.m;
    const auto terms = negative_kernel(spec);
    RealMatrix lhs = s * identity(m) + spec.Lambda() + spec.N();

    RealMatrix p = (s / (s + inf_norm(spec.Lambda()))) * identity(m);
    std::vector<double> history;
    double residual = INFINITY;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        RealMatrix next = fixed_point_map(spec, terms, lhs, p);
        residual = inf_norm(RealMatrix(next - p));
        if (history.size() < 64) history.push_back(residual);
        if (!std::isfinite(residual)) break;
        if (residual < opts.tol) {
            p = next;
            break;
        }
        p += opts.damping * (next - p);
    }
    if (!(residual < opts.tol)) {
        std::ostringstream os;
        os << "solve_plus_factor: no convergence after " << it << " iterations (residual "
           << residual << ")";
        throw ConvergenceError(os.str(), residual, history);
    }

    PlusFactor f;
    f.s = s;
    f.Ps = resolvent_Ps(spec, s);
    f.p_star = p;
    f.R_star = spec.C() * p;
    f.p_plus = p * f.Ps;
    f.q_plus = f.Ps - f.p_plus;
    f.residual = residual;
    f.iterations = it + 1;
    return f;
}

RealMatrix plus_factor_defect(const ModelSpec& spec, double s, const RealMatrix& p_star)
{
    const int m = spec.m;
    RealMatrix A = identity(m) - p_star;
    RealMatrix lhs = (s * identity(m) + spec.Lambda() + spec.N()) * A;
    RealMatrix rhs = spec.upward_intensity() +
                     kernel_image(spec, negative_kernel(spec), A, spec.C() * p_star);
    return rhs - lhs;
}

ComplexMatrix phi_plus(const PlusFactor& factor, Complex alpha)
{
    const Eigen::Index m = factor.Ps.rows();
    ComplexMatrix R = to_complex(factor.R_star);
    ComplexMatrix shifted = R - alpha * kI * ComplexMatrix::Identity(m, m);
    ComplexMatrix ps = to_complex(factor.p_star);
    ComplexMatrix eye = ComplexMatrix::Identity(m, m);
    ComplexMatrix tail = (eye - ps) * solve(shifted.transpose(), R.transpose()).transpose();
    return (ps + tail) * to_complex(factor.Ps);
}

ComplexMatrix phi_minus(const ModelSpec& spec, const PlusFactor& factor, Complex alpha)
{
    const int m = spec.m;
    ComplexMatrix eye = ComplexMatrix::Identity(m, m);
    ComplexMatrix C = to_complex(spec.C());
    ComplexMatrix phi = Complex(factor.s) * solve(ComplexMatrix(Complex(factor.s) * eye - cumulant(spec, alpha)), eye);
    ComplexMatrix w = solve(ComplexMatrix(C - alpha * kI * eye), phi);
    ComplexMatrix pinv_w = solve(to_complex(factor.p_star), w);
    return C * w - alpha * kI * pinv_w;
}

RealMatrix sup_tail(const PlusFactor& factor, double x)
{
    if (!(x > 0.0)) throw ArgumentError("sup_tail: x must be positive");
    const Eigen::Index m = factor.Ps.rows();
    return (identity(m) - factor.p_star) * mat_exp(-factor.R_star * x) * factor.Ps;
}

InversionConfig default_inversion(const ModelSpec& spec)
{
    double max_rate = 0.0;
    for (const auto& t : negative_kernel(spec)) {
        if (!t.atom) max_rate = std::max(max_rate, t.param);
    }
    InversionConfig cfg;
    cfg.alpha_max = 40.0 * (spec.c.maxCoeff() + max_rate);
    cfg.n_alpha = 1 << 14;
    // Keep the aliasing period 2 pi / h at least 400 length units.
    while (cfg.step() > 2.0 * M_PI / 400.0) cfg.n_alpha *= 2;
    cfg.tol = 1e-7;
    return cfg;
}

MinusLaw::MinusLaw(const ModelSpec& spec, const PlusFactor& factor, const InversionConfig& cfg)
    : m_(spec.m), s_(factor.s)
{
    if (spec.has_nonzero_atoms()) {
        throw ArgumentError("MinusLaw: negative jumps with atoms away from 0 are not supported by the inversion");
    }
    const int m = m_;
    const double s = s_;
    const auto terms = negative_kernel(spec);
    RealMatrix C = spec.C();
    RealMatrix eye = identity(m);

    // Large-alpha expansion of Psi in z = 1/(i alpha): Psi = sum_k Psi_k z^k.
    const int K = kExpansionTerms;
    std::vector<RealMatrix> psi(K + 2, RealMatrix::Zero(m, m));
    psi[0] = spec.Q() - spec.upward_intensity();
    double kappa = 0.0;
    for (const auto& t : terms) {
        if (!t.atom) {
            psi[0](t.row, t.col) -= t.coef;
            kappa = std::max(kappa, t.param);
        }
    }
    RealMatrix Ck = eye;
    for (int k = 1; k <= K + 1; ++k) {
        Ck = Ck * C;
        psi[k] = -spec.upward_intensity() * Ck;
        for (const auto& t : terms) {
            if (!t.atom) psi[k](t.row, t.col) += t.coef * ((k % 2 == 1) ? 1.0 : -1.0) * std::pow(t.param, k);
        }
    }
    // (sI - Psi)^{-1} = sum X_n z^n.
    RealMatrix S0 = s * eye - psi[0];
    std::vector<RealMatrix> X(K + 1);
    X[0] = solve(S0, eye);
    for (int n = 1; n <= K; ++n) {
        RealMatrix acc = RealMatrix::Zero(m, m);
        for (int k = 1; k <= n; ++k) acc += psi[k] * X[n - k];
        X[n] = solve(S0, acc);
    }
    // (C - i alpha)^{-1} Phi = sum_{k>=1} W_k z^k.
    std::vector<RealMatrix> W(K + 2, RealMatrix::Zero(m, m));
    for (int k = 1; k <= K + 1; ++k) {
        RealMatrix acc = RealMatrix::Zero(m, m);
        RealMatrix Cj = eye;
        for (int j = 0; j <= k - 1; ++j) {
            acc -= Cj * (s * X[k - 1 - j]);
            Cj = Cj * C;
        }
        W[k] = acc;
    }
    RealMatrix pinv = inverse(factor.p_star);
    atom_ = -pinv * W[1];

    std::vector<RealMatrix> expansion(K);
    for (int k = 1; k <= K; ++k) expansion[k - 1] = C * W[k] - pinv * W[k + 1];

    double scale = 0.0;
    for (const auto& e : expansion) scale = std::max(scale, e.cwiseAbs().maxCoeff());
    if (kappa == 0.0 || scale == 0.0) {
        trivial_ = true;
        return;
    }
    RealMatrix atom = atom_;
    ModelSpec model = spec;
    PlusFactor f = factor;
    MatrixCf cf = [model, f, atom](double alpha) {
        return ComplexMatrix(phi_minus(model, f, Complex(alpha, 0.0)) - to_complex(atom));
    };
    inverter_ = std::make_unique<HalfLineInverter>(cf, expansion, kappa, cfg);
}

RealMatrix MinusLaw::density(double y) const
{
    if (y > 0.0) throw ArgumentError("MinusLaw::density: y must be <= 0");
    if (trivial_) return RealMatrix::Zero(m_, m_);
    return inverter_->density(y);
}

RealMatrix MinusLaw::cdf(double y) const
{
    if (y > 0.0) throw ArgumentError("MinusLaw::cdf: y must be <= 0");
    if (trivial_) return RealMatrix::Zero(m_, m_);
    return inverter_->cdf(y);
}

RealMatrix MinusLaw::laplace_below(double c, double w) const
{
    if (w > 0.0) throw ArgumentError("MinusLaw::laplace_below: w must be <= 0");
    if (trivial_) return RealMatrix::Zero(m_, m_);
    return inverter_->laplace_below(c, w);
}

double MinusLaw::truncation_estimate() const
{
    return trivial_ ? 0.0 : inverter_->truncation_estimate();
}

MinusGrid minus_grid(const MinusLaw& law, std::span<const double> y_grid, double tol)
{
    for (std::size_t i = 0; i < y_grid.size(); ++i) {
        if (y_grid[i] > 0.0) throw ArgumentError("minus_grid: y values must be <= 0");
        if (i > 0 && !(y_grid[i] > y_grid[i - 1])) throw ArgumentError("minus_grid: y grid must be strictly increasing");
    }
    MinusGrid g;
    g.s = law.s();
    g.atom_at_zero = law.atom();
    g.y.assign(y_grid.begin(), y_grid.end());
    for (std::size_t i = 0; i < y_grid.size(); ++i) {
        RealMatrix v = law.cdf(y_grid[i]);
        if (i > 0) {
            RealMatrix inc = v - g.cdf.back();
            double worst = inc.minCoeff();
            if (worst < -tol) {
                std::ostringstream os;
                os << "minus_grid: cdf decreases by " << -worst << " at y=" << y_grid[i];
                throw ConvergenceError(os.str(), -worst);
            }
            v = g.cdf.back() + inc.cwiseMax(0.0);
        } else {
            v = v.cwiseMax(0.0);
        }
        g.cdf.push_back(std::move(v));
    }
    return g;
}

MinusGrid minus_grid(const ModelSpec& spec, const PlusFactor& factor, std::span<const double> y_grid,
                     double alpha_max, int n_alpha)
{
    InversionConfig cfg = default_inversion(spec);
    cfg.alpha_max = alpha_max;
    cfg.n_alpha = n_alpha;
    MinusLaw law(spec, factor, cfg);
    return minus_grid(law, y_grid, 1e-7);
}

} // namespace mmexit
