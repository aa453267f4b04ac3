#include "mmexit/two_boundary.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mmexit/errors.hpp"

namespace mmexit {

namespace {

const Complex kI(0.0, 1.0);

// Composite Simpson weights on `intervals` equal cells; an odd count closes with the 3/8
// rule, a single cell falls back to the trapezoid.
std::vector<double> composite_weights(int intervals, double h)
{
    std::vector<double> w(intervals + 1, 0.0);
    if (intervals == 0) return w;
    if (intervals == 1) {
        w[0] = w[1] = 0.5 * h;
        return w;
    }
    int simpson = (intervals % 2 == 0) ? intervals : intervals - 3;
    for (int i = 0; i < simpson; i += 2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if (simpson != intervals) {
        int b = simpson;
        w[b] += 3.0 * h / 8.0;
        w[b + 1] += 9.0 * h / 8.0;
        w[b + 2] += 9.0 * h / 8.0;
        w[b + 3] += 3.0 * h / 8.0;
    }
    return w;
}

// phi1(x) = (1 - e^{-x}) / x and phi2(x) = (1 - e^{-x}(1 + x)) / x^2, stable near 0.
void phi12(double x, double& p1, double& p2)
{
    if (std::abs(x) < 0.5) {
        double term = 1.0;  // (-x)^k / k!
        p1 = 0.0;
        p2 = 0.0;
        for (int k = 0; k < 24; ++k) {
            p1 += term / (k + 1);
            p2 += term / (k + 2);
            term *= -x / (k + 1);
        }
        return;
    }
    double e = std::exp(-x);
    p1 = -std::expm1(-x) / x;
    p2 = (1.0 - e * (1.0 + x)) / (x * x);
}

// Weights of the two hat functions of a cell [0, h] against e^{-gamma t}.
void hat_weights(double gamma, double h, double& w_left, double& w_right)
{
    double p1, p2;
    phi12(gamma * h, p1, p2);
    w_right = h * p2;
    w_left = h * p1 - w_right;
}

RealMatrix diag_exp(const RealVector& rates, double z)
{
    RealVector d(rates.size());
    for (Eigen::Index k = 0; k < rates.size(); ++k) d(k) = std::exp(rates(k) * z);
    return d.asDiagonal();
}

} // namespace

ExitKernel make_exit_kernel(const ModelSpec& spec, const PlusFactor& factor,
                            std::shared_ptr<const MinusLaw> law)
{
    (void)spec;
    ExitKernel k;
    k.s = factor.s;
    k.p_star = factor.p_star;
    k.lower = std::make_shared<ScaledMeasure>(factor.p_star / factor.s, std::move(law));
    return k;
}

ExitKernel make_exit_kernel(const ModelSpec& spec, const PlusFactor& factor, const InversionConfig& cfg)
{
    ExitKernel k = make_exit_kernel(spec, factor, std::make_shared<const MinusLaw>(spec, factor, cfg));
    if (spec.m > 1) {
        ModelSpec rev = time_reversed(spec);
        PlusFactor rf = solve_plus_factor(rev, factor.s);
        k.reversed = std::make_shared<const ExitKernel>(
            make_exit_kernel(rev, rf, std::make_shared<const MinusLaw>(rev, rf, cfg)));
    }
    return k;
}

TwoBoundaryEngine::TwoBoundaryEngine(const ModelSpec& spec, ExitKernel kernel, double T, int n)
    : spec_(spec), kernel_(std::move(kernel)), T_(T), n_(n)
{
    if (!(T > 0.0) || !std::isfinite(T)) throw ArgumentError("two-boundary: T must be positive");
    if (n < 4) throw ArgumentError("two-boundary: grid needs at least 4 cells");
    if (!kernel_.lower) throw ArgumentError("two-boundary: missing lower measure");
    const int m = spec.m;
    h_ = T / n;
    RealMatrix eye = identity(m);
    C_ = spec.C();
    D_ = spec.upward_intensity();
    A_ = eye - kernel_.p_star;
    R_ = C_ * kernel_.p_star;
    Eh_ = mat_exp(-R_ * h_);
    Eh2_ = mat_exp(-R_ * (0.5 * h_));
    exp_neg_R_.resize(n + 1);
    exp_neg_R_[0] = eye;
    for (int i = 1; i <= n; ++i) exp_neg_R_[i] = exp_neg_R_[i - 1] * Eh_;

    rate_of_state_.resize(m);
    for (int k = 0; k < m; ++k) {
        auto it = std::find(rates_.begin(), rates_.end(), spec.c(k));
        if (it == rates_.end()) {
            rates_.push_back(spec.c(k));
            rate_of_state_[k] = static_cast<int>(rates_.size()) - 1;
        } else {
            rate_of_state_[k] = static_cast<int>(it - rates_.begin());
        }
    }

    const int half_nodes = 2 * n + 1;
    const double hh = 0.5 * h_;
    const LowerMeasure& lower = *kernel_.lower;
    density_.resize(half_nodes);
    laplace_.assign(rates_.size(), std::vector<RealMatrix>(half_nodes));
    for (int k = 0; k < half_nodes; ++k) {
        double y = (k == half_nodes - 1) ? 0.0 : -T + k * hh;
        density_[k] = lower.density(y);
        for (std::size_t l = 0; l < rates_.size(); ++l) laplace_[l][k] = lower.laplace_below(rates_[l], y);
    }

    // E(t) column r = L_{c_r}(t - T)_{:,r} e^{-c_r t}, t = i h.
    std::vector<RealMatrix> E(n + 1, RealMatrix::Zero(m, m));
    for (int i = 0; i <= n; ++i) {
        for (int r = 0; r < m; ++r) {
            E[i].col(r) = laplace_[rate_of_state_[r]][2 * i].col(r) * std::exp(-spec.c(r) * i * h_);
        }
    }
    std::vector<RealMatrix> G(n + 1), F(n + 1);
    for (int j = 0; j <= n; ++j) {
        RealMatrix conv = RealMatrix::Zero(m, m);
        auto w = composite_weights(j, h_);
        for (int i = 0; i <= j; ++i) conv += w[i] * exp_neg_R_[i] * C_ * E[j - i];
        G[j] = E[j] + A_ * conv;
        F[j] = A_ * exp_neg_R_[j];
    }

    auto solve_c0 = [&](int stride) {
        int cells = n / stride;
        auto w = composite_weights(cells, h_ * stride);
        RealMatrix M1 = RealMatrix::Zero(m, m), M2 = RealMatrix::Zero(m, m);
        for (int i = 0; i <= cells; ++i) {
            int j = i * stride;
            RealMatrix ez = diag_exp(spec.c, j * h_);
            M1 += w[i] * ez * F[j];
            M2 += w[i] * ez * G[j];
        }
        return solve(RealMatrix(eye + D_ * C_ * M2), RealMatrix(D_ * (eye + C_ * M1)));
    };
    C0_ = solve_c0(1);
    quad_estimate_ = (n % 2 == 0) ? inf_norm(RealMatrix(C0_ - solve_c0(2))) : 0.0;

    BT_.resize(n + 1);
    for (int j = 0; j <= n; ++j) BT_[j] = F[j] - G[j] * C0_;

    auto w = composite_weights(n, h_);
    RealMatrix integral = RealMatrix::Zero(m, m);
    for (int j = 0; j <= n; ++j) integral += w[j] * diag_exp(spec.c, j * h_) * BT_[j];
    residual_ = inf_norm(RealMatrix(C0_ - D_ * (eye + C_ * integral)));

    if (m > 1 && kernel_.reversed) {
        reversed_ = std::make_shared<const TwoBoundaryEngine>(time_reversed(spec), *kernel_.reversed, T, n);
        pi_ = stationary_distribution(spec.Q());
    }
}

template <typename Mat>
Mat TwoBoundaryEngine::from_reversed(const Mat& a) const
{
    using Scalar = typename Mat::Scalar;
    Mat out = a.transpose();
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) *= Scalar(pi_(c) / pi_(r));
    }
    return out;
}

void TwoBoundaryEngine::require_reversed(const char* who) const
{
    if (!reversed_) {
        throw ArgumentError(std::string(who) + ": a multi-state model needs the kernel of the time-reversed model");
    }
}

ScaledKilledDensity TwoBoundaryEngine::killed_density(int j) const
{
    if (j <= 0 || j >= n_) throw ArgumentError("killed_density: node must be interior");
    if (spec_.m == 1) return assemble_density(j, BT_[j], false);
    require_reversed("killed_density");
    ScaledKilledDensity d = reversed_->assemble_density(j, from_reversed(BT_[j]), true);
    for (auto& v : d.value) v = from_reversed(v);
    d.left_at_zero = from_reversed(d.left_at_zero);
    d.right_at_zero = from_reversed(d.right_at_zero);
    d.integral = from_reversed(d.integral);
    return d;
}

// Density of p* [P^- (I - V_+)] convolved with the supremum law, divided by s. With
// `overshoot_first` the exit factor reads C (C - i alpha)^{-1} B instead of B C (C - i alpha)^{-1}.
ScaledKilledDensity TwoBoundaryEngine::assemble_density(int j, const RealMatrix& exit,
                                                        bool overshoot_first) const
{
    const int m = spec_.m;
    const int n = n_;
    const int iz = n - j;
    const RealMatrix atom = kernel_.lower->atom();

    auto q_at = [&](int k) {
        double w = -T_ + 0.5 * h_ * k;
        RealMatrix out(m, m);
        for (int l = 0; l < m; ++l) {
            double c = spec_.c(l);
            const RealMatrix& L = laplace_[rate_of_state_[l]][k];
            if (overshoot_first) {
                out.col(l) = L.col(l) * std::exp(-c * w);
            } else {
                out.col(l) = (L * exit.col(l)) * (c * std::exp(-c * w));
            }
        }
        if (overshoot_first) out = out * C_ * exit;
        return out;
    };

    ScaledKilledDensity d;
    d.zero_index = iz;
    d.y.resize(n + 1);
    d.value.resize(n + 1);
    RealMatrix u = RealMatrix::Zero(m, m);
    RealMatrix u2 = RealMatrix::Zero(m, m);
    RealMatrix q = q_at(0);
    for (int i = 0; i <= n; ++i) {
        d.y[i] = (j - n + i) * h_;
        RealMatrix common = A_ * u - q - A_ * u2;
        if (i < iz) {
            d.value[i] = common + density_[2 * (j + i)];
        } else if (i == iz) {
            d.y[i] = 0.0;
            d.left_at_zero = common + density_[2 * n];
            u += C_ * atom;
            d.right_at_zero = A_ * u - q - A_ * u2;
            d.value[i] = d.left_at_zero;
        } else {
            d.value[i] = common;
        }
        if (i == n) break;
        if (i + 1 <= iz) {
            int k = 2 * (j + i);
            u = Eh_ * u + (h_ / 6.0) * (Eh_ * C_ * density_[k] + 4.0 * Eh2_ * C_ * density_[k + 1] +
                                        C_ * density_[k + 2]);
        } else {
            u = Eh_ * u;
        }
        RealMatrix q_mid = q_at(2 * i + 1);
        RealMatrix q_next = q_at(2 * i + 2);
        u2 = Eh_ * u2 + (h_ / 6.0) * (Eh_ * C_ * q + 4.0 * Eh2_ * C_ * q_mid + C_ * q_next);
        q = q_next;
    }

    d.integral = RealMatrix::Zero(m, m);
    auto w_low = composite_weights(iz, h_);
    for (int i = 0; i <= iz; ++i) d.integral += w_low[i] * (i == iz ? d.left_at_zero : d.value[i]);
    auto w_up = composite_weights(n - iz, h_);
    for (int i = iz; i <= n; ++i) d.integral += w_up[i - iz] * (i == iz ? d.right_at_zero : d.value[i]);
    return d;
}

ComplexMatrix TwoBoundaryEngine::killed_transform(const ScaledKilledDensity& d, double alpha) const
{
    const int m = spec_.m;
    const int n = static_cast<int>(d.y.size()) - 1;
    const int iz = d.zero_index;
    ComplexMatrix out = ComplexMatrix::Zero(m, m);
    auto w_low = composite_weights(iz, h_);
    for (int i = 0; i <= iz; ++i) {
        const RealMatrix& v = (i == iz) ? d.left_at_zero : d.value[i];
        out += (w_low[i] * std::polar(1.0, alpha * d.y[i])) * to_complex(v);
    }
    auto w_up = composite_weights(n - iz, h_);
    for (int i = iz; i <= n; ++i) {
        const RealMatrix& v = (i == iz) ? d.right_at_zero : d.value[i];
        out += (w_up[i - iz] * std::polar(1.0, alpha * d.y[i])) * to_complex(v);
    }
    return out;
}

ComplexMatrix TwoBoundaryEngine::lower_transform_above(double a, double alpha) const
{
    const double hh = 0.5 * h_;
    int k0 = static_cast<int>(std::lround((a + T_) / hh));
    if (k0 < 0 || k0 > 2 * n_ || std::abs(-T_ + k0 * hh - a) > 1e-9 * (1.0 + T_)) {
        throw ArgumentError("lower_transform_above: point is not on the half grid");
    }
    const int m = spec_.m;
    ComplexMatrix out = to_complex(kernel_.lower->atom());
    auto w = composite_weights(2 * n_ - k0, hh);
    for (int k = k0; k <= 2 * n_; ++k) {
        double y = (k == 2 * n_) ? 0.0 : -T_ + k * hh;
        out += (w[k - k0] * std::polar(1.0, alpha * y)) * to_complex(density_[k]);
    }
    (void)m;
    return out;
}

int grid_size_for(double T, double x, int n_min)
{
    if (!(x > 0.0 && x < T)) throw ArgumentError("x must lie strictly inside (0, T)");
    for (int n = std::max(n_min, 4); n <= 8 * std::max(n_min, 4); n += 2) {
        double p = x * n / T;
        if (std::abs(p - std::round(p)) < 1e-9) return n;
    }
    throw ArgumentError("x is not a grid node of T/n for any even n near the requested size");
}

RealMatrix killed_atom(const ModelSpec& spec, double s)
{
    const int m = spec.m;
    RealMatrix Z0 = RealMatrix::Zero(m, m), P0 = RealMatrix::Zero(m, m);
    for (int k = 0; k < m; ++k) {
        double p = spec.lambda(k) > 0.0 ? 1.0 - spec.pos_jump_prob(k) : 0.0;
        Z0(k, k) = (p > 0.0) ? spec.neg_jump[k].zero_atom() : 0.0;
        for (int r = 0; r < m; ++r) P0(k, r) = spec.trans_jump[k][r].zero_atom();
    }
    RealMatrix eye = identity(m);
    RealMatrix a = s * eye + spec.Lambda() * (eye - Z0) - spec.N() * (P0 - eye);
    return solve(a, RealMatrix(s * eye));
}

KilledLaw killed_law(const TwoBoundaryEngine& engine, int j)
{
    const double s = engine.s();
    if (!(s > 0.0)) throw ArgumentError("killed_law: needs s > 0");
    KilledLaw k;
    k.s = s;
    k.T = engine.T();
    k.x = engine.node(j);
    k.scaled = engine.killed_density(j);
    for (std::size_t i = 0; i < k.scaled.y.size(); ++i) {
        if (static_cast<int>(i) == k.scaled.zero_index) continue;
        if (i == 0 || i + 1 == k.scaled.y.size()) continue;  // interval end points
        k.y.push_back(k.scaled.y[i]);
        k.density.push_back(s * k.scaled.value[i]);
    }
    k.atom_at_zero = killed_atom(engine.spec(), s);
    k.non_exit = s * k.scaled.integral + k.atom_at_zero;
    double worst = 0.0;
    for (const auto& v : k.density) worst = std::min(worst, v.minCoeff());
    if (worst < -1e-6) {
        std::ostringstream os;
        os << "killed_law: density reaches " << worst << "; grid or inversion settings too coarse";
        throw ConvergenceError(os.str(), -worst);
    }
    return k;
}

ExitSplit exit_split(const RealMatrix& BT, const KilledLaw& killed, const RealMatrix& Ps)
{
    const Eigen::Index m = BT.rows();
    ExitSplit out;
    RealMatrix ne_pinv = solve(RealMatrix(Ps.transpose()), RealMatrix(killed.non_exit.transpose())).transpose();
    out.B = identity(m) - ne_pinv;
    out.BTlow = out.B - BT;
    return out;
}

TwoBoundarySolution solve_BT(const TwoBoundaryEngine& engine, bool with_split)
{
    TwoBoundarySolution sol;
    sol.s = engine.s();
    sol.T = engine.T();
    sol.C0 = engine.C0();
    sol.fixed_point_residual = engine.fixed_point_residual();
    sol.quadrature_estimate = engine.quadrature_estimate();
    RealMatrix Ps;
    if (with_split && sol.s > 0.0) Ps = resolvent_Ps(engine.spec(), sol.s);
    for (int j = 1; j < engine.n(); ++j) {
        sol.x.push_back(engine.node(j));
        sol.BT.push_back(engine.exit_up(j));
        if (with_split && sol.s > 0.0) {
            auto split = exit_split(sol.BT.back(), killed_law(engine, j), Ps);
            sol.B.push_back(split.B);
            sol.BTlow.push_back(split.BTlow);
        }
    }
    return sol;
}

OvershootTransform overshoot_transform(const ModelSpec& spec, const RealMatrix& BT, double x,
                                       double alpha)
{
    const int m = spec.m;
    ComplexMatrix ratio = ComplexMatrix::Zero(m, m);
    for (int k = 0; k < m; ++k) ratio(k, k) = spec.c(k) / Complex(spec.c(k), -alpha);
    OvershootTransform out;
    out.upper = to_complex(BT) * ratio;
    out.shifted = std::polar(1.0, alpha * x) * out.upper;
    return out;
}

namespace {

// Sum of w_i * v_i * f(y_i) over both pieces of the scaled killed density.
template <typename Mat, typename Fn>
Mat integrate_killed(const TwoBoundaryEngine& engine, const ScaledKilledDensity& d, Fn f)
{
    const int m = engine.spec().m;
    const int n = static_cast<int>(d.y.size()) - 1;
    const int iz = d.zero_index;
    Mat out = Mat::Zero(m, m);
    auto w_low = composite_weights(iz, engine.h());
    for (int i = 0; i <= iz; ++i) {
        const RealMatrix& v = (i == iz) ? d.left_at_zero : d.value[i];
        out += w_low[i] * (v.template cast<typename Mat::Scalar>() * f(d.y[i]));
    }
    auto w_up = composite_weights(n - iz, engine.h());
    for (int i = iz; i <= n; ++i) {
        const RealMatrix& v = (i == iz) ? d.right_at_zero : d.value[i];
        out += w_up[i - iz] * (v.template cast<typename Mat::Scalar>() * f(d.y[i]));
    }
    return out;
}

} // namespace

RealMatrix bratiichuk_tails(const TwoBoundaryEngine& engine, const KilledLaw& killed, double z)
{
    const ModelSpec& spec = engine.spec();
    const double s = killed.s;
    const double x = killed.x;
    const double T = killed.T;
    if (z > x) {
        RealVector up = spec.lambda.cwiseProduct(spec.pos_jump_prob);
        auto tail = [&](double y) {
            RealVector d(spec.m);
            for (int k = 0; k < spec.m; ++k) d(k) = up(k) * std::exp(-spec.c(k) * (z - y));
            return RealMatrix(d.asDiagonal());
        };
        return s * integrate_killed<RealMatrix>(engine, killed.scaled, tail) +
               killed.atom_at_zero * tail(0.0);
    }
    if (z < x - T) {
        auto tail = [&](double y) { return k0_tails(spec, z - y); };
        return s * integrate_killed<RealMatrix>(engine, killed.scaled, tail) +
               killed.atom_at_zero * tail(0.0);
    }
    throw ArgumentError("bratiichuk_tails: z must lie outside [x - T, x]");
}

ComplexMatrix lower_exit_transform(const TwoBoundaryEngine& engine, const KilledLaw& killed,
                                   double alpha)
{
    const ModelSpec& spec = engine.spec();
    const auto terms = negative_kernel(spec);
    const double edge = killed.x - killed.T;
    auto kernel = [&](double y) {
        double a = edge - y;
        ComplexMatrix out = ComplexMatrix::Zero(spec.m, spec.m);
        for (const auto& t : terms) {
            Complex v;
            if (t.atom) {
                v = (t.param < a) ? std::polar(1.0, alpha * t.param) : Complex(0.0);
            } else {
                Complex b(t.param, alpha);
                v = t.param * std::exp(b * a) / b;
            }
            out(t.row, t.col) += t.coef * v;
        }
        return ComplexMatrix(std::polar(1.0, alpha * y) * out);
    };
    return integrate_killed<ComplexMatrix>(engine, killed.scaled, kernel) +
           to_complex(killed.atom_at_zero / killed.s) * kernel(0.0);
}

ComplexMatrix killed_cf(const TwoBoundaryEngine& engine, const KilledLaw& killed, double alpha)
{
    return Complex(killed.s) * engine.killed_transform(killed.scaled, alpha) +
           to_complex(killed.atom_at_zero);
}

ComplexMatrix TwoBoundaryEngine::killed_cf_projection(int j, double alpha) const
{
    if (j <= 0 || j >= n_) throw ArgumentError("killed_cf_projection: node must be interior");
    if (!(s() > 0.0)) throw ArgumentError("killed_cf_projection: needs s > 0");
    if (spec_.m == 1) return project(j, BT_[j], false, alpha);
    require_reversed("killed_cf_projection");
    return from_reversed(reversed_->project(j, from_reversed(BT_[j]), true, alpha));
}

ComplexMatrix TwoBoundaryEngine::project(int j, const RealMatrix& exit, bool overshoot_first,
                                         double alpha) const
{
    const int m = spec_.m;
    const double x = node(j);
    ComplexMatrix eye = ComplexMatrix::Identity(m, m);
    ComplexMatrix B = to_complex(exit);

    ComplexMatrix part_a = lower_transform_above(x - T_, alpha);
    ComplexMatrix above_T = lower_transform_above(-T_, alpha);
    ComplexMatrix over = ComplexMatrix::Zero(m, m);
    for (int l = 0; l < m; ++l) over(l, l) = spec_.c(l) * std::polar(1.0, alpha * x) / Complex(spec_.c(l), -alpha);
    ComplexMatrix part_b = overshoot_first ? ComplexMatrix(above_T * over * B) : ComplexMatrix(above_T * B * over);
    // Post-supremum values below -T only reach [x - T, inf) through the overshoot.
    for (int l = 0; l < m; ++l) {
        double c = spec_.c(l);
        const RealMatrix& L = laplace_[rate_of_state_[l]][0];
        Complex f = std::exp(c * T_) * c * std::polar(1.0, alpha * (x - T_)) / Complex(c, -alpha);
        if (overshoot_first) {
            part_b += f * (L.col(l).cast<Complex>() * B.row(l));
        } else {
            part_b.col(l) += f * (L * exit.col(l)).cast<Complex>();
        }
    }
    // The engine measure is s^{-1} p* P^-; undo the scaling before applying Phi_+ P_s^{-1}.
    ComplexMatrix ps = to_complex(kernel_.p_star);
    ComplexMatrix proj = Complex(s()) * solve(ps, ComplexMatrix(part_a - part_b));
    ComplexMatrix lead = (to_complex(C_) - alpha * kI * eye) * ps;
    ComplexMatrix shifted = to_complex(R_) - alpha * kI * eye;
    return lead * solve(shifted, proj);
}

ComplexMatrix killed_cf_projection(const TwoBoundaryEngine& engine, int j, double alpha)
{
    return engine.killed_cf_projection(j, alpha);
}

std::vector<RealMatrix> volterra_oracle(const ModelSpec& spec, double s, double T, int n,
                                        const RealMatrix& up_value, const RealMatrix& down_value)
{
    if (!(s > 0.0)) throw ArgumentError("volterra_oracle: s must be positive");
    if (!(T > 0.0)) throw ArgumentError("volterra_oracle: T must be positive");
    if (n < 4) throw ArgumentError("volterra_oracle: grid needs at least 4 cells");
    const int m = spec.m;
    const double h = T / n;
    const int size = (n + 1) * m;
    const auto terms = negative_kernel(spec);
    RealMatrix sys = RealMatrix::Zero(size, size);
    RealMatrix rhs = RealMatrix::Zero(size, m);
    RealMatrix diag = s * identity(m) + spec.Lambda() + spec.N();
    RealVector up = spec.lambda.cwiseProduct(spec.pos_jump_prob);

    for (int i = 0; i <= n; ++i) {
        const double x = i * h;
        const int row0 = i * m;
        sys.block(row0, row0, m, m) += diag;
        for (int k = 0; k < m; ++k) {
            // Upward jumps: those beyond x leave through the top, the rest land in (0, x).
            if (up(k) == 0.0) continue;
            double c = spec.c(k);
            rhs.row(row0 + k) += up(k) * std::exp(-c * x) * up_value.row(k);
            for (int j = 0; j < i; ++j) {
                double f = up(k) * c * std::exp(-c * (x - j * h));
                double wl, wr;
                hat_weights(-c, h, wl, wr);
                sys(row0 + k, j * m + k) -= f * wl;
                sys(row0 + k, (j + 1) * m + k) -= f * wr;
            }
        }
        for (const auto& t : terms) {
            const int rk = row0 + t.row;
            if (t.atom) {
                double u = x - t.param;
                if (t.param < 0.0 && u >= T - 1e-12 * T) {
                    rhs.row(rk) += t.coef * down_value.row(t.col);
                } else {
                    double p = u / h;
                    int j0 = std::clamp(static_cast<int>(std::floor(p)), 0, n - 1);
                    if (u >= T) p = n;
                    double theta = p - j0;
                    sys(rk, j0 * m + t.col) -= t.coef * (1.0 - theta);
                    sys(rk, (j0 + 1) * m + t.col) -= t.coef * theta;
                }
                continue;
            }
            double mu = t.param;
            rhs.row(rk) += t.coef * std::exp(mu * (x - T)) * down_value.row(t.col);
            for (int j = i; j < n; ++j) {
                double f = t.coef * mu * std::exp(mu * (x - j * h));
                double wl, wr;
                hat_weights(mu, h, wl, wr);
                sys(rk, j * m + t.col) -= f * wl;
                sys(rk, (j + 1) * m + t.col) -= f * wr;
            }
        }
    }
    RealMatrix sol = solve(sys, rhs);
    std::vector<RealMatrix> out(n + 1);
    for (int i = 0; i <= n; ++i) out[i] = sol.block(i * m, 0, m, m);
    return out;
}

std::vector<RealMatrix> volterra_oracle_BT(const ModelSpec& spec, double s, double T, int n)
{
    return volterra_oracle(spec, s, T, n, identity(spec.m), RealMatrix::Zero(spec.m, spec.m));
}

LimitResult limit_p_star(const ModelSpec& spec, const LimitOptions& opts)
{
    return limit_s_to_zero([&](double s) { return solve_plus_factor(spec, s).p_star; }, opts.s_seq,
                           opts.rel_tol);
}

namespace {

ExitKernel finite_kernel(const ModelSpec& spec, double s, const InversionConfig& cfg, bool with_reversed)
{
    PlusFactor f = solve_plus_factor(spec, s);
    if (with_reversed) return make_exit_kernel(spec, f, cfg);
    return make_exit_kernel(spec, f, std::make_shared<const MinusLaw>(spec, f, cfg));
}

// Kernel at s = 0 extrapolated from kernels along the s sequence.
ExitKernel limit_kernel(const std::vector<double>& s_seq, const std::vector<ExitKernel>& ks, double rel_tol)
{
    std::vector<RealMatrix> p_stars;
    std::vector<std::shared_ptr<const LowerMeasure>> members;
    std::vector<ExitKernel> reversed;
    for (const auto& k : ks) {
        p_stars.push_back(k.p_star);
        members.push_back(k.lower);
        if (k.reversed) reversed.push_back(*k.reversed);
    }
    ExitKernel out;
    out.p_star = extrapolate_to_zero(s_seq, p_stars, rel_tol).value;
    out.lower = std::make_shared<ExtrapolatedMeasure>(s_seq, std::move(members), rel_tol);
    if (reversed.size() == ks.size()) {
        out.reversed = std::make_shared<const ExitKernel>(limit_kernel(s_seq, reversed, rel_tol));
    }
    return out;
}

// The limit measure M exists only when xi drifts to +infinity.
void require_positive_drift(const ModelSpec& spec)
{
    if (spec.is_degenerate()) {
        throw ConvergenceError("s -> 0 limit does not exist: the process never moves, so the exit time is infinite", INFINITY);
    }
    const double d = mean_drift(spec);
    if (!(d > 0.0)) {
        std::ostringstream os;
        os << "s -> 0 limit needs positive drift, got " << d;
        throw ArgumentError(os.str());
    }
}

} // namespace

std::shared_ptr<const LowerMeasure> limit_M(const ModelSpec& spec, const LimitOptions& opts)
{
    require_positive_drift(spec);
    InversionConfig cfg = default_inversion(spec);
    std::vector<std::shared_ptr<const LowerMeasure>> members;
    for (double s : opts.s_seq) members.push_back(finite_kernel(spec, s, cfg, false).lower);
    return std::make_shared<ExtrapolatedMeasure>(opts.s_seq, std::move(members), opts.rel_tol);
}

MIdentityCheck check_M_identity(const ModelSpec& spec, const LowerMeasure& M,
                                const RealMatrix& p_star0, double r)
{
    if (!(r > 0.0)) throw ArgumentError("check_M_identity: r must be positive");
    if ((spec.c.array() == r).any()) throw ArgumentError("check_M_identity: r must differ from every upward jump rate");
    const int m = spec.m;
    RealMatrix eye = identity(m);
    RealMatrix C = spec.C();
    MIdentityCheck out;
    out.r = r;
    out.lhs = M.atom() + M.laplace_below(r, 0.0);
    RealMatrix psi = cumulant(spec, Complex(0.0, -r)).real();
    RealMatrix left = (p_star0 * C - r * eye) * solve(RealMatrix(C - r * eye), eye);
    out.rhs = -left * solve(psi, eye);
    out.rel_error = inf_norm(RealMatrix(out.lhs - out.rhs)) / std::max(inf_norm(out.rhs), 1e-300);
    return out;
}

LimitBT limit_BT(const ModelSpec& spec, double T, const LimitOptions& opts)
{
    require_positive_drift(spec);
    InversionConfig cfg = default_inversion(spec);
    std::vector<ExitKernel> kernels;
    std::vector<std::vector<RealMatrix>> per_s;
    for (double s : opts.s_seq) {
        kernels.push_back(finite_kernel(spec, s, cfg, false));
        TwoBoundaryEngine engine(spec, kernels.back(), T, opts.n);
        std::vector<RealMatrix> row;
        for (int j = 1; j < opts.n; ++j) row.push_back(engine.exit_up(j));
        per_s.push_back(std::move(row));
    }
    LimitBT out;
    for (int j = 1; j < opts.n; ++j) {
        std::vector<RealMatrix> seq;
        for (const auto& row : per_s) seq.push_back(row[j - 1]);
        out.x.push_back(j * T / opts.n);
        out.extrapolated.push_back(extrapolate_to_zero(opts.s_seq, seq, opts.rel_tol).value);
    }
    TwoBoundaryEngine direct(spec, limit_kernel(opts.s_seq, kernels, opts.rel_tol), T, opts.n);
    for (int j = 1; j < opts.n; ++j) {
        out.direct.push_back(direct.exit_up(j));
        out.max_difference = std::max(out.max_difference,
                                      inf_norm(RealMatrix(out.direct.back() - out.extrapolated[j - 1])));
    }
    return out;
}

LimitDensity limit_density(const ModelSpec& spec, double T, double x, const LimitOptions& opts)
{
    require_positive_drift(spec);
    const int n = grid_size_for(T, x, opts.n);
    const int j = static_cast<int>(std::lround(x * n / T));
    InversionConfig cfg = default_inversion(spec);
    std::vector<ExitKernel> kernels;
    std::vector<ScaledKilledDensity> per_s;
    for (double s : opts.s_seq) {
        kernels.push_back(finite_kernel(spec, s, cfg, true));
        TwoBoundaryEngine engine(spec, kernels.back(), T, n);
        per_s.push_back(engine.killed_density(j));
    }
    TwoBoundaryEngine direct(spec, limit_kernel(opts.s_seq, kernels, opts.rel_tol), T, n);
    ScaledKilledDensity d = direct.killed_density(j);

    LimitDensity out;
    for (std::size_t i = 1; i + 1 < d.y.size(); ++i) {
        if (static_cast<int>(i) == d.zero_index) continue;
        std::vector<RealMatrix> seq;
        for (const auto& ps : per_s) seq.push_back(ps.value[i]);
        out.y.push_back(d.y[i]);
        out.direct.push_back(d.value[i]);
        out.extrapolated.push_back(extrapolate_to_zero(opts.s_seq, seq, opts.rel_tol).value);
        out.max_difference = std::max(out.max_difference,
                                      inf_norm(RealMatrix(out.direct.back() - out.extrapolated.back())));
    }
    return out;
}

} // namespace mmexit
