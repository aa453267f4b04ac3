#include "mmexit/transforms.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "mmexit/errors.hpp"

namespace mmexit {

namespace {

constexpr double kPi = std::numbers::pi;

// Steps e^{-i alpha_j y} along the midpoint nodes alpha_j = (j + 1/2) h.
class Rotor {
public:
    Rotor(double h, double y)
        : value_(std::polar(1.0, -0.5 * h * y)), step_(std::polar(1.0, -h * y))
    {
    }
    Complex value() const { return value_; }
    void advance() { value_ *= step_; }

private:
    Complex value_;
    Complex step_;
};

// Mass of (-inf, y] under the density (-t)^{j-1} e^{kappa t} / (j-1)!, for j = 1..J.
std::vector<double> gamma_tails(double kappa, double y, int count)
{
    std::vector<double> out(count, 0.0);
    double a = -y;
    double ea = std::exp(-kappa * a);
    // term_i = a^i / i!, accumulated against kappa^{-(j-i)}.
    for (int j = 1; j <= count; ++j) {
        double sum = 0.0;
        double term = 1.0;
        for (int i = 0; i < j; ++i) {
            if (i > 0) term *= a / i;
            sum += term * std::pow(kappa, -(j - i));
        }
        out[j - 1] = ea * sum;
    }
    return out;
}

double binomial(int n, int k)
{
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

void check_grid(std::span<const double> s)
{
    if (s.size() < 3) throw ArgumentError("limit_s_to_zero: need at least 3 s values");
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!(s[i] > 0.0)) throw ArgumentError("limit_s_to_zero: s values must be positive");
        if (i > 0 && !(s[i] < s[i - 1])) {
            throw ArgumentError("limit_s_to_zero: s sequence must be strictly decreasing");
        }
    }
}

} // namespace

void InversionConfig::check() const
{
    if (!(alpha_max > 0.0) || !std::isfinite(alpha_max)) throw ArgumentError("inversion: alpha_max must be > 0");
    if (n_alpha < 16 || n_alpha % 2 != 0) throw ArgumentError("inversion: n_alpha must be even and >= 16");
    if (!(tol > 0.0)) throw ArgumentError("inversion: tol must be > 0");
}

std::vector<RealMatrix> invert_cf_to_cdf(const MatrixCf& cf, const std::vector<LocatedAtom>& atoms,
                                         std::span<const double> y, const InversionConfig& cfg)
{
    cfg.check();
    ComplexMatrix at0 = cf(0.0);
    const Eigen::Index m = at0.rows();
    RealMatrix atom_total = RealMatrix::Zero(m, at0.cols());
    for (const auto& a : atoms) atom_total += a.mass;
    RealMatrix cont_mass = at0.real() - atom_total;

    const double h = cfg.step();
    std::vector<ComplexMatrix> g(cfg.n_alpha);
    for (int j = 0; j < cfg.n_alpha; ++j) {
        double alpha = (j + 0.5) * h;
        ComplexMatrix v = cf(alpha);
        for (const auto& a : atoms) v -= std::polar(1.0, alpha * a.location) * to_complex(a.mass);
        g[j] = v / alpha;
    }

    std::vector<RealMatrix> out;
    out.reserve(y.size());
    const int half = cfg.n_alpha / 2;
    for (double yy : y) {
        RealMatrix full = RealMatrix::Zero(m, at0.cols());
        RealMatrix partial;
        Rotor rot(h, yy);
        for (int j = 0; j < cfg.n_alpha; ++j) {
            if (j == half) partial = full;
            full += (rot.value() * g[j]).imag();
            rot.advance();
        }
        double estimate = (h / kPi) * (full - partial).cwiseAbs().maxCoeff();
        if (estimate > cfg.tol) {
            std::ostringstream os;
            os << "invert_cf_to_cdf: truncation estimate " << estimate << " at y=" << yy
               << " exceeds tol " << cfg.tol;
            throw ConvergenceError(os.str(), estimate);
        }
        RealMatrix value = 0.5 * cont_mass - (h / kPi) * full;
        for (const auto& a : atoms) {
            if (a.location < yy) value += a.mass;
        }
        out.push_back(std::move(value));
    }
    return out;
}

HalfLineInverter::HalfLineInverter(const MatrixCf& continuous_cf,
                                   const std::vector<RealMatrix>& expansion, double kappa,
                                   const InversionConfig& cfg)
    : kappa_(kappa), cfg_(cfg)
{
    cfg_.check();
    if (!(kappa > 0.0)) throw ArgumentError("HalfLineInverter: kappa must be > 0");
    ComplexMatrix at0 = continuous_cf(0.0);
    dim_ = static_cast<int>(at0.rows());

    // Coefficient of z^k (z = 1/(i alpha)) in 1/(kappa + i alpha)^j is
    // (-1)^{k-j} C(k-1, k-j) kappa^{k-j}; solve the triangular system for b_j.
    const int terms = static_cast<int>(expansion.size());
    ref_coeffs_.resize(terms);
    for (int k = 1; k <= terms; ++k) {
        RealMatrix b = expansion[k - 1];
        for (int j = 1; j < k; ++j) {
            double coef = ((k - j) % 2 == 0 ? 1.0 : -1.0) * binomial(k - 1, k - j) *
                          std::pow(kappa, k - j);
            b -= coef * ref_coeffs_[j - 1];
        }
        ref_coeffs_[k - 1] = b;
    }

    auto reference = [&](Complex w) {
        ComplexMatrix sum = ComplexMatrix::Zero(dim_, dim_);
        Complex inv = 1.0 / w;
        Complex pw = inv;
        for (int j = 0; j < terms; ++j) {
            sum += pw * to_complex(ref_coeffs_[j]);
            pw *= inv;
        }
        return sum;
    };

    remainder_at_zero_ = (at0 - reference(Complex(kappa, 0.0))).real();
    const double h = cfg_.step();
    samples_.resize(cfg_.n_alpha);
    for (int j = 0; j < cfg_.n_alpha; ++j) {
        double alpha = (j + 0.5) * h;
        samples_[j] = continuous_cf(alpha) - reference(Complex(kappa, alpha));
    }
    double tail = samples_.back().cwiseAbs().maxCoeff();
    truncation_estimate_ = tail * cfg_.alpha_max / (kPi * std::max(terms, 1));
}

RealMatrix HalfLineInverter::reference_cdf(double kappa, double y) const
{
    const int terms = static_cast<int>(ref_coeffs_.size());
    RealMatrix out = RealMatrix::Zero(dim_, dim_);
    if (terms == 0) return out;
    auto tails = gamma_tails(kappa, y, terms);
    for (int j = 0; j < terms; ++j) out += tails[j] * ref_coeffs_[j];
    return out;
}

RealMatrix HalfLineInverter::cdf(double y) const
{
    if (y > 0.0) throw ArgumentError("HalfLineInverter::cdf: y must be <= 0");
    const double h = cfg_.step();
    RealMatrix acc = RealMatrix::Zero(dim_, dim_);
    Rotor rot(h, y);
    for (int j = 0; j < cfg_.n_alpha; ++j) {
        double alpha = (j + 0.5) * h;
        acc += (rot.value() * samples_[j]).imag() / alpha;
        rot.advance();
    }
    return reference_cdf(kappa_, y) + 0.5 * remainder_at_zero_ - (h / kPi) * acc;
}

RealMatrix HalfLineInverter::density(double y) const
{
    if (y > 0.0) throw ArgumentError("HalfLineInverter::density: y must be <= 0");
    const double h = cfg_.step();
    RealMatrix acc = RealMatrix::Zero(dim_, dim_);
    Rotor rot(h, y);
    for (int j = 0; j < cfg_.n_alpha; ++j) {
        acc += (rot.value() * samples_[j]).real();
        rot.advance();
    }
    RealMatrix ref = RealMatrix::Zero(dim_, dim_);
    double a = -y;
    double term = std::exp(kappa_ * y);
    for (std::size_t j = 0; j < ref_coeffs_.size(); ++j) {
        if (j > 0) term *= a / static_cast<double>(j);
        ref += term * ref_coeffs_[j];
    }
    return ref + (h / kPi) * acc;
}

RealMatrix HalfLineInverter::laplace_below(double c, double w) const
{
    if (w > 0.0) throw ArgumentError("HalfLineInverter::laplace_below: w must be <= 0");
    if (!(c > 0.0)) throw ArgumentError("HalfLineInverter::laplace_below: c must be > 0");
    const double h = cfg_.step();
    RealMatrix acc = RealMatrix::Zero(dim_, dim_);
    Rotor rot(h, w);
    for (int j = 0; j < cfg_.n_alpha; ++j) {
        double alpha = (j + 0.5) * h;
        Complex f = rot.value() / Complex(c, -alpha);
        acc += (f * samples_[j]).real();
        rot.advance();
    }
    return reference_cdf(kappa_ + c, w) + std::exp(c * w) * (h / kPi) * acc;
}

ScaledMeasure::ScaledMeasure(RealMatrix left, std::shared_ptr<const LowerMeasure> base)
    : left_(std::move(left)), base_(std::move(base))
{
    if (!base_) throw ArgumentError("ScaledMeasure: null base measure");
    if (left_.cols() != base_->dim()) throw ArgumentError("ScaledMeasure: dimension mismatch");
}

LimitResult extrapolate_to_zero(std::span<const double> s, std::span<const RealMatrix> values,
                                double rel_tol)
{
    check_grid(s);
    if (values.size() != s.size()) throw ArgumentError("extrapolate_to_zero: size mismatch");
    const std::size_t n = s.size();
    for (const auto& v : values) {
        if (!all_finite(v)) throw ConvergenceError("extrapolate_to_zero: non-finite value in sequence", INFINITY);
    }

    std::vector<double> diffs;
    for (std::size_t i = 1; i < n; ++i) diffs.push_back(inf_norm(RealMatrix(values[i] - values[i - 1])));
    // Geometric sequences of a function regular at 0 give shrinking increments; steadily
    // growing increments mean the function blows up as s -> 0.
    int growth = 0;
    for (std::size_t i = 1; i < diffs.size(); ++i) {
        if (diffs[i] > 1.2 * diffs[i - 1] && diffs[i] > 1e-12) ++growth;
    }
    if (diffs.size() >= 2 && growth == static_cast<int>(diffs.size()) - 1) {
        throw ConvergenceError("limit_s_to_zero: sequence diverges as s -> 0", diffs.back(), diffs);
    }

    std::vector<std::vector<RealMatrix>> table(n);
    for (std::size_t i = 0; i < n; ++i) {
        table[i].push_back(values[i]);
        for (std::size_t k = 1; k <= i; ++k) {
            double w = s[i] / (s[i - k] - s[i]);
            table[i].push_back(table[i][k - 1] + w * (table[i][k - 1] - table[i - 1][k - 1]));
        }
    }
    LimitResult out;
    out.value = table[n - 1][n - 1];
    out.error_estimate = inf_norm(RealMatrix(table[n - 1][n - 1] - table[n - 2][n - 2]));
    double allowed = rel_tol * (1.0 + inf_norm(out.value));
    if (!(out.error_estimate < allowed)) {
        std::ostringstream os;
        os << "limit_s_to_zero: extrapolation error estimate " << out.error_estimate
           << " exceeds " << allowed;
        throw ConvergenceError(os.str(), out.error_estimate, diffs);
    }
    return out;
}

LimitResult limit_s_to_zero(const std::function<RealMatrix(double)>& f,
                            std::span<const double> s_seq, double rel_tol)
{
    check_grid(s_seq);
    std::vector<RealMatrix> values;
    values.reserve(s_seq.size());
    for (double s : s_seq) values.push_back(f(s));
    return extrapolate_to_zero(s_seq, values, rel_tol);
}

std::vector<double> geometric_sequence(double s0, double ratio, int n)
{
    if (!(s0 > 0.0) || !(ratio > 0.0 && ratio < 1.0) || n < 1) {
        throw ArgumentError("geometric_sequence: need s0 > 0, 0 < ratio < 1, n >= 1");
    }
    std::vector<double> out(n);
    double v = s0;
    for (int i = 0; i < n; ++i) {
        out[i] = v;
        v *= ratio;
    }
    return out;
}

ExtrapolatedMeasure::ExtrapolatedMeasure(std::vector<double> s_seq,
                                         std::vector<std::shared_ptr<const LowerMeasure>> members,
                                         double rel_tol)
    : s_(std::move(s_seq)), members_(std::move(members)), rel_tol_(rel_tol)
{
    check_grid(s_);
    if (members_.size() != s_.size()) throw ArgumentError("ExtrapolatedMeasure: size mismatch");
    for (const auto& m : members_) {
        if (!m) throw ArgumentError("ExtrapolatedMeasure: null member");
    }
}

RealMatrix ExtrapolatedMeasure::combine(const std::function<RealMatrix(const LowerMeasure&)>& f) const
{
    std::vector<RealMatrix> values;
    values.reserve(members_.size());
    for (const auto& m : members_) values.push_back(f(*m));
    return extrapolate_to_zero(s_, values, rel_tol_).value;
}

RealMatrix ExtrapolatedMeasure::atom() const
{
    return combine([](const LowerMeasure& m) { return m.atom(); });
}

RealMatrix ExtrapolatedMeasure::density(double y) const
{
    return combine([y](const LowerMeasure& m) { return m.density(y); });
}

RealMatrix ExtrapolatedMeasure::cdf(double y) const
{
    return combine([y](const LowerMeasure& m) { return m.cdf(y); });
}

RealMatrix ExtrapolatedMeasure::laplace_below(double c, double w) const
{
    return combine([c, w](const LowerMeasure& m) { return m.laplace_below(c, w); });
}

} // namespace mmexit
