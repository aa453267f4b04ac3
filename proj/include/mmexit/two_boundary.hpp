#pragma once

#include <memory>
#include <span>
#include <vector>

#include "mmexit/factorization.hpp"
#include "mmexit/linalg.hpp"
#include "mmexit/model.hpp"
#include "mmexit/transforms.hpp"

namespace mmexit {

/// Ingredients shared by the finite-s formulas and their s -> 0 limits.
///
/// For s > 0: p_star = p*_+(s) and lower = s^{-1} p*_+(s) P^-(s, .).
/// For the limit (s = 0): p_star = p*_+(0) and lower = M.
struct ExitKernel {
    double s = 0.0;
    RealMatrix p_star;
    std::shared_ptr<const LowerMeasure> lower;
    /// Same ingredients for the time-reversed model. The killed law of a multi-state model
    /// is assembled from it.
    std::shared_ptr<const ExitKernel> reversed;
};

ExitKernel make_exit_kernel(const ModelSpec& spec, const PlusFactor& factor,
                            std::shared_ptr<const MinusLaw> law);
/// Inverts the minus law and, for m > 1, also builds the kernel of the time-reversed model.
ExitKernel make_exit_kernel(const ModelSpec& spec, const PlusFactor& factor, const InversionConfig& cfg);

/// Killed density divided by s on the nodes y_i = x - T + i h, i = 0..n.
struct ScaledKilledDensity {
    std::vector<double> y;
    std::vector<RealMatrix> value;
    int zero_index = -1;          // node where y == 0
    RealMatrix left_at_zero;      // one-sided limits at y = 0
    RealMatrix right_at_zero;
    /// Integral over (x - T, x).
    RealMatrix integral;
};

/// Uniform-grid evaluation of the exit transform and the killed density.
///
/// Nodes are x_j = j T / n. Once the constant C_0 is solved for, the exit transform is
/// explicit: B^T(x) = (I - p*) e^{-R x} - G(x) C_0.
///
/// For m > 1 the killed law comes from the infimum-first factorization, which is the
/// supremum-first one of the time-reversed model conjugated by X -> Delta^{-1} X^T Delta.
/// The engine then keeps a twin built on the reversed kernel.
class TwoBoundaryEngine {
public:
    TwoBoundaryEngine(const ModelSpec& spec, ExitKernel kernel, double T, int n);

    int n() const { return n_; }
    double T() const { return T_; }
    double h() const { return h_; }
    double node(int j) const { return j * h_; }
    double s() const { return kernel_.s; }
    const RealMatrix& C0() const { return C0_; }
    /// Change of C_0 when the outer quadrature uses every other node.
    double quadrature_estimate() const { return quad_estimate_; }
    /// Defect of the defining relation of C_0 on the grid.
    double fixed_point_residual() const { return residual_; }

    /// B^T at node j (0 <= j <= n; the end nodes are one-sided limits).
    RealMatrix exit_up(int j) const { return BT_[j]; }
    ScaledKilledDensity killed_density(int j) const;
    /// Killed characteristic function at node j through the Wiener-Hopf projection.
    ComplexMatrix killed_cf_projection(int j, double alpha) const;

    /// Complex integral of exp(i alpha y) against the scaled killed density at node j.
    ComplexMatrix killed_transform(const ScaledKilledDensity& d, double alpha) const;

    const ModelSpec& spec() const { return spec_; }
    const ExitKernel& kernel() const { return kernel_; }

    /// Integral of exp(i alpha y) dmu(y) over [a, 0] (atom included), a on the half grid.
    ComplexMatrix lower_transform_above(double a, double alpha) const;
    /// L_c(w) of the lower measure at w = -T + k h / 2.
    RealMatrix lower_laplace(int c_index, int k) const { return laplace_[c_index][k]; }
    int rate_index(int state) const { return rate_of_state_[state]; }

private:
    ScaledKilledDensity assemble_density(int j, const RealMatrix& exit, bool overshoot_first) const;
    ComplexMatrix project(int j, const RealMatrix& exit, bool overshoot_first, double alpha) const;
    template <typename Mat>
    Mat from_reversed(const Mat& a) const;
    void require_reversed(const char* who) const;

    ModelSpec spec_;
    ExitKernel kernel_;
    double T_;
    int n_;
    double h_;
    RealMatrix A_, R_, C_, D_, Eh_, Eh2_;
    std::vector<RealMatrix> exp_neg_R_;   // e^{-R z_i}
    std::vector<RealMatrix> density_;     // lower density at -T + k h/2, k = 0..2n
    std::vector<std::vector<RealMatrix>> laplace_;
    std::vector<double> rates_;
    std::vector<int> rate_of_state_;
    std::vector<RealMatrix> BT_;
    RealMatrix C0_;
    double quad_estimate_ = 0.0;
    double residual_ = 0.0;
    std::shared_ptr<const TwoBoundaryEngine> reversed_;
    RealVector pi_;
};

struct TwoBoundaryOptions {
    int n = 512;
    double tol = 1e-10;
    double quadrature_tol = 1e-6;
};

struct TwoBoundarySolution {
    double s = 0.0;
    double T = 0.0;
    std::vector<double> x;
    std::vector<RealMatrix> BT;
    std::vector<RealMatrix> B;
    std::vector<RealMatrix> BTlow;
    RealMatrix C0;
    double fixed_point_residual = 0.0;
    double quadrature_estimate = 0.0;
};

struct KilledLaw {
    double s = 0.0;
    double T = 0.0;
    double x = 0.0;
    std::vector<double> y;            // nodes of (x - T, x) without y = 0
    std::vector<RealMatrix> density;  // h_s at y
    RealMatrix atom_at_zero;
    RealMatrix non_exit;
    ScaledKilledDensity scaled;       // full node data used for integration
};

/// Smallest n >= n_min for which x is a grid node of T/n (x = T/2 always works for even n).
int grid_size_for(double T, double x, int n_min);

/// Exit transform on the interior nodes x_j = j T / n, with B and B_T from the killed law.
TwoBoundarySolution solve_BT(const TwoBoundaryEngine& engine, bool with_split = true);

/// P{xi(theta_s) = 0, no exit before theta_s}.
RealMatrix killed_atom(const ModelSpec& spec, double s);

KilledLaw killed_law(const TwoBoundaryEngine& engine, int j);

struct ExitSplit {
    RealMatrix B;
    RealMatrix BTlow;
};
ExitSplit exit_split(const RealMatrix& BT, const KilledLaw& killed, const RealMatrix& Ps);

/// E[exp(-s tau^+) exp(i alpha overshoot)] and its shifted version exp(i alpha x) V^+.
struct OvershootTransform {
    ComplexMatrix upper;
    ComplexMatrix shifted;
};
OvershootTransform overshoot_transform(const ModelSpec& spec, const RealMatrix& BT, double x,
                                       double alpha);

/// Tail transforms of the exit value: z > x gives s E[e^{-s tau^+}; xi(tau^+) > z],
/// z < x - T gives s E[e^{-s tau^-}; xi(tau^-) < z].
RealMatrix bratiichuk_tails(const TwoBoundaryEngine& engine, const KilledLaw& killed, double z);

/// E[e^{-s tau^-} e^{i alpha xi(tau^-)}] from the killed law and the kernel.
ComplexMatrix lower_exit_transform(const TwoBoundaryEngine& engine, const KilledLaw& killed,
                                   double alpha);

/// E[e^{i alpha xi(theta_s)}; no exit before theta_s] from the killed law.
ComplexMatrix killed_cf(const TwoBoundaryEngine& engine, const KilledLaw& killed, double alpha);

/// Same quantity through the projection form [(I - V_+) Phi_-]_{[x-T, inf)} P_s^{-1} Phi^+.
ComplexMatrix killed_cf_projection(const TwoBoundaryEngine& engine, int j, double alpha);

/// Direct Nyström discretization of the renewal equation for exit transforms.
///
/// `up_value` is the payoff for leaving through the upper level, `down_value` for leaving
/// through the lower one: (I, 0) gives B^T, (0, I) gives B_T and (I, I) gives B. Returns
/// values at the nodes x_j = j T / n, j = 0..n.
std::vector<RealMatrix> volterra_oracle(const ModelSpec& spec, double s, double T, int n,
                                        const RealMatrix& up_value, const RealMatrix& down_value);
std::vector<RealMatrix> volterra_oracle_BT(const ModelSpec& spec, double s, double T, int n);

struct LimitOptions {
    std::vector<double> s_seq = {0.005, 0.0025, 0.00125, 0.000625, 0.0003125};
    double rel_tol = 1e-4;
    int n = 512;
};

/// p*_+(0) = lim p*_+(s).
LimitResult limit_p_star(const ModelSpec& spec, const LimitOptions& opts = {});

/// M = lim s^{-1} p*_+(s) P^-(s, .) as an extrapolated measure.
///
/// This and the other s -> 0 limits below throw ArgumentError unless mean_drift(spec) > 0.
std::shared_ptr<const LowerMeasure> limit_M(const ModelSpec& spec, const LimitOptions& opts = {});

/// Relative mismatch of the transform identity for M at rate r.
struct MIdentityCheck {
    double r = 0.0;
    RealMatrix lhs;
    RealMatrix rhs;
    double rel_error = 0.0;
};
MIdentityCheck check_M_identity(const ModelSpec& spec, const LowerMeasure& M,
                                const RealMatrix& p_star0, double r);

struct LimitBT {
    std::vector<double> x;
    std::vector<RealMatrix> extrapolated;  // lim of B^T(s, x) over the s sequence
    std::vector<RealMatrix> direct;        // limit formula with M and p*_+(0)
    double max_difference = 0.0;
};
LimitBT limit_BT(const ModelSpec& spec, double T, const LimitOptions& opts = {});

struct LimitDensity {
    std::vector<double> y;
    std::vector<RealMatrix> direct;
    std::vector<RealMatrix> extrapolated;
    double max_difference = 0.0;
};
LimitDensity limit_density(const ModelSpec& spec, double T, double x, const LimitOptions& opts = {});

} // namespace mmexit
