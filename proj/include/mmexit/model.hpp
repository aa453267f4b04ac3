#pragma once

#include <string>
#include <vector>

#include "mmexit/linalg.hpp"

namespace mmexit {

/// Component w * mu * exp(mu * x) on x < 0 (a reflected exponential with mass w).
struct ExpComponent {
    double weight = 0.0;
    double rate = 1.0;
};

/// Point mass of the given weight at a location <= 0.
struct PointMass {
    double weight = 0.0;
    double location = 0.0;
};

/// Sub-distribution on (-inf, 0]: finite mixture of reflected exponentials plus atoms.
struct NegJumpDist {
    std::vector<ExpComponent> exponentials;
    std::vector<PointMass> atoms;

    static NegJumpDist exponential(double weight, double rate);
    static NegJumpDist point(double weight, double location);

    double total_mass() const;
    /// Mass of (-inf, z] for z < 0.
    double mass_below(double z) const;
    /// Mass located exactly at 0.
    double zero_atom() const;
    bool has_nonzero_atoms() const;
    double mean_abs() const;
    /// Fourier transform integral of exp(i alpha x) dF(x); alpha may be complex.
    Complex transform(Complex alpha) const;
    /// Every weight multiplied by `factor`.
    NegJumpDist scaled(double factor) const;
};

/// Full parameterization of the pair {xi(t), x(t)}.
///
/// Jump laws are stored as sub-distributions: `neg_jump[k]` carries mass 1 - pos_jump_prob[k]
/// and `trans_jump[k][r]` carries mass P(k, r).
struct ModelSpec {
    int m = 0;
    RealVector nu;
    RealMatrix P;
    RealVector lambda;
    RealVector c;
    RealVector pos_jump_prob;
    std::vector<NegJumpDist> neg_jump;
    std::vector<std::vector<NegJumpDist>> trans_jump;

    /// Transition jumps identically zero: trans_jump[k][r] is an atom at 0 of mass P(k, r).
    static std::vector<std::vector<NegJumpDist>> zero_transition_jumps(const RealMatrix& P);

    RealMatrix N() const;
    RealMatrix Q() const;
    RealMatrix Lambda() const;
    RealMatrix C() const;
    /// Lambda * Fbar_0(0): intensity of upward (exponential) jumps.
    RealMatrix upward_intensity() const;
    /// Lambda * F_0(0): intensity of downward xi-jumps (claims in the risk setting).
    RealMatrix downward_intensity() const;
    /// True if xi never moves (no xi-jumps, every transition jump is an atom at 0).
    bool is_degenerate() const;
    bool has_nonzero_atoms() const;
};

struct ValidationReport {
    std::vector<std::string> violations;
    RealVector pi;

    bool valid() const { return violations.empty(); }
    std::string summary() const;
};

/// One entry of the kernel dK_0 restricted to (-inf, 0].
///
/// Exponential terms have density coef * mu * exp(mu z) on z < 0 (param = mu); atoms put
/// mass coef at z = param.
struct KernelTerm {
    int row = 0;
    int col = 0;
    double coef = 0.0;
    bool atom = false;
    double param = 0.0;
};

/// Negative-side kernel N dF + Lambda dF_0 as a flat list of mixture terms.
std::vector<KernelTerm> negative_kernel(const ModelSpec& spec);

/// Checks every invariant; also returns the stationary distribution when the chain is valid.
ValidationReport validate(const ModelSpec& spec);

/// Throws ValidationError listing all violations when the model is invalid.
void require_valid(const ModelSpec& spec);

/// Stationary distribution pi Q = 0, sum pi = 1.
RealVector stationary_distribution(const RealMatrix& Q);

/// Long-run mean of xi(t) / t under the stationary law of the chain.
double mean_drift(const ModelSpec& spec);

/// Time-reversed process under the stationary law pi of the chain.
///
/// Its cumulant is Delta^{-1} Psi(alpha)^T Delta with Delta = diag(pi). State-local parts are
/// unchanged; the transition k -> r of the reversed chain carries the jump law of r -> k.
/// Throws ArgumentError unless pi > 0.
ModelSpec time_reversed(const ModelSpec& spec);

/// Matrix cumulant Psi(alpha); alpha may be complex inside the strip of analyticity.
ComplexMatrix cumulant(const ModelSpec& spec, Complex alpha);
inline ComplexMatrix cumulant(const ModelSpec& spec, double alpha)
{
    return cumulant(spec, Complex(alpha, 0.0));
}

/// Phi(s, alpha) = s (sI - Psi(alpha))^{-1}.
ComplexMatrix char_function(const ModelSpec& spec, double s, Complex alpha);
inline ComplexMatrix char_function(const ModelSpec& spec, double s, double alpha)
{
    return char_function(spec, s, Complex(alpha, 0.0));
}

/// P_s = s (sI - Q)^{-1}.
RealMatrix resolvent_Ps(const ModelSpec& spec, double s);

/// Transform of the negative-side kernel, integral of exp(i alpha z) dK_0(z) over z <= 0.
ComplexMatrix k0_transform(const ModelSpec& spec, double alpha);

/// Tails of the full jump kernel: for z > 0 the upper tail (mass of (z, inf), carried by
/// the exponential upward jumps); for z < 0 the lower tail (mass of (-inf, z]).
RealMatrix k0_tails(const ModelSpec& spec, double z);

/// Total mass matrix of the negative-side kernel.
RealMatrix k0_mass(const ModelSpec& spec);

} // namespace mmexit
