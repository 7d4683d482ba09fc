#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phinv/dispersion.hpp"
#include "phinv/grid.hpp"

namespace phinv {

/// Smooth compactly supported test function
///
///     f(k) = Π_j b((k_j - c_j) / w_j),   b(t) = exp(-1 / (1 - t²)) for |t| < 1,
///
/// with support box [c - w, c + w].
struct BumpTestFunction {
    Eigen::VectorXd center;
    Eigen::VectorXd width;  // half-widths, > 0

    BumpTestFunction(Eigen::VectorXd c, Eigen::VectorXd w);
    int dim() const noexcept { return static_cast<int>(center.size()); }
    double value(std::span<const double> k) const;
};

struct BumpJet {
    double value;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
};

/// Analytic value, gradient and Hessian; all zero outside the support box.
BumpJet bump_derivs(const BumpTestFunction& f, std::span<const double> k);

struct VerifierOptions {
    /// Minimum distance between the support box and any grid point with ω < eps0.
    double margin = 0.05;
    double eps0 = kDefaultEps0;
    double kappa_max = 1e6;
};

/// Throws SupportViolation unless the support box lies strictly inside M*
/// and keeps `margin` away from every grid point where ω < eps0.
void check_support(const BumpTestFunction& f, const GridFunction& omega, const VerifierOptions& opts = {});

struct MomentMatrices {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    std::optional<Eigen::MatrixXd> C;
    double cond_B = 0.0;
};

/// A_{αβ} = Σ ψ·(D_α D_β f)·N^{-d} and B likewise with ω. D is the
/// fourth-order central difference on the periodic grid applied to the
/// samples of f, so Σ D_α D_β f = 0 exactly and constants in ψ drop out.
MomentMatrices compute_AB(const GridFunction& psi, const GridFunction& omega, const BumpTestFunction& f,
                          const VerifierOptions& opts = {});

/// C = A·B⁻¹. Throws IllConditionedB if cond₂(B) > kappa_max.
MomentMatrices compute_C(MomentMatrices mm, double kappa_max = 1e6);

/// max|ψ|·max|∂∂f|·N^{-1} over the grid: a crude bound for the quadrature
/// error of a single moment.
double quadrature_error_bound(const GridFunction& psi, const BumpTestFunction& f);

/// Test functions drawn from a shifted Halton sequence: centers over M*,
/// half-widths in [0.1, 0.2]. Inadmissible draws (support, cond(B)) are
/// skipped; at most `max_draws` candidates are tried.
std::vector<BumpTestFunction> make_bump_family(const GridFunction& omega, std::size_t count, std::uint64_t seed,
                                               const VerifierOptions& opts = {}, std::size_t max_draws = 100);

struct ScalarCheck {
    double a_est = 0.0;
    double a_spread = 0.0;
    double offdiag_max = 0.0;
    std::vector<double> cond_B;
    std::vector<Eigen::MatrixXd> C;
};

/// Requires at least three members with invertible B; members whose B is too
/// ill-conditioned are skipped. Throws InsufficientTestFunctions otherwise.
ScalarCheck check_scalar_C(const GridFunction& psi, const GridFunction& omega,
                           std::span<const BumpTestFunction> family, const VerifierOptions& opts = {});

struct AffineFit {
    double a = 0.0;
    double c = 0.0;
    double residual_l1 = 0.0;  // N^{-d} Σ |ψ - aω - c|
    double residual_linf = 0.0;
    // The linear term b·k is identically zero: it is not periodic.
};

AffineFit fit_affine(const GridFunction& psi, const GridFunction& omega, double a_est);

enum class Verdict { Affine, NonAffine, Inconclusive };
std::string_view to_string(Verdict v);

struct VerificationReport {
    ScalarCheck scalar;
    AffineFit fit;
    double tau_a = 0.0;
    double tau_r = 0.0;
    Verdict verdict = Verdict::Inconclusive;
};

/// Scalar-C check plus affine fit. "affine" when a_spread, offdiag_max <= τ_a
/// and residual_linf <= τ_r; "non-affine" when both routes fail;
/// "inconclusive" when they disagree.
VerificationReport verify_candidate(const GridFunction& psi, const GridFunction& omega,
                                    std::span<const BumpTestFunction> family, const VerifierOptions& opts = {});

/// Built-in smooth weights φ(η, ε) for the integration-by-parts identity.
enum class SmoothPhi { Constant, Energy, EnergySquared, SinMomentumEnergy, ExpNegEnergy };
SmoothPhi parse_phi(std::string_view name);
std::string_view to_string(SmoothPhi phi);

struct IbpResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double rel_diff = 0.0;
};

/// Evaluates
///   ∫ φ(k1+k2, ω1+ω2) (∂¹_α - ∂²_α)[f (∂¹_β - ∂²_β)(ω1+ω2)] dk1 dk2
/// and the same with α and β exchanged, for f(k1, k2) = f1(k1) f2(k2).
/// Each bump support is covered by grid.n_per_axis() nodes per axis of a
/// rectangle rule in the variable s with k = c + w·tanh(s), |s| <= 3.
/// The grid also supplies the near-singular points for the support check.
IbpResult verify_ibp_identity(const FourierDispersion& disp, SmoothPhi phi, const BumpTestFunction& f1,
                              const BumpTestFunction& f2, int alpha, int beta, const GridSpec& grid,
                              const VerifierOptions& opts = {});

struct RelationCheck {
    double max_abs_violation = 0.0;
    double norm_A = 0.0;        // Frobenius norm of A(f1)
    double norm_B_tilde = 0.0;  // Frobenius norm of B(f2)
};

/// max over (α, β, γ, δ) of
/// |A_{αγ} B̃_{βδ} + Ã_{αδ} B_{βγ} - A_{βγ} B̃_{αδ} - Ã_{βδ} B_{αγ}|,
/// with A, B from f1 and Ã, B̃ from f2.
RelationCheck check_moment_relation(const GridFunction& psi, const GridFunction& omega, const BumpTestFunction& f1,
                                    const BumpTestFunction& f2, const VerifierOptions& opts = {});

}  // namespace phinv
