#pragma once

#include <Eigen/Dense>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "phinv/grid.hpp"

namespace phinv {

/// Threshold below which ω(k) counts as touching the singular set (ω = 0).
inline constexpr double kDefaultEps0 = 1e-3;
/// Negative ω² values down to -kNegativeTolerance are clamped to zero.
inline constexpr double kNegativeTolerance = 1e-12;

/// Z^d-periodic single-band dispersion relation given through the Fourier
/// coefficients of its square,
///
///     ω(k)^2 = Σ_n γ(n) exp(i 2π k·n),   γ(-n) = γ(n),
///
/// so ω² is a finite cosine series and all derivatives are analytic.
/// Instances are immutable and safe to share between threads.
class FourierDispersion {
public:
    using Coefficients = std::map<std::vector<int>, double>;

    /// Coefficients must already be symmetric; a missing or mismatched
    /// partner γ(-n) raises InvalidDispersion. The result is validated on a
    /// sample lattice so that ω² >= -kNegativeTolerance.
    FourierDispersion(int dim, Coefficients coeffs);

    int dim() const noexcept { return dim_; }
    const Coefficients& coefficients() const noexcept { return coeffs_; }

    double omega_squared(std::span<const double> k) const;
    double omega(std::span<const double> k) const;
    /// ∇ω = ∇(ω²) / (2ω). Throws NearSingularSet if ω(k) < eps0.
    Eigen::VectorXd gradient(std::span<const double> k, double eps0 = kDefaultEps0) const;
    /// Hess ω = Hess(ω²)/(2ω) - ∇(ω²)∇(ω²)ᵀ/(4ω³), exactly symmetric.
    Eigen::MatrixXd hessian(std::span<const double> k, double eps0 = kDefaultEps0) const;
    double hessian_determinant(std::span<const double> k, double eps0 = kDefaultEps0) const;

    /// ω² together with its analytic gradient and Hessian.
    struct SquareJet {
        double value;
        Eigen::VectorXd grad;
        Eigen::MatrixXd hess;
    };
    SquareJet square_jet(std::span<const double> k) const;

private:
    struct Term {
        std::vector<double> n;
        double weight;  // γ(0) for n = 0, 2γ(n) for a ±n pair
    };

    double clamp_square(double w2, std::span<const double> k) const;

    int dim_;
    Coefficients coeffs_;
    double constant_ = 0.0;
    std::vector<Term> pairs_;
};

/// Nearest-neighbour model ω² = Σ_j 4 sin²(π k_j): γ(0) = 2d, γ(±e_j) = -1.
FourierDispersion make_nn(int dim);
/// Nearest-neighbour model with a gap: ω(0) = mass.
FourierDispersion make_nn_gap(int dim, double mass);
/// Flat band ω ≡ value.
FourierDispersion make_constant(int dim, double value);

/// Parses the coefficient-file JSON schema
/// {"dim": d, "coeffs": [{"n": [...], "gamma": x}, ...]}. Missing partners
/// γ(-n) are inserted; conflicting ones raise InvalidDispersion.
FourierDispersion parse_dispersion_json(const std::string& text);
FourierDispersion load_dispersion_file(const std::string& path);

/// Resolves "nn", "nn-gap(m)", "constant(c)" or a path to a coefficient file.
/// `dim` is ignored for files (their own "dim" wins) unless it conflicts.
FourierDispersion make_model(const std::string& name, int dim);

/// Samples ω on every grid point, in row-major order.
GridFunction sample_grid(const FourierDispersion& disp, const GridSpec& grid);

struct DegeneracyProfile {
    std::vector<double> deltas;
    std::vector<double> fractions;
    double excluded_fraction = 0.0;
};

/// For each δ, the fraction of grid points (outside the ω < eps0 region) where
/// |det Hess ω| < δ. Points with ω < eps0 are reported via excluded_fraction.
DegeneracyProfile degeneracy_profile(const FourierDispersion& disp, const GridSpec& grid,
                                     std::span<const double> deltas, double eps0 = kDefaultEps0);

/// det Hess ω at every grid point; NaN where ω < eps0.
std::vector<double> hessian_determinants(const FourierDispersion& disp, const GridSpec& grid,
                                         double eps0 = kDefaultEps0);

}  // namespace phinv
