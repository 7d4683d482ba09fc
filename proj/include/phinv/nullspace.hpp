#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "phinv/collision.hpp"
#include "phinv/grid.hpp"

namespace phinv {

struct NullspaceOptions {
    double sigma_tol = 0.0;
    /// Column counts above this use the iterative path.
    std::size_t dense_cap = 4096;
    std::uint64_t seed = 42;
    int max_iterations = 2000;
    /// Initial block size of the iterative path; doubled while every Ritz
    /// value of the block falls below sigma_tol.
    std::size_t block = 8;
};

/// Orthonormal basis (one column per vector) of the right singular vectors
/// of the constraint matrix with singular value <= sigma_tol.
struct InvariantBasis {
    Eigen::MatrixXd vectors;
    /// Ascending singular values. The dense path reports the full spectrum,
    /// the iterative path the converged trailing block. The first
    /// vectors.cols() entries belong to the basis vectors.
    std::vector<double> singular_values;
    double sigma_tol = 0.0;
    bool iterative = false;
    int iterations = 0;

    std::size_t dimension() const noexcept { return static_cast<std::size_t>(vectors.cols()); }
};

/// Default tolerance 4·εE·sqrt(rows)/||ω - mean(ω)||₂: a unit vector along the
/// non-constant part of ω has residual at most εE per row. Falls back to
/// 4·εE·sqrt(rows) for a flat band.
double default_sigma_tol(const ConstraintMatrix& m, const GridFunction& omega, double epsilon_e);

/// Throws EmptyConstraintSet for a matrix without rows and
/// ConvergenceFailure if the iterative path does not settle.
InvariantBasis compute_invariant_basis(const ConstraintMatrix& m, const NullspaceOptions& opts);

struct InvariantDimension {
    std::size_t dimension = 0;
    /// σ_{m+1} / σ_m at the cut; empty when either side of the cut is missing.
    std::optional<double> gap_ratio;
};

InvariantDimension invariant_dimension(std::span<const double> ascending_values, double sigma_tol);

struct SubspaceComparison {
    std::vector<double> principal_angles;  // ascending, in [0, π/2]
    double contains_constant = 0.0;        // ||P 1||² / ||1||²
    double contains_omega = 0.0;           // ||P ω||² / ||ω||²
    double contains_omega_perp = 0.0;      // same for ω - mean(ω)
    std::size_t dimension = 0;             // of the basis
    std::size_t reference_dimension = 0;   // 2, or 1 for a degenerate span
    bool degenerate_span = false;          // ω numerically parallel to 1
};

/// Compares span(basis) with span{1, ω}. When ω is numerically constant the
/// reference collapses to span{1} and degenerate_span is set.
SubspaceComparison compare_to_affine_span(const InvariantBasis& basis, const GridFunction& omega);

}  // namespace phinv
