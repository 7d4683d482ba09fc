#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "phinv/dispersion.hpp"
#include "phinv/grid.hpp"

namespace phinv {

inline constexpr std::size_t kDefaultQuadrupleCap = 100'000'000;

/// A discrete pair collision k1 + k2 -> k3 + k4 with momentum conserved mod
/// Z^d exactly and energy conserved within the set's tolerance.
///
/// Canonical form: i1 <= i2, i3 <= i4, (i1, i2) < (i3, i4) lexicographically.
/// The trivial case {i1, i2} == {i3, i4} is never stored.
struct CollisionQuadruple {
    PointIndex i1, i2, i3, i4;
    double energy_residual;  // ω1 + ω2 - ω3 - ω4

    std::array<PointIndex, 4> indices() const { return {i1, i2, i3, i4}; }
    bool operator==(const CollisionQuadruple&) const = default;
};

struct QuadrupleSet {
    GridSpec grid;
    double epsilon_e;
    std::vector<CollisionQuadruple> quads;  // sorted by (i1, i2, i3, i4)
};

/// 3 <-> 1 process k1 + k2 + k3 = k4 (mod Z^d), |ω1 + ω2 + ω3 - ω4| <= εE,
/// canonical i1 <= i2 <= i3.
struct CollisionTriple {
    PointIndex i1, i2, i3, i4;
    double energy_residual;  // ω1 + ω2 + ω3 - ω4

    bool operator==(const CollisionTriple&) const = default;
};

struct TripleSet {
    GridSpec grid;
    double epsilon_e;
    std::vector<CollisionTriple> triples;
};

struct EnumerationOptions {
    std::size_t cap = kDefaultQuadrupleCap;
    /// 0 picks std::thread::hardware_concurrency(). The result never depends on it.
    unsigned threads = 1;
};

/// Default energy slack εE = L / N², L = max over regular grid points of
/// ||∇ω||_∞. Returns 0 for a flat band.
double default_energy_tolerance(const FourierDispersion& disp, const GridSpec& grid, double eps0 = kDefaultEps0);

QuadrupleSet enumerate_quadruples(const FourierDispersion& disp, const GridSpec& grid, double epsilon_e,
                                  const EnumerationOptions& opts = {});
/// Same enumeration on precomputed ω samples.
QuadrupleSet enumerate_quadruples(const GridFunction& omega, double epsilon_e, const EnumerationOptions& opts = {});

/// Sparse constraint rows: +1 at i1, i2 and -1 at i3, i4, merged where
/// indices coincide. Zero entries are dropped.
class ConstraintMatrix {
public:
    struct Entry {
        PointIndex col;
        double value;
    };

    explicit ConstraintMatrix(const QuadrupleSet& qs);

    std::size_t rows() const noexcept { return row_start_.size() - 1; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t nonzeros() const noexcept { return entries_.size(); }

    /// Entries of row r, sorted by column.
    std::span<const Entry> row(std::size_t r) const {
        return {entries_.data() + row_start_[r], entries_.data() + row_start_[r + 1]};
    }

    /// y = M x
    std::vector<double> multiply(std::span<const double> x) const;

private:
    std::size_t cols_;
    std::vector<std::size_t> row_start_;
    std::vector<Entry> entries_;
};

inline ConstraintMatrix build_constraint_matrix(const QuadrupleSet& qs) { return ConstraintMatrix(qs); }

struct ResidualStats {
    double max_abs = 0.0;
    double mean_abs = 0.0;
    double rms = 0.0;
    std::size_t count = 0;
    bool empty = true;
};

/// Statistics of ψ1 + ψ2 - ψ3 - ψ4 over the quadruple set.
ResidualStats residual_stats(const GridFunction& psi, const QuadrupleSet& qs);

TripleSet enumerate_3to1(const FourierDispersion& disp, const GridSpec& grid, double epsilon_e,
                         const EnumerationOptions& opts = {});
TripleSet enumerate_3to1(const GridFunction& omega, double epsilon_e, const EnumerationOptions& opts = {});

struct ReductionStats {
    double mean_residual = 0.0;
    double max_abs_residual = 0.0;
    std::size_t count = 0;
    bool empty = true;
};

/// Statistics of ψ1 + ψ2 + ψ3 - ψ4 over 3 <-> 1 processes. For ψ = aω + c the
/// mean is 2c up to a times the energy slack.
ReductionStats check_nonconserving_reduction(const GridFunction& psi, const TripleSet& ts);

}  // namespace phinv
