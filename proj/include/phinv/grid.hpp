#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace phinv {

/// Row-major lattice index of a grid point; fits any grid we can enumerate.
using PointIndex = std::uint32_t;

/// Uniform discretization of the fundamental cell M* = [-1/2, 1/2)^d.
///
/// Point n = (n_0, ..., n_{d-1}) with n_j in {0, ..., N-1} sits at
/// k_j = (n_j + offset) / N - 1/2. The flat index is row-major with the first
/// axis slowest.
class GridSpec {
public:
    GridSpec(int dim, int n_per_axis, double offset = 0.5);

    int dim() const noexcept { return dim_; }
    int n_per_axis() const noexcept { return n_; }
    double offset() const noexcept { return offset_; }
    std::size_t size() const noexcept { return size_; }
    double spacing() const noexcept { return 1.0 / n_; }

    /// Integer coordinates of flat index `idx`.
    void multi_index(PointIndex idx, std::span<int> out) const;
    /// Flat index of integer coordinates, each reduced mod N.
    PointIndex flat_index(std::span<const int> n) const;

    double coordinate(int n_j) const noexcept { return (n_j + offset_) / n_ - 0.5; }
    void point(PointIndex idx, std::span<double> k) const;
    std::vector<double> point(PointIndex idx) const;

    bool operator==(const GridSpec&) const = default;

private:
    int dim_;
    int n_;
    double offset_;
    std::size_t size_;
};

/// Real samples of a function on a grid, e.g. ψ or ω.
struct GridFunction {
    GridSpec spec;
    std::vector<double> values;

    GridFunction(GridSpec s, std::vector<double> v);

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const noexcept { return values[i]; }
};

}  // namespace phinv
