#include "phinv/grid.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "phinv/error.hpp"

namespace phinv {

GridSpec::GridSpec(int dim, int n_per_axis, double offset)
    : dim_(dim), n_(n_per_axis), offset_(offset), size_(0) {
    if (dim < 1) throw ConfigError("grid dimension must be >= 1");
    if (n_per_axis < 2) throw ConfigError("grid needs at least 2 points per axis");
    if (!(offset >= 0.0 && offset < 1.0)) throw ConfigError("grid offset must lie in [0, 1)");
    double total = std::pow(static_cast<double>(n_per_axis), dim);
    if (total > static_cast<double>(std::numeric_limits<PointIndex>::max()))
        throw ConfigError("grid has too many points for 32-bit indexing");
    size_ = 1;
    for (int j = 0; j < dim; ++j) size_ *= static_cast<std::size_t>(n_per_axis);
}

void GridSpec::multi_index(PointIndex idx, std::span<int> out) const {
    for (int j = dim_ - 1; j >= 0; --j) {
        out[j] = static_cast<int>(idx % static_cast<PointIndex>(n_));
        idx /= static_cast<PointIndex>(n_);
    }
}

PointIndex GridSpec::flat_index(std::span<const int> n) const {
    PointIndex idx = 0;
    for (int j = 0; j < dim_; ++j) {
        int r = n[j] % n_;
        if (r < 0) r += n_;
        idx = idx * static_cast<PointIndex>(n_) + static_cast<PointIndex>(r);
    }
    return idx;
}

void GridSpec::point(PointIndex idx, std::span<double> k) const {
    for (int j = dim_ - 1; j >= 0; --j) {
        k[j] = coordinate(static_cast<int>(idx % static_cast<PointIndex>(n_)));
        idx /= static_cast<PointIndex>(n_);
    }
}

std::vector<double> GridSpec::point(PointIndex idx) const {
    std::vector<double> k(dim_);
    point(idx, k);
    return k;
}

GridFunction::GridFunction(GridSpec s, std::vector<double> v) : spec(s), values(std::move(v)) {
    if (values.size() != spec.size())
        throw GridMismatch("grid function has " + std::to_string(values.size()) +
                           " values, grid has " + std::to_string(spec.size()) + " points");
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i]))
            throw Error("grid function value at index " + std::to_string(i) + " is not finite");
}

}  // namespace phinv
