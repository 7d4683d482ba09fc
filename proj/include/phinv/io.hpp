#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "phinv/collision.hpp"
#include "phinv/nullspace.hpp"

namespace phinv::io {

using Json = nlohmann::ordered_json;

/// Shortest-free, fixed "%.17g" formatting of a double; used for every number
/// written by the tools so that reports are byte-reproducible.
std::string format_double(double x);

/// JSON text with two-space indentation, keys in insertion order, floats in
/// "%.17g" and non-finite floats as null.
std::string dump_json(const Json& j);
void write_json(const std::string& path, const Json& j);

/// CSV with header `i1,i2,i3,i4,energy_residual`.
void write_quadruples_csv(std::ostream& os, const QuadrupleSet& qs);
std::vector<CollisionQuadruple> read_quadruples_csv(std::istream& is);

/// Matrix Market coordinate format, real general, 1-based indices.
void write_matrix_market(std::ostream& os, const ConstraintMatrix& m);

struct CoordinateMatrix {
    std::size_t rows = 0, cols = 0;
    struct Entry {
        std::size_t row, col;  // 0-based
        double value;
    };
    std::vector<Entry> entries;
};
CoordinateMatrix read_matrix_market(std::istream& is);

/// One column per basis vector, header v0,v1,..., rows in grid order.
void write_basis_csv(std::ostream& os, const InvariantBasis& basis);

/// Grid samples with coordinates: header k0,...,k{d-1},<value_name>.
void write_grid_csv(std::ostream& os, const GridFunction& f, const std::string& value_name);
/// Reads a single-column or grid CSV back to values (last column).
std::vector<double> read_values_csv(std::istream& is);

}  // namespace phinv::io
