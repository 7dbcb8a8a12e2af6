#pragma once

#include <iosfwd>
#include <string>

#include "powertrend/model.hpp"

namespace powertrend {

// Reads a grid from CSV with header "u1,...,ud,y". Sites may appear in any
// order but must cover the full box exactly once; duplicates, gaps and
// malformed rows raise std::runtime_error.
LatticeGrid read_grid_csv(std::istream& in);
LatticeGrid read_grid_csv_file(const std::string& path);

// Writes the grid in row-major site order with full double precision.
void write_grid_csv(std::ostream& out, const LatticeGrid& grid);
void write_grid_csv_file(const std::string& path, const LatticeGrid& grid);

}  // namespace powertrend
