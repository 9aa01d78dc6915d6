#pragma once

// Grid-graph distances.  Paths follow path_links() (8-neighbour on structured
// patches, Euclidean edge lengths) and may end on, but never pass through,
// Dirichlet or Outside cells.

#include <limits>
#include <vector>

#include "hkends/grid.hpp"

namespace hkends {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Single-source distances to every cell (infinity where unreachable).
/// With avoid_core, core cells are neither entered nor left.
std::vector<double> distances_from(const Grid& grid, CellId source, bool avoid_core = false);

/// Multi-source distances (every source at distance 0).
std::vector<double> distances_from_cells(const Grid& grid, const std::vector<CellId>& sources, bool avoid_core = false);

/// d_+(source, .): shortest paths forced through at least one core cell.
std::vector<double> distances_plus_from(const Grid& grid, CellId source);

double distance(const Grid& grid, CellId x, CellId y);

/// Shortest path through the core.  Throws Unreachable when none exists.
double distance_plus(const Grid& grid, CellId x, CellId y);

/// Shortest path avoiding the core; infinity when x and y are only joined
/// through it (in particular when they lie in different ends).
double distance_avoid(const Grid& grid, CellId x, CellId y);

/// |x| = sup over core cells z of d(x, z), never below the core radius.
double norm_from_core(const Grid& grid, CellId x);

}  // namespace hkends
