#include "hkends/distance.hpp"

#include <algorithm>
#include <functional>
#include <queue>

#include "hkends/error.hpp"

namespace hkends {

namespace {

using Entry = std::pair<double, CellId>;
using MinQueue = std::priority_queue<Entry, std::vector<Entry>, std::greater<>>;

void check_cell(const Grid& g, CellId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= g.size()) throw Error(ErrorKind::InvalidArgument, "cell id out of range");
  if (g.cell_class(id) == CellClass::Outside) throw Error(ErrorKind::OutsideDomain, "cell lies outside the domain");
}

// Dijkstra from preset seeds.  Only domain cells (and sources) are expanded.
void relax_all(const Grid& g, std::vector<double>& dist, MinQueue& queue, bool avoid_core) {
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[static_cast<std::size_t>(u)]) continue;
    const bool source = d == 0.0;
    if (!source && !g.in_domain(u)) continue;
    if (avoid_core && g.cell_class(u) == CellClass::Core) continue;
    for (const auto& l : g.path_links(u)) {
      if (g.cell_class(l.to) == CellClass::Outside) continue;
      if (avoid_core && g.cell_class(l.to) == CellClass::Core) continue;
      const double nd = d + l.length;
      if (nd < dist[static_cast<std::size_t>(l.to)]) {
        dist[static_cast<std::size_t>(l.to)] = nd;
        queue.emplace(nd, l.to);
      }
    }
  }
}

}  // namespace

std::vector<double> distances_from(const Grid& grid, CellId source, bool avoid_core) {
  check_cell(grid, source);
  std::vector<double> dist(grid.size(), kInfinity);
  dist[static_cast<std::size_t>(source)] = 0.0;
  if (avoid_core && grid.cell_class(source) == CellClass::Core) return dist;
  MinQueue queue;
  queue.emplace(0.0, source);
  relax_all(grid, dist, queue, avoid_core);
  return dist;
}

std::vector<double> distances_from_cells(const Grid& grid, const std::vector<CellId>& sources, bool avoid_core) {
  std::vector<double> dist(grid.size(), kInfinity);
  MinQueue queue;
  for (CellId s : sources) {
    check_cell(grid, s);
    dist[static_cast<std::size_t>(s)] = 0.0;
    if (!(avoid_core && grid.cell_class(s) == CellClass::Core)) queue.emplace(0.0, s);
  }
  relax_all(grid, dist, queue, avoid_core);
  return dist;
}

std::vector<double> distances_plus_from(const Grid& grid, CellId source) {
  const auto to_core = distances_from(grid, source);
  std::vector<double> dist(grid.size(), kInfinity);
  MinQueue queue;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid.cell_class(static_cast<CellId>(k)) == CellClass::Core && to_core[k] < kInfinity) {
      dist[k] = to_core[k];
      queue.emplace(to_core[k], static_cast<CellId>(k));
    }
  }
  relax_all(grid, dist, queue, false);
  return dist;
}

double distance(const Grid& grid, CellId x, CellId y) {
  check_cell(grid, y);
  return distances_from(grid, x)[static_cast<std::size_t>(y)];
}

double distance_plus(const Grid& grid, CellId x, CellId y) {
  check_cell(grid, y);
  const double d = distances_plus_from(grid, x)[static_cast<std::size_t>(y)];
  if (!(d < kInfinity)) throw Error(ErrorKind::Unreachable, "no path through the core joins the two cells");
  return d;
}

double distance_avoid(const Grid& grid, CellId x, CellId y) {
  check_cell(grid, y);
  if (x == y) return 0.0;
  return distances_from(grid, x, true)[static_cast<std::size_t>(y)];
}

double norm_from_core(const Grid& grid, CellId x) {
  const auto dist = distances_from(grid, x);
  double best = grid.core_radius();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid.cell_class(static_cast<CellId>(k)) == CellClass::Core && dist[k] < kInfinity) best = std::max(best, dist[k]);
  }
  return best;
}

}  // namespace hkends
