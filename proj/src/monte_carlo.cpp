#include <array>
#include <algorithm>
#include <cmath>
#include <random>

#include "hkends/error.hpp"
#include "hkends/solver.hpp"

namespace hkends {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Per-cell move table for lattice walks: target for +x, -x, +y, -y.
// kNoCell = rejected move; -2 = killed.
constexpr CellId kKilled = -2;

std::vector<std::array<CellId, 4>> lattice_moves(const Grid& grid) {
  const double dx = grid.spacing();
  std::vector<std::array<CellId, 4>> moves(grid.size(), {kNoCell, kNoCell, kNoCell, kNoCell});
  for (CellId id = 0; id < static_cast<CellId>(grid.size()); ++id) {
    if (!grid.in_domain(id)) continue;
    const auto& c = grid.cell(id).center;
    for (const auto& l : grid.links(id)) {
      const auto& o = grid.cell(l.to).center;
      const double ex = (o.x - c.x) / dx, ey = (o.y - c.y) / dx;
      int dir = -1;
      if (std::abs(ex - 1.0) < 1e-6 && std::abs(ey) < 1e-6) dir = 0;
      if (std::abs(ex + 1.0) < 1e-6 && std::abs(ey) < 1e-6) dir = 1;
      if (std::abs(ey - 1.0) < 1e-6 && std::abs(ex) < 1e-6) dir = 2;
      if (std::abs(ey + 1.0) < 1e-6 && std::abs(ex) < 1e-6) dir = 3;
      if (dir < 0) throw Error(ErrorKind::InvalidArgument, "lattice walk needs nearest-neighbour links");
      moves[static_cast<std::size_t>(id)][static_cast<std::size_t>(dir)] = grid.in_domain(l.to) ? l.to : kKilled;
    }
  }
  return moves;
}

}  // namespace

double neighborhood_average(const Grid& grid, const std::vector<double>& values, const std::vector<CellId>& cells) {
  double num = 0.0, den = 0.0;
  for (CellId c : cells) {
    num += grid.measure(c) * values[static_cast<std::size_t>(c)];
    den += grid.measure(c);
  }
  return den > 0.0 ? num / den : 0.0;
}

MonteCarloResult mc_heat_kernel(const Grid& grid, CellId x, CellId y, double t, std::size_t walkers,
                                std::uint64_t seed, double radius) {
  if (x < 0 || static_cast<std::size_t>(x) >= grid.size() || !grid.in_domain(x)) {
    throw Error(ErrorKind::OutsideDomain, "walkers must start in the domain");
  }
  if (y < 0 || static_cast<std::size_t>(y) >= grid.size()) throw Error(ErrorKind::InvalidArgument, "probe out of range");
  if (!(t > 0.0) || walkers == 0) throw Error(ErrorKind::InvalidArgument, "need t > 0 and at least one walker");

  MonteCarloResult res;
  res.walkers = walkers;
  const double rho = radius > 0.0 ? radius : std::max(grid.spacing(), 0.25 * std::sqrt(t));
  std::vector<char> in_nbhd(grid.size(), 0);
  const auto& cy = grid.cell(y).center;
  for (CellId id = 0; id < static_cast<CellId>(grid.size()); ++id) {
    const auto& c = grid.cell(id).center;
    if (grid.in_domain(id) && c.sheet == cy.sheet && std::hypot(c.x - cy.x, c.y - cy.y) <= rho) {
      in_nbhd[static_cast<std::size_t>(id)] = 1;
      res.neighborhood.push_back(id);
      res.neighborhood_measure += grid.measure(id);
    }
  }
  if (res.neighborhood.empty()) throw Error(ErrorKind::OutsideDomain, "probe neighbourhood has no domain cells");

  std::size_t alive = 0, hits = 0;
  if (grid.is_lattice()) {
    const auto moves = lattice_moves(grid);
    const double tau = 0.25 * grid.spacing() * grid.spacing();
    const auto steps = static_cast<std::size_t>(std::llround(t / tau));
    for (std::size_t w = 0; w < walkers; ++w) {
      std::mt19937_64 rng(splitmix64(seed ^ splitmix64(w)));
      CellId pos = x;
      bool dead = false;
      for (std::size_t s = 0; s < steps; ++s) {
        const CellId next = moves[static_cast<std::size_t>(pos)][rng() >> 62];
        if (next == kKilled) {
          dead = true;
          break;
        }
        if (next != kNoCell) pos = next;
      }
      if (dead) continue;
      ++alive;
      if (in_nbhd[static_cast<std::size_t>(pos)]) ++hits;
    }
  } else {
    // Continuous-time chain with jump rates c_ij / m_i.
    std::vector<double> rate(grid.size(), 0.0);
    for (CellId id = 0; id < static_cast<CellId>(grid.size()); ++id) {
      if (!grid.in_domain(id)) continue;
      double s = 0.0;
      for (const auto& l : grid.links(id)) s += l.conductance;
      rate[static_cast<std::size_t>(id)] = s / grid.measure(id);
    }
    for (std::size_t w = 0; w < walkers; ++w) {
      std::mt19937_64 rng(splitmix64(seed ^ splitmix64(w)));
      CellId pos = x;
      double clock = 0.0;
      bool dead = false;
      while (true) {
        const double q = rate[static_cast<std::size_t>(pos)];
        if (q <= 0.0) break;
        clock += -std::log1p(-uniform01(rng)) / q;
        if (clock >= t) break;
        const auto links = grid.links(pos);
        double pick = uniform01(rng) * q * grid.measure(pos);
        CellId next = links.back().to;
        for (const auto& l : links) {
          pick -= l.conductance;
          if (pick < 0.0) {
            next = l.to;
            break;
          }
        }
        if (!grid.in_domain(next)) {
          dead = true;
          break;
        }
        pos = next;
      }
      if (dead) continue;
      ++alive;
      if (in_nbhd[static_cast<std::size_t>(pos)]) ++hits;
    }
  }

  const double n = static_cast<double>(walkers);
  const double fh = static_cast<double>(hits) / n;
  const double fa = static_cast<double>(alive) / n;
  res.estimate = fh / res.neighborhood_measure;
  res.std_error = std::sqrt(fh * (1.0 - fh) / n) / res.neighborhood_measure;
  res.survival = fa;
  res.survival_stderr = std::sqrt(fa * (1.0 - fa) / n);
  return res;
}

}  // namespace hkends
