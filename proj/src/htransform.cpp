#include <algorithm>
#include <cmath>

#include "heat_operator.hpp"
#include "hkends/error.hpp"
#include "hkends/solver.hpp"

namespace hkends {

HTransformResult h_transform_check(const Grid& grid, const ProfileField& h, double t, CellId x, CellId y) {
  if (h.values.size() != grid.size()) throw Error(ErrorKind::InvalidArgument, "profile does not match the grid");
  if (!(t > 0.0)) throw Error(ErrorKind::InvalidArgument, "t must be positive");
  const double floor = 1e-6 * h.max();
  for (CellId c : {x, y}) {
    if (!grid.in_domain(c)) throw Error(ErrorKind::OutsideDomain, "probe must be a domain cell");
    if (!(h[c] > floor)) throw Error(ErrorKind::ProfileTooSmall, "profile below 1e-6 max h at a probe");
  }

  const HeatOperator op(grid);
  // Transformed operator: conductance c_ij h_i h_j to every neighbour,
  // measure h^2 m.  Dirichlet neighbours (h = 0) drop out; truncation
  // neighbours keep absorbing through the diagonal.
  HeatOperator oph = op;
  for (std::size_t i = 0; i < op.cells.size(); ++i) {
    const CellId id = op.cells[i];
    const double hi = h[id];
    if (!(hi > 0.0)) throw Error(ErrorKind::ProfileTooSmall, "profile must be positive on the domain");
    double d = 0.0;
    for (const auto& l : grid.links(id)) d += l.conductance * hi * h[l.to];
    oph.diag[i] = d;
    oph.mass[i] = op.mass[i] * hi * hi;
    for (std::size_t k = op.offsets[i]; k < op.offsets[i + 1]; ++k) {
      oph.cond[k] = op.cond[k] * hi * h[op.cells[static_cast<std::size_t>(op.nbr[k])]];
    }
  }

  const double dt_max = 0.9 / std::max(op.max_rate(), oph.max_rate());
  const auto steps = static_cast<std::size_t>(std::ceil(t / dt_max));
  const double dt = t / static_cast<double>(steps);
  const auto ix = static_cast<std::size_t>(op.index[static_cast<std::size_t>(x)]);
  const auto iy = static_cast<std::size_t>(op.index[static_cast<std::size_t>(y)]);

  auto evolve = [&](const HeatOperator& o) {
    std::vector<double> u(o.cells.size(), 0.0), next;
    u[ix] = 1.0 / o.mass[ix];
    for (std::size_t s = 0; s < steps; ++s) {
      o.explicit_step(u, next, dt);
      std::swap(u, next);
    }
    return u[iy];
  };

  HTransformResult r;
  r.p = evolve(op);
  r.p_h = evolve(oph);
  r.deviation = std::abs(r.p - h[x] * h[y] * r.p_h) / r.p;
  return r;
}

}  // namespace hkends
