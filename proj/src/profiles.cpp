#include "hkends/profiles.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <queue>

#include "hkends/error.hpp"

namespace hkends {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * kPi;

struct StripFrame {
  double s = 0.0;  // axial distance from the inner chord
  double u = 0.0;  // across coordinate
};

StripFrame strip_frame(const StripEnd& strip, double core_radius, const PlanePoint& p) {
  const double ax = std::cos(strip.direction), ay = std::sin(strip.direction);
  const double half = 0.5 * strip.width;
  const double s0 = std::sqrt(core_radius * core_radius - half * half);
  return {p.x * ax + p.y * ay - s0, -p.x * ay + p.y * ax};
}

// Growth rate and cross-section of a strip mode; rate 0 means the NN case.
double strip_rate(const StripEnd& s) {
  const bool d1 = s.side1 == BoundaryCondition::Dirichlet, d2 = s.side2 == BoundaryCondition::Dirichlet;
  if (d1 && d2) return kPi / s.width;
  if (d1 || d2) return kPi / (2.0 * s.width);
  return 0.0;
}

double strip_section(const StripEnd& s, double u) {
  const bool d1 = s.side1 == BoundaryCondition::Dirichlet, d2 = s.side2 == BoundaryCondition::Dirichlet;
  const double w = s.width;
  if (d1 && d2) return std::sin(kPi * (u + 0.5 * w) / w);
  if (d1) return std::sin(kPi * (u + 0.5 * w) / (2.0 * w));
  return std::sin(kPi * (0.5 * w - u) / (2.0 * w));
}

double strip_profile_shifted(const StripEnd& strip, double s, double u, double shift) {
  const double rate = strip_rate(strip);
  if (rate == 0.0) return s;
  return std::exp(rate * (s - shift)) * strip_section(strip, u);
}

}  // namespace

const char* to_string(Provenance p) noexcept { return p == Provenance::ClosedForm ? "closed-form" : "solved"; }

double ProfileField::max() const {
  double best = 0.0;
  for (double v : values) best = std::max(best, v);
  return best;
}

double cone_profile(const ConeEnd& cone, double r, double theta, double r0) {
  const double a = cone.aperture;
  if (!(a > 0.0) || !(a < kTwoPi)) throw Error(ErrorKind::InvalidAperture, "cone aperture must lie in (0, 2pi)");
  // Angle from edge 1, continued across the edges around the bisector.
  const double t = std::remainder(theta - cone.edge_angle - 0.5 * a, kTwoPi) + 0.5 * a;
  const bool d1 = cone.edge1 == BoundaryCondition::Dirichlet, d2 = cone.edge2 == BoundaryCondition::Dirichlet;
  if (d1 && d2) return std::pow(r, kPi / a) * std::sin(kPi * t / a);
  if (d1) return std::pow(r, kPi / (2.0 * a)) * std::sin(kPi * t / (2.0 * a));
  if (d2) return std::pow(r, kPi / (2.0 * a)) * std::sin(kPi * (a - t) / (2.0 * a));
  return std::log(r / r0);
}

double strip_profile(const StripEnd& strip, double s, double u) {
  if (!(strip.width > 0.0)) throw Error(ErrorKind::InvalidArgument, "strip width must be positive");
  return strip_profile_shifted(strip, s, u, 0.0);
}

double exterior_parabola_profile(double x1, double x2) {
  if (x2 > x1 * x1 + 1e-12) throw Error(ErrorKind::OutsideDomain, "point lies inside the parabola");
  const double q = 0.25 - x2;
  return std::sqrt(2.0 * (std::sqrt(x1 * x1 + q * q) + q)) - 1.0;
}

double end_profile(const ManifoldWithEnds& m, int end, const PlanePoint& p) {
  const auto& shape = m.end(end).shape;
  const double R = m.core_radius();
  const double r = std::hypot(p.x, p.y);
  if (const auto* c = std::get_if<ConeEnd>(&shape)) return cone_profile(*c, r, std::atan2(p.y, p.x), R);
  if (const auto* s = std::get_if<StripEnd>(&shape)) {
    const auto f = strip_frame(*s, R, p);
    return strip_profile(*s, f.s, f.u);
  }
  if (const auto* q = std::get_if<ParabolaExteriorEnd>(&shape)) {
    if (q->bc == BoundaryCondition::Dirichlet) {
      const double x2 = p.y - q->vertex_distance;
      return exterior_parabola_profile(p.x, std::min(x2, p.x * p.x));
    }
    return std::log(r / R);
  }
  if (std::holds_alternative<PlaneEnd>(shape)) return std::log(r / R);
  throw Error(ErrorKind::UnsupportedEnd, "user grid ends have no closed-form profile");
}

ProfileField sample_profile(const Grid& grid, const std::function<double(const PlanePoint&)>& f) {
  ProfileField h;
  h.provenance = Provenance::ClosedForm;
  h.values.assign(grid.size(), 0.0);
  for (CellId id = 0; id < static_cast<CellId>(grid.size()); ++id) {
    const auto& c = grid.cell(id);
    if (grid.in_domain(id) || (c.cls == CellClass::DirichletBdry && c.far_ring)) {
      h.values[static_cast<std::size_t>(id)] = f(c.center);
    }
  }
  h.normalization_cell = grid.core_center();
  return h;
}

ProfileField closed_form_profile(const Grid& grid) {
  const ManifoldWithEnds* m = grid.manifold();
  if (m == nullptr) throw Error(ErrorKind::InvalidArgument, "closed-form profiles need a rasterized manifold");
  std::vector<ArcFootprint> arcs;
  if (!m->sheet_layout()) {
    for (const auto& e : m->ends()) arcs.push_back(footprint(e, m->core_radius()));
  }
  ProfileField h = sample_profile(grid, [](const PlanePoint&) { return 0.0; });
  for (CellId id = 0; id < static_cast<CellId>(grid.size()); ++id) {
    const auto& c = grid.cell(id);
    if (!grid.in_domain(id) && !(c.cls == CellClass::DirichletBdry && c.far_ring)) continue;
    int end = c.end_id;
    if (end == 0) {
      if (m->sheet_layout()) {
        end = c.center.sheet + 1;
      } else {
        const double th = wrap_angle(std::atan2(c.center.y, c.center.x));
        for (std::size_t k = 0; k < arcs.size(); ++k) {
          const double rel = wrap_angle(th - arcs[k].lo);
          if (rel <= arcs[k].hi - arcs[k].lo) end = static_cast<int>(k) + 1;
        }
      }
    }
    if (end == 0 || std::holds_alternative<UserGridEnd>(m->end(end).shape)) continue;
    h.values[static_cast<std::size_t>(id)] = end_profile(*m, end, c.center);
  }
  return h;
}

namespace {

// Default truncation data: closed-form end profiles, rescaled per end so the
// largest ring value is 1 (strips with Dirichlet sides grow exponentially).
std::vector<double> default_far_values(const Grid& grid) {
  std::vector<double> v(grid.size(), 0.0);
  const ManifoldWithEnds* m = grid.manifold();
  std::map<int, double> strip_shift;
  if (m != nullptr) {
    for (CellId id = 0; id < static_cast<CellId>(grid.size()); ++id) {
      const auto& c = grid.cell(id);
      if (!c.far_ring) continue;
      if (const auto* s = std::get_if<StripEnd>(&m->end(c.end_id).shape)) {
        const double sv = strip_frame(*s, m->core_radius(), c.center).s;
        auto [it, inserted] = strip_shift.try_emplace(c.end_id, sv);
        if (!inserted) it->second = std::max(it->second, sv);
      }
    }
  }
  for (CellId id = 0; id < static_cast<CellId>(grid.size()); ++id) {
    const auto& c = grid.cell(id);
    if (!c.far_ring) continue;
    double value = 1.0;
    if (m != nullptr) {
      if (const auto* s = std::get_if<StripEnd>(&m->end(c.end_id).shape)) {
        const auto f = strip_frame(*s, m->core_radius(), c.center);
        value = strip_profile_shifted(*s, f.s, f.u, strip_rate(*s) > 0.0 ? strip_shift[c.end_id] : 0.0);
      } else if (!std::holds_alternative<UserGridEnd>(m->end(c.end_id).shape)) {
        value = end_profile(*m, c.end_id, c.center);
      }
    }
    v[static_cast<std::size_t>(id)] = std::max(value, 0.0);
  }
  return v;
}

}  // namespace

ProfileField solve_profile(const Grid& grid, const FarValue& far) {
  if (!grid.has_true_dirichlet()) {
    throw Error(ErrorKind::NoDirichletBoundary, "profile solve needs a Dirichlet boundary");
  }
  const std::size_t n = grid.size();
  std::vector<int> index(n, -1);
  std::vector<CellId> cells;
  for (CellId id = 0; id < static_cast<CellId>(n); ++id) {
    if (grid.in_domain(id)) {
      index[static_cast<std::size_t>(id)] = static_cast<int>(cells.size());
      cells.push_back(id);
    }
  }
  std::vector<double> ghost(n, 0.0);
  if (far) {
    for (CellId id = 0; id < static_cast<CellId>(n); ++id) {
      if (grid.cell(id).far_ring) ghost[static_cast<std::size_t>(id)] = far(grid, id);
    }
  } else {
    ghost = default_far_values(grid);
  }

  const auto m = static_cast<Eigen::Index>(cells.size());
  std::vector<Eigen::Triplet<double>> trip;
  std::map<int, Eigen::VectorXd> rhs;  // one right-hand side per driven end
  for (Eigen::Index r = 0; r < m; ++r) {
    const CellId id = cells[static_cast<std::size_t>(r)];
    double diag = 0.0;
    for (const auto& l : grid.links(id)) {
      diag += l.conductance;
      const int col = index[static_cast<std::size_t>(l.to)];
      if (col >= 0) {
        trip.emplace_back(r, col, -l.conductance);
      } else if (grid.cell(l.to).far_ring && ghost[static_cast<std::size_t>(l.to)] != 0.0) {
        auto& b = rhs.try_emplace(grid.end_id(l.to), Eigen::VectorXd::Zero(m)).first->second;
        b[r] += l.conductance * ghost[static_cast<std::size_t>(l.to)];
      }
    }
    trip.emplace_back(r, r, diag);
  }
  if (rhs.empty()) throw Error(ErrorKind::SingularSystem, "no truncation data drives the profile");

  Eigen::SparseMatrix<double> K(m, m);
  K.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "factorisation of the profile system failed");
  const auto D = ldlt.vectorD();
  if (D.minCoeff() <= 1e-13 * D.maxCoeff()) {
    throw Error(ErrorKind::SingularSystem, "profile system is rank deficient (a component without Dirichlet cells)");
  }

  const CellId o = grid.core_center();
  const int orow = o == kNoCell ? -1 : index[static_cast<std::size_t>(o)];
  Eigen::VectorXd total = Eigen::VectorXd::Zero(m);
  std::map<int, double> scale;
  for (const auto& [end, b] : rhs) {
    Eigen::VectorXd x = ldlt.solve(b);
    double lambda = 1.0;
    if (orow >= 0) {
      if (!(x[orow] > 1e-280 * x.maxCoeff())) {
        throw Error(ErrorKind::SingularSystem,
                    "profile of end " + std::to_string(end) + " vanishes at the core; lower the truncation radius");
      }
      lambda = 1.0 / (static_cast<double>(rhs.size()) * x[orow]);
    }
    total += lambda * x;
    scale[end] = lambda;
  }

  ProfileField h;
  h.provenance = Provenance::Solved;
  h.values.assign(n, 0.0);
  double norm = 1.0;
  if (orow >= 0) {
    h.normalization_cell = o;
    norm = total[orow];
  } else {
    Eigen::Index arg = 0;
    norm = total.maxCoeff(&arg);
    h.normalization_cell = cells[static_cast<std::size_t>(arg)];
  }
  for (Eigen::Index r = 0; r < m; ++r) h.values[static_cast<std::size_t>(cells[static_cast<std::size_t>(r)])] = total[r] / norm;
  for (CellId id = 0; id < static_cast<CellId>(n); ++id) {
    if (grid.cell(id).far_ring) {
      const auto it = scale.find(grid.end_id(id));
      const double lambda = it == scale.end() ? 0.0 : it->second;
      h.values[static_cast<std::size_t>(id)] = lambda * ghost[static_cast<std::size_t>(id)] / norm;
    }
  }
  return h;
}

namespace {

// Link hops from the cells selected by `seed`, capped at `cap + 1`.
template <class Seed>
std::vector<int> hops_from(const Grid& grid, Seed seed, int cap) {
  const std::size_t n = grid.size();
  std::vector<int> hops(n, cap + 1);
  std::queue<CellId> queue;
  for (CellId id = 0; id < static_cast<CellId>(n); ++id) {
    if (seed(id)) {
      hops[static_cast<std::size_t>(id)] = 0;
      queue.push(id);
    }
  }
  while (!queue.empty()) {
    const CellId u = queue.front();
    queue.pop();
    const int d = hops[static_cast<std::size_t>(u)];
    if (d >= cap) continue;
    for (const auto& l : grid.links(u)) {
      if (hops[static_cast<std::size_t>(l.to)] > d + 1) {
        hops[static_cast<std::size_t>(l.to)] = d + 1;
        queue.push(l.to);
      }
    }
  }
  return hops;
}

}  // namespace

std::vector<CellId> residual_cells(const Grid& grid) {
  const std::size_t n = grid.size();
  const auto hops = hops_from(grid, [&](CellId id) { return grid.cell(id).singular; }, 3);
  std::vector<CellId> out;
  for (CellId id = 0; id < static_cast<CellId>(n); ++id) {
    const auto cls = grid.cell_class(id);
    if (cls != CellClass::Interior && cls != CellClass::NeumannBdry) continue;
    if (hops[static_cast<std::size_t>(id)] <= 3) continue;
    bool touches_far = false;
    for (const auto& l : grid.links(id)) touches_far = touches_far || grid.cell(l.to).far_ring;
    if (!touches_far) out.push_back(id);
  }
  return out;
}

ProfileReport verify_profile(const ProfileField& h, const Grid& grid) {
  if (h.values.size() != grid.size()) throw Error(ErrorKind::InvalidArgument, "profile does not match the grid");
  ProfileReport rep;
  for (CellId id : residual_cells(grid)) {
    double flux = 0.0, scale = 0.0;
    for (const auto& l : grid.links(id)) {
      flux += l.conductance * (h[l.to] - h[id]);
      scale += l.conductance * (std::abs(h[l.to]) + std::abs(h[id]));
    }
    rep.max_interior_residual = std::max(rep.max_interior_residual, std::abs(flux) / grid.measure(id));
    if (scale > 0.0) rep.max_relative_residual = std::max(rep.max_relative_residual, std::abs(flux) / scale);
    ++rep.residual_cells;
  }
  for (CellId id = 0; id < static_cast<CellId>(grid.size()); ++id) {
    const auto& c = grid.cell(id);
    if (c.cls == CellClass::DirichletBdry && !c.far_ring) {
      rep.boundary_violation = std::max(rep.boundary_violation, std::abs(h[id]));
    }
    if (c.cls == CellClass::Interior && !(h[id] > 0.0)) rep.nonpositive_interior = true;
  }

  const ManifoldWithEnds* m = grid.manifold();
  if (m != nullptr) {
    const double R = m->core_radius();
    // The staircase boundary shifts the zero set by up to a cell, so the
    // layer next to a Dirichlet wall is left out.
    const auto wall = hops_from(
        grid, [&](CellId id) { return grid.cell(id).cls == CellClass::DirichletBdry && !grid.cell(id).far_ring; }, 1);
    for (int e = 1; e <= static_cast<int>(m->num_ends()); ++e) {
      if (std::holds_alternative<UserGridEnd>(m->end(e).shape)) continue;
      EndBand band;
      band.end = e;
      band.lo = std::numeric_limits<double>::infinity();
      band.hi = 0.0;
      for (CellId id = 0; id < static_cast<CellId>(grid.size()); ++id) {
        const auto& c = grid.cell(id);
        if (c.end_id != e || !grid.in_domain(id) || c.singular) continue;
        if (wall[static_cast<std::size_t>(id)] <= 1) continue;
        if (std::hypot(c.center.x, c.center.y) < 2.0 * R) continue;
        const double u = end_profile(*m, e, c.center);
        if (!(u > 0.0) || !std::isfinite(u)) continue;
        const double ratio = h[id] / u;
        band.lo = std::min(band.lo, ratio);
        band.hi = std::max(band.hi, ratio);
        ++band.samples;
      }
      if (band.samples == 0) band.lo = 0.0;
      rep.bands.push_back(band);
    }
  }
  return rep;
}

void write_profile_csv(std::ostream& out, const Grid& grid, const ProfileField& h) {
  out << "x,y,sheet,end,h\n";
  out.precision(12);
  for (CellId id = 0; id < static_cast<CellId>(grid.size()); ++id) {
    if (!grid.in_domain(id)) continue;
    const auto& c = grid.cell(id);
    out << c.center.x << ',' << c.center.y << ',' << c.center.sheet << ',' << c.end_id << ',' << h[id] << '\n';
  }
}

}  // namespace hkends
