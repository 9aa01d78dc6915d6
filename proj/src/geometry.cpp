#include "hkends/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "hkends/error.hpp"

namespace hkends {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

bool arcs_overlap(ArcFootprint a, ArcFootprint b) {
  // Shift b so that its start lies in [a.lo, a.lo + 2pi).
  for (int k = -1; k <= 1; ++k) {
    const double lo = b.lo + k * kTwoPi;
    const double hi = b.hi + k * kTwoPi;
    if (lo < a.hi - 1e-12 && a.lo < hi - 1e-12) return true;
  }
  return false;
}

}  // namespace

char to_char(BoundaryCondition bc) noexcept { return bc == BoundaryCondition::Dirichlet ? 'D' : 'N'; }

BoundaryCondition parse_bc(char c) {
  if (c == 'D' || c == 'd') return BoundaryCondition::Dirichlet;
  if (c == 'N' || c == 'n') return BoundaryCondition::Neumann;
  throw Error(ErrorKind::ParseError, std::string("boundary condition must be D or N, got '") + c + "'");
}

double wrap_angle(double theta) noexcept {
  double w = std::fmod(theta, kTwoPi);
  if (w < 0) w += kTwoPi;
  if (w >= kTwoPi) w -= kTwoPi;
  return w;
}

std::uint8_t UserGridEnd::at(double x, double y) const {
  const auto i = static_cast<int>(std::floor((x - x0) / spacing));
  const auto j = static_cast<int>(std::floor((y - y0) / spacing));
  if (i < 0 || j < 0 || i >= nx || j >= ny) return 0;
  return mask[static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i)];
}

bool EndDescriptor::is_sheet() const {
  return std::holds_alternative<ParabolaExteriorEnd>(shape) || std::holds_alternative<PlaneEnd>(shape);
}

bool EndDescriptor::has_dirichlet() const {
  constexpr auto D = BoundaryCondition::Dirichlet;
  return std::visit(overloaded{
                        [](const ConeEnd& c) { return c.edge1 == D || c.edge2 == D; },
                        [](const StripEnd& s) { return s.side1 == D || s.side2 == D; },
                        [](const ParabolaExteriorEnd& p) { return p.bc == D; },
                        [](const PlaneEnd&) { return false; },
                        [](const UserGridEnd& u) {
                          return std::find(u.mask.begin(), u.mask.end(), std::uint8_t{2}) != u.mask.end();
                        },
                    },
                    shape);
}

std::string EndDescriptor::kind_name() const {
  return std::visit(overloaded{
                        [](const ConeEnd&) { return std::string("cone"); },
                        [](const StripEnd&) { return std::string("strip"); },
                        [](const ParabolaExteriorEnd&) { return std::string("parabola_exterior"); },
                        [](const PlaneEnd&) { return std::string("plane"); },
                        [](const UserGridEnd&) { return std::string("user_grid"); },
                    },
                    shape);
}

ArcFootprint footprint(const EndDescriptor& end, double core_radius) {
  return std::visit(
      overloaded{
          [](const ConeEnd& c) {
            const double lo = wrap_angle(c.edge_angle);
            return ArcFootprint{lo, lo + c.aperture};
          },
          [core_radius](const StripEnd& s) {
            const double half = std::asin(std::min(1.0, 0.5 * s.width / core_radius));
            const double lo = wrap_angle(s.direction - half);
            return ArcFootprint{lo, lo + 2.0 * half};
          },
          [core_radius](const UserGridEnd& u) {
            // Angles of mask domain pixels touching the core circle.
            std::vector<double> angles;
            for (int j = 0; j < u.ny; ++j) {
              for (int i = 0; i < u.nx; ++i) {
                if (u.mask[static_cast<std::size_t>(j * u.nx + i)] != 1) continue;
                const double x = u.x0 + (i + 0.5) * u.spacing;
                const double y = u.y0 + (j + 0.5) * u.spacing;
                const double r = std::hypot(x, y);
                if (r >= core_radius && r < core_radius + 2.0 * u.spacing) {
                  angles.push_back(wrap_angle(std::atan2(y, x)));
                }
              }
            }
            if (angles.empty()) {
              throw Error(ErrorKind::InvalidArgument, "user grid end does not touch the core circle");
            }
            std::sort(angles.begin(), angles.end());
            // Smallest arc covering all angles: start after the largest gap.
            std::size_t start = 0;
            double gap = angles.front() + kTwoPi - angles.back();
            for (std::size_t k = 1; k < angles.size(); ++k) {
              if (angles[k] - angles[k - 1] > gap) {
                gap = angles[k] - angles[k - 1];
                start = k;
              }
            }
            const double lo = angles[start];
            const double span = kTwoPi - gap;
            return ArcFootprint{lo, lo + span};
          },
          [](const auto&) -> ArcFootprint {
            throw Error(ErrorKind::InvalidArgument, "sheet ends have no arc footprint");
          },
      },
      end.shape);
}

double ManifoldWithEnds::weight(int sheet, double x, double y) const {
  return weight_ ? weight_(sheet, x, y) : 1.0;
}

int ManifoldWithEnds::end_sheet(int i) const {
  if (i < 1 || i > static_cast<int>(ends_.size())) {
    throw Error(ErrorKind::InvalidArgument, "end index out of range");
  }
  return sheet_layout_ ? i - 1 : 0;
}

bool ManifoldWithEnds::has_dirichlet() const {
  if (!sheet_layout_ && core_bc_ == BoundaryCondition::Dirichlet) return true;
  return std::any_of(ends_.begin(), ends_.end(), [](const EndDescriptor& e) { return e.has_dirichlet(); });
}

int ManifoldWithEnds::locate_end(const PlanePoint& p) const {
  const double r = std::hypot(p.x, p.y);
  if (sheet_layout_) {
    if (p.sheet < 0 || p.sheet >= static_cast<int>(ends_.size())) return -1;
    if (r < glue_radius()) return -1;
    if (r <= core_radius_) return 0;
    if (const auto* para = std::get_if<ParabolaExteriorEnd>(&ends_[static_cast<std::size_t>(p.sheet)].shape)) {
      if (p.y - para->vertex_distance > p.x * p.x) return -1;
    }
    return p.sheet + 1;
  }
  if (p.sheet != 0) return -1;
  if (r <= core_radius_) return 0;
  const double theta = wrap_angle(std::atan2(p.y, p.x));
  for (std::size_t k = 0; k < ends_.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    const auto& shape = ends_[k].shape;
    if (const auto* c = std::get_if<ConeEnd>(&shape)) {
      const double rel = wrap_angle(theta - c->edge_angle);
      if (rel <= c->aperture) return id;
    } else if (const auto* s = std::get_if<StripEnd>(&shape)) {
      const double ax = std::cos(s->direction), ay = std::sin(s->direction);
      const double along = p.x * ax + p.y * ay;
      const double across = -p.x * ay + p.y * ax;
      const double s0 = std::sqrt(core_radius_ * core_radius_ - 0.25 * s->width * s->width);
      if (along >= s0 && std::abs(across) <= 0.5 * s->width) return id;
    } else if (const auto* u = std::get_if<UserGridEnd>(&shape)) {
      if (u->at(p.x, p.y) == 1) return id;
    }
  }
  return -1;
}

ManifoldWithEnds assemble(std::vector<EndDescriptor> ends, double core_radius, WeightFunction weight,
                          BoundaryCondition core_bc) {
  if (ends.empty()) throw Error(ErrorKind::EmptyEnds, "a manifold needs at least one end");
  if (!(core_radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "core radius must be positive");

  const auto sheets = std::count_if(ends.begin(), ends.end(), [](const EndDescriptor& e) { return e.is_sheet(); });
  if (sheets != 0 && sheets != static_cast<long>(ends.size())) {
    throw Error(ErrorKind::InvalidArgument, "sheet ends (parabola exterior, plane) cannot be mixed with sector ends");
  }
  if (sheets > 2) {
    throw Error(ErrorKind::InvalidArgument, "at most two sheets can be glued along one collar");
  }

  for (const auto& e : ends) {
    if (const auto* c = std::get_if<ConeEnd>(&e.shape)) {
      if (!(c->aperture > 0.0) || !(c->aperture < kTwoPi)) {
        throw Error(ErrorKind::InvalidAperture, "cone aperture must lie in (0, 2pi)");
      }
    } else if (const auto* s = std::get_if<StripEnd>(&e.shape)) {
      if (!(s->width > 0.0)) throw Error(ErrorKind::InvalidArgument, "strip width must be positive");
      if (s->width >= 2.0 * core_radius) {
        throw Error(ErrorKind::InvalidArgument, "strip must be narrower than the core diameter");
      }
    } else if (const auto* p = std::get_if<ParabolaExteriorEnd>(&e.shape)) {
      if (!(p->vertex_distance > core_radius)) {
        throw Error(ErrorKind::InvalidArgument, "parabola vertex must lie outside the core");
      }
    } else if (const auto* u = std::get_if<UserGridEnd>(&e.shape)) {
      if (u->nx <= 0 || u->ny <= 0 || !(u->spacing > 0.0) ||
          u->mask.size() != static_cast<std::size_t>(u->nx) * static_cast<std::size_t>(u->ny)) {
        throw Error(ErrorKind::InvalidArgument, "malformed user grid mask");
      }
    }
  }

  ManifoldWithEnds m;
  m.core_radius_ = core_radius;
  m.core_bc_ = core_bc;
  m.sheet_layout_ = sheets > 0;
  m.weight_ = std::move(weight);

  if (!m.sheet_layout_) {
    std::vector<ArcFootprint> arcs;
    double total = 0.0;
    for (const auto& e : ends) {
      arcs.push_back(footprint(e, core_radius));
      total += arcs.back().hi - arcs.back().lo;
    }
    if (total >= kTwoPi) throw Error(ErrorKind::OverlappingEnds, "end footprints exceed the full circle");
    for (std::size_t a = 0; a < arcs.size(); ++a) {
      for (std::size_t b = a + 1; b < arcs.size(); ++b) {
        if (arcs_overlap(arcs[a], arcs[b])) {
          throw Error(ErrorKind::OverlappingEnds,
                      "ends " + std::to_string(a + 1) + " and " + std::to_string(b + 1) + " intersect");
        }
      }
    }
    for (const auto& arc : arcs) {
      const double mid = 0.5 * (arc.lo + arc.hi);
      m.reference_points_.push_back({0, core_radius * std::cos(mid), core_radius * std::sin(mid)});
    }
  } else {
    for (std::size_t k = 0; k < ends.size(); ++k) {
      m.reference_points_.push_back({static_cast<int>(k), 0.0, -core_radius});
    }
  }
  m.ends_ = std::move(ends);
  return m;
}

}  // namespace hkends
