#pragma once

// Connected sums of planar ends around a compact core.
//
// Two layouts are supported:
//  * sector layout: the core is the closed disk of radius core_radius around
//    the origin and cone/strip/user-mask ends attach to disjoint arcs of the
//    core circle (all in one plane);
//  * sheet layout: each end is a full plane ("sheet") minus a parabola or
//    nothing at all.  One or two sheets are glued along the circle of radius
//    core_radius/2 around their origin; the core is the union of the
//    annuli core_radius/2 <= r <= core_radius.

#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

namespace hkends {

enum class BoundaryCondition : std::uint8_t { Dirichlet, Neumann };

char to_char(BoundaryCondition bc) noexcept;
BoundaryCondition parse_bc(char c);

/// Planar cone with vertex at the origin covering angles
/// [edge_angle, edge_angle + aperture].  edge1 lies at edge_angle.
struct ConeEnd {
  double aperture = std::numbers::pi / 2;
  double edge_angle = 0.0;
  BoundaryCondition edge1 = BoundaryCondition::Dirichlet;
  BoundaryCondition edge2 = BoundaryCondition::Dirichlet;
};

/// Half-infinite strip of the given width whose axis leaves the core along
/// `direction`.  side1 is the clockwise side (local u = -width/2).
/// A zero-aperture cone is represented by this shape.
struct StripEnd {
  double width = 1.0;
  double direction = 0.0;
  BoundaryCondition side1 = BoundaryCondition::Neumann;
  BoundaryCondition side2 = BoundaryCondition::Neumann;
};

/// Exterior of the parabola x2 = x1^2 + vertex_distance in its own sheet
/// (sheet origin = collar centre, directly below the vertex).
struct ParabolaExteriorEnd {
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  double vertex_distance = 1.5;
};

/// A full plane sheet with no boundary beyond the collar.
struct PlaneEnd {};

/// Cartesian mask in the core plane: 0 = outside, 1 = domain,
/// 2 = Dirichlet wall.  Row-major, row 0 at y0.  Mask edges not touching a
/// wall are reflecting.
struct UserGridEnd {
  double x0 = 0.0;
  double y0 = 0.0;
  double spacing = 0.1;
  int nx = 0;
  int ny = 0;
  std::vector<std::uint8_t> mask;

  std::uint8_t at(double x, double y) const;
};

using EndShape = std::variant<ConeEnd, StripEnd, ParabolaExteriorEnd, PlaneEnd, UserGridEnd>;

struct EndDescriptor {
  EndShape shape;

  bool is_sheet() const;
  bool has_dirichlet() const;
  std::string kind_name() const;
};

/// Weight sigma on points of a sheet; sheet is 0 in the sector layout.
using WeightFunction = std::function<double(int sheet, double x, double y)>;

struct PlanePoint {
  int sheet = 0;
  double x = 0.0;
  double y = 0.0;
};

class ManifoldWithEnds {
 public:
  const std::vector<EndDescriptor>& ends() const noexcept { return ends_; }
  std::size_t num_ends() const noexcept { return ends_.size(); }
  const EndDescriptor& end(int i) const { return ends_.at(static_cast<std::size_t>(i - 1)); }
  double core_radius() const noexcept { return core_radius_; }
  BoundaryCondition core_bc() const noexcept { return core_bc_; }
  bool sheet_layout() const noexcept { return sheet_layout_; }
  double glue_radius() const noexcept { return 0.5 * core_radius_; }
  double weight(int sheet, double x, double y) const;
  bool weighted() const noexcept { return static_cast<bool>(weight_); }

  /// o_i for i = 1..k (index i-1): where end i meets the core circle along
  /// its axis.
  const std::vector<PlanePoint>& reference_points() const noexcept { return reference_points_; }

  /// Sheet carrying end i (1-based).
  int end_sheet(int i) const;

  /// True when some end edge or the core boundary is Dirichlet.
  bool has_dirichlet() const;

  /// End index (1..k) containing the point, 0 in the core, -1 outside.
  /// Uses the exact continuous geometry, not a grid.
  int locate_end(const PlanePoint& p) const;

 private:
  friend ManifoldWithEnds assemble(std::vector<EndDescriptor>, double, WeightFunction,
                                   BoundaryCondition);
  std::vector<EndDescriptor> ends_;
  double core_radius_ = 1.0;
  BoundaryCondition core_bc_ = BoundaryCondition::Neumann;
  bool sheet_layout_ = false;
  WeightFunction weight_;
  std::vector<PlanePoint> reference_points_;
};

/// Validates and assembles a connected sum.
/// Throws EmptyEnds, OverlappingEnds, InvalidAperture or InvalidArgument.
ManifoldWithEnds assemble(std::vector<EndDescriptor> ends, double core_radius,
                          WeightFunction weight = {},
                          BoundaryCondition core_bc = BoundaryCondition::Neumann);

/// Angular footprint [lo, hi] (radians, lo in [0, 2pi), hi > lo) that a
/// sector-layout end occupies on the core circle.
struct ArcFootprint {
  double lo = 0.0;
  double hi = 0.0;
};
ArcFootprint footprint(const EndDescriptor& end, double core_radius);

/// Wraps an angle into [0, 2pi).
double wrap_angle(double theta) noexcept;

}  // namespace hkends
