#pragma once

// Finite-volume cell graph covering a truncated manifold with ends.
//
// Every cell carries a centre (sheet, x, y), a Lebesgue area and a weight
// sigma; its mu-measure is area * weight.  Two symmetric adjacency lists are
// stored:
//  * links():      conductances c_ij of the two-point flux stencil, so the
//                  weighted Laplacian is (L u)_i = sum_j c_ij (u_j - u_i) / m_i;
//  * path_links(): edges with Euclidean lengths (8-neighbour on structured
//                  patches) used for grid distances.
// Dirichlet boundary cells hold the value 0 and are never unknowns.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "hkends/geometry.hpp"

namespace hkends {

using CellId = std::int32_t;
inline constexpr CellId kNoCell = -1;

enum class CellClass : std::uint8_t { Interior, NeumannBdry, DirichletBdry, Outside, Core };

const char* to_string(CellClass c) noexcept;

/// Radial layout of rasterized ends.  Uniform keeps cells of size ~dx
/// everywhere (angular refinement every radius doubling); Geometric uses
/// log-polar cells whose size grows linearly with the distance to the core,
/// which is what long-time runs need.
enum class Grading : std::uint8_t { Uniform, Geometric };

struct Link {
  CellId to = kNoCell;
  double conductance = 0.0;
  double length = 0.0;
};

struct Cell {
  PlanePoint center;
  CellClass cls = CellClass::Outside;
  int end_id = 0;
  double area = 0.0;
  double weight = 1.0;
  bool far_ring = false;  // absorbing truncation cell
  bool singular = false;  // corner or non-conforming interface cell
};

class GridBuilder;

class Grid {
 public:
  std::size_t size() const noexcept { return cells_.size(); }
  const Cell& cell(CellId id) const { return cells_[static_cast<std::size_t>(id)]; }
  CellClass cell_class(CellId id) const { return cell(id).cls; }
  int end_id(CellId id) const { return cell(id).end_id; }
  double measure(CellId id) const { return cell(id).area * cell(id).weight; }

  /// Interior, NeumannBdry and Core cells carry unknowns.
  bool in_domain(CellId id) const {
    const auto c = cell(id).cls;
    return c == CellClass::Interior || c == CellClass::NeumannBdry || c == CellClass::Core;
  }
  bool is_dirichlet(CellId id) const { return cell(id).cls == CellClass::DirichletBdry; }

  std::span<const Link> links(CellId id) const;
  std::span<const Link> path_links(CellId id) const;

  double spacing() const noexcept { return spacing_; }
  double truncation_radius() const noexcept { return truncation_radius_; }
  double core_radius() const noexcept { return core_radius_; }
  int num_ends() const noexcept { return num_ends_; }
  Grading grading() const noexcept { return grading_; }

  /// Designated core cell (profile normalisation, probe "o"); kNoCell when the
  /// grid has no core.
  CellId core_center() const noexcept { return core_center_; }
  /// o_i for end i in 1..num_ends().
  CellId reference_cell(int end) const;

  /// Cell containing the point (possibly Outside), or the nearest stored cell
  /// of that sheet when the point falls outside every patch.
  CellId locate(const PlanePoint& p) const;
  /// Nearest in-domain cell to the point.
  CellId locate_domain(const PlanePoint& p) const;

  /// Manifold this grid was rasterized from; null for boxes and masks.
  const ManifoldWithEnds* manifold() const noexcept { return manifold_.get(); }

  /// Lattice view: only for grids built by make_box / make_mask_grid.
  bool is_lattice() const noexcept { return lattice_nx_ > 0; }
  int nx() const noexcept { return lattice_nx_; }
  int ny() const noexcept { return lattice_ny_; }
  CellId at(int i, int j) const;

  std::vector<CellId> domain_cells() const;
  bool has_true_dirichlet() const;  // a Dirichlet cell that is not truncation

  /// Largest diagonal rate sum_j c_ij / m_i over domain cells; explicit
  /// stepping is stable for dt <= 1 / max_rate().
  double max_rate() const;

 private:
  friend class GridBuilder;

  struct PatchIndex {
    enum class Kind : std::uint8_t { Polar, Cartesian, Disk } kind = Kind::Cartesian;
    int sheet = 0;
    double cx = 0.0, cy = 0.0, axis = 0.0;
    std::vector<double> fa, fb;
    std::vector<CellId> ids;  // fa.size()-1 by fb.size()-1, a-major
  };

  std::vector<Cell> cells_;
  std::vector<std::size_t> link_offsets_, path_offsets_;
  std::vector<Link> link_data_, path_data_;
  std::vector<PatchIndex> patches_;
  std::vector<CellId> reference_cells_;
  std::shared_ptr<const ManifoldWithEnds> manifold_;
  CellId core_center_ = kNoCell;
  double spacing_ = 0.0;
  double truncation_radius_ = 0.0;
  double core_radius_ = 0.0;
  int num_ends_ = 0;
  Grading grading_ = Grading::Uniform;
  int lattice_nx_ = 0, lattice_ny_ = 0;
};

/// Rasterizes the manifold truncated at radius r_max.  dx is the cell size
/// on the core circle.  The truncation ring is absorbing (far_ring cells).
/// Throws InvalidArgument when r_max <= core radius and ResolutionTooCoarse
/// when an end is fewer than 4 cells wide.
Grid rasterize(const ManifoldWithEnds& manifold, double dx, double r_max,
               Grading grading = Grading::Geometric);

struct BoxBoundary {
  BoundaryCondition left = BoundaryCondition::Neumann;
  BoundaryCondition right = BoundaryCondition::Neumann;
  BoundaryCondition bottom = BoundaryCondition::Neumann;
  BoundaryCondition top = BoundaryCondition::Neumann;
  // A Dirichlet side flagged far is a truncation side: absorbing for the heat
  // flow, boundary data for profile solves.
  bool far_left = false, far_right = false, far_bottom = false, far_top = false;
};

/// Uniform nx-by-ny lattice with cell (i, j) centred at
/// (x0 + (i + 1/2) dx, y0 + (j + 1/2) dx).  Dirichlet sides are realised by
/// a layer of DirichletBdry cells one spacing outside the box, so the
/// absorbing line sits at x0 - dx/2 (etc.).  All cells belong to end 1.
Grid make_box(int nx, int ny, double dx, BoxBoundary bc = {}, double x0 = 0.0, double y0 = 0.0);

/// Lattice from a mask: 0 outside, 1 domain (end 1), 2 Dirichlet wall,
/// 3 core.  Mask edges are reflecting.
Grid make_mask_grid(const UserGridEnd& mask);

}  // namespace hkends
