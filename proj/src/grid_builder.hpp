#pragma once

// Internal helpers that assemble a Grid from structured tensor patches.

#include <functional>
#include <memory>
#include <vector>

#include "hkends/grid.hpp"

namespace hkends {

enum class Metric : std::uint8_t { Polar, Cartesian };

enum class SideKind : std::uint8_t {
  Neumann,        // reflecting
  DirichletHalf,  // absorbing wall on the patch face
  FarHalf,        // absorbing truncation on the patch face
  Periodic,       // b-direction only
  External,       // glued afterwards by the caller
};

struct TensorSpec {
  Metric metric = Metric::Cartesian;
  int sheet = 0;
  double cx = 0.0, cy = 0.0;  // polar centre or Cartesian origin
  double axis = 0.0;          // Cartesian a-axis direction
  std::vector<double> fa, fb;  // face coordinates (radius/angle or a/b)
  SideKind a_lo = SideKind::Neumann, a_hi = SideKind::Neumann;
  SideKind b_lo = SideKind::Neumann, b_hi = SideKind::Neumann;
};

enum class CellRole : std::uint8_t { Domain, Wall, Outside };

struct Classification {
  CellRole role = CellRole::Outside;
  int end_id = 0;
};

using Classifier = std::function<Classification(const PlanePoint& centre, int i, int j)>;

struct TensorPatch {
  TensorSpec spec;
  int na = 0, nb = 0;
  std::vector<CellId> ids;

  CellId id(int i, int j) const { return ids[static_cast<std::size_t>(i) * nb + j]; }
  double ac(int i) const;  // centre coordinate in a
  double bc(int j) const;  // centre coordinate in b
  PlanePoint world(double a, double b) const;
};

class GridBuilder {
 public:
  explicit GridBuilder(Grid& grid) : grid_(grid) {}

  CellId add_cell(const Cell& c);
  Cell& cell(CellId id) { return grid_.cells_[static_cast<std::size_t>(id)]; }

  /// Flux link; also registered as a path edge with the given length.
  void add_link(CellId a, CellId b, double conductance, double length);
  void add_path(CellId a, CellId b, double length);

  /// Absorbing ghost cell linked to `owner`.
  CellId add_ghost(CellId owner, const PlanePoint& at, double conductance, double length, bool far);

  TensorPatch add_tensor(const TensorSpec& spec, const Classifier& classify,
                         const std::function<double(const PlanePoint&)>& weight);

  void add_disk_index(int sheet, double radius, CellId id);

  /// Finalises classes (Core / Interior / NeumannBdry) and compresses the
  /// adjacency into CSR form.
  void finish();

  bool is_domain(CellId id) const { return roles_[static_cast<std::size_t>(id)] == CellRole::Domain; }
  void mark_reflecting(CellId id) { reflecting_[static_cast<std::size_t>(id)] = true; }

  Grid& grid() { return grid_; }

  struct Meta {
    double spacing = 0.0;
    double truncation_radius = 0.0;
    double core_radius = 0.0;
    int num_ends = 0;
    Grading grading = Grading::Uniform;
    CellId core_center = kNoCell;
    std::vector<CellId> reference_cells;
    int lattice_nx = 0, lattice_ny = 0;
    std::shared_ptr<const ManifoldWithEnds> manifold;
  };
  void set_meta(Meta meta);

 private:
  struct RawLink {
    CellId a, b;
    double conductance, length;
  };
  Grid& grid_;
  std::vector<RawLink> links_, paths_;
  std::vector<bool> reflecting_;
  std::vector<CellRole> roles_;
};

double euclid(const PlanePoint& p, const PlanePoint& q);

/// Glues the outer ring (i = na-1) of `inner` to the inner ring (i = 0) of
/// `outer`; both polar patches share a centre.  Conductance is the angular
/// overlap over the log-radial centre distance.  Returns, per inner-ring
/// cell, the angular length that found a partner.
std::vector<double> glue_polar_rings(GridBuilder& b, const TensorPatch& inner, const TensorPatch& outer);

}  // namespace hkends
