#pragma once

// Harmonic profiles: closed forms for the model ends and a direct discrete
// solve on rasterized grids, plus diagnostics.

#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

#include "hkends/grid.hpp"

namespace hkends {

enum class Provenance : std::uint8_t { ClosedForm, Solved };

const char* to_string(Provenance p) noexcept;

/// Per-cell profile values.  Non-truncation Dirichlet cells hold 0;
/// truncation cells hold the boundary data used by the solve.
struct ProfileField {
  std::vector<double> values;
  Provenance provenance = Provenance::Solved;
  CellId normalization_cell = kNoCell;

  double operator[](CellId id) const { return values[static_cast<std::size_t>(id)]; }
  double max() const;
};

struct EndBand {
  int end = 0;
  double lo = 0.0;  // min of h / u_i over the comparison region
  double hi = 0.0;  // max of h / u_i
  std::size_t samples = 0;
  double ratio() const { return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity(); }
};

struct ProfileReport {
  double max_interior_residual = 0.0;  // max |(1/m) sum_j c_ij (h_j - h_i)|
  double max_relative_residual = 0.0;  // same, relative to sum_j c_ij (|h_j| + |h_i|)
  std::size_t residual_cells = 0;
  std::vector<EndBand> bands;
  double boundary_violation = 0.0;  // max |h| on non-truncation Dirichlet cells
  bool nonpositive_interior = false;
};

// ----- closed forms -------------------------------------------------------

/// Cone profile at polar (r, theta).  DD: r^{pi/a} sin(pi t/a);
/// DN: r^{pi/2a} sin(pi t/2a); ND: r^{pi/2a} sin(pi (a - t)/2a);
/// NN: log(r / r0), where t = theta - edge_angle.  Throws InvalidAperture.
double cone_profile(const ConeEnd& cone, double r, double theta, double r0 = 1.0);

/// Strip profile at axial distance s from the inner boundary and across
/// coordinate u in [-w/2, w/2].  NN: s; with Dirichlet sides the
/// exponentially growing mode of the cross-section.
double strip_profile(const StripEnd& strip, double s, double u);

/// h(x) = sqrt(2 (sqrt(x1^2 + (1/4 - x2)^2) + 1/4 - x2)) - 1 for the exterior
/// of x2 = x1^2.  Throws OutsideDomain for x2 > x1^2.
double exterior_parabola_profile(double x1, double x2);

/// Closed-form profile u_i of end `end` (1-based) at a point of the plane,
/// continued analytically where it makes sense (used for the core cells).
double end_profile(const ManifoldWithEnds& m, int end, const PlanePoint& p);

// ----- fields ---------------------------------------------------------------

/// Samples f at cell centres; non-truncation Dirichlet cells get 0.
ProfileField sample_profile(const Grid& grid, const std::function<double(const PlanePoint&)>& f);

/// Samples each end's closed form (the core takes the profile of the end
/// whose footprint contains it).
ProfileField closed_form_profile(const Grid& grid);

/// Boundary data on truncation cells; the default uses the closed-form end
/// profiles (rasterized grids) or 1 (lattices).
using FarValue = std::function<double(const Grid&, CellId ghost)>;

/// Solves the discrete weighted Laplace equation.  Each end driven by
/// truncation data is solved separately and the pieces are mixed so that
/// they contribute equally at the normalisation cell (the core centre, or
/// the maximiser when the grid has no core), where h = 1.
/// Throws NoDirichletBoundary, SingularSystem.
ProfileField solve_profile(const Grid& grid, const FarValue& far = {});

/// Residuals (cells within 3 links of singular cells and cells touching the
/// truncation are skipped), per-end comparability bands over cells at polar
/// distance >= 2 core radii from the end's centre, Dirichlet violation.
ProfileReport verify_profile(const ProfileField& h, const Grid& grid);

/// Residual-eligible cells used by verify_profile.
std::vector<CellId> residual_cells(const Grid& grid);

/// CSV with header x,y,sheet,end,h over domain cells.
void write_profile_csv(std::ostream& out, const Grid& grid, const ProfileField& h);

}  // namespace hkends
