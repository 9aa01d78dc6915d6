#pragma once

// Ingredients of the two-sided heat kernel estimate: h-weighted volumes, the
// H function, envelopes, x_sqrt(t) points, parabolicity, Green bounds and
// decay-law predictions.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hkends/grid.hpp"
#include "hkends/profiles.hpp"

namespace hkends {

/// Cumulative volumes of balls around one centre: cells sorted by grid
/// distance with running sums of h^2 m (weighted) and m (plain).
class BallVolume {
 public:
  BallVolume() = default;
  /// Ball in the whole grid (restrict_end < 0), or inside end restrict_end
  /// with paths that avoid the core.
  BallVolume(const Grid& grid, const ProfileField& h, CellId center, int restrict_end = -1);

  double weighted(double r) const;
  double plain(double r) const;
  /// Largest radius the ball can reach without meeting the truncation.
  double reach() const noexcept { return reach_; }
  CellId center() const noexcept { return center_; }

 private:
  double lookup(const std::vector<double>& cum, double r) const;

  std::vector<double> dist_, cum_w_, cum_m_;
  double reach_ = 0.0;
  double center_radius_ = 0.0;
  CellId center_ = kNoCell;
};

/// V_{i,h}(r) for every end, with extrapolation beyond the sampled range.
class VolumeTable {
 public:
  VolumeTable() = default;
  VolumeTable(const Grid& grid, const ProfileField& h);

  int num_ends() const noexcept { return static_cast<int>(ends_.size()); }
  /// V_{i,h}(r) for i in 1..k; i = 0 gives V_{0,h} = min over ends.
  double volume(int end, double r) const;
  /// Unweighted V_i(r).
  double plain_volume(int end, double r) const;
  /// Radius up to which the table is measured (R_max - core radius).
  double max_radius() const noexcept { return max_radius_; }
  /// Growth exponent used past max_radius().
  double growth_exponent(int end) const;
  const BallVolume& ball(int end) const { return ends_.at(static_cast<std::size_t>(end - 1)); }

 private:
  std::vector<BallVolume> ends_;
  std::vector<double> growth_;
  double max_radius_ = 0.0;
};

/// V_{i,h}(o_i, r) by direct summation.  Throws RadiusExceedsTruncation when
/// r > R_max - core radius.
double weighted_volume(const Grid& grid, const ProfileField& h, int end, double r);

/// mu_h of the ball of radius r around x inside x's end (whole grid for core
/// cells).  Same error as weighted_volume.
double weighted_ball_volume(const Grid& grid, const ProfileField& h, CellId x, double r);

/// H_h(x, t), clamped to (0, 1].  Core cells give 1.
double H_function(const Grid& grid, const VolumeTable& volumes, CellId x, double t);

/// Same, with |x| and the end index supplied (no distance computation).
double H_function_at(const VolumeTable& volumes, int end, double norm, double t);

struct EnvelopeConstants {
  double C_low = 1.0, c_low = 0.5;
  double C_up = 1.0, c_up = 0.125;
};

struct EstimateEnvelope {
  double lower = 0.0;
  double upper = 0.0;
  // Bracket pieces times h(x) h(y), before the constants and exponentials.
  double same_end_gaussian = 0.0;
  double cross_term_00 = 0.0;
  double cross_term_x = 0.0;
  double cross_term_y = 0.0;
  double d_empty = 0.0;  // infinity across ends
  double d_plus = 0.0;
  EnvelopeConstants constants;
  bool small_time = false;
};

/// Reusable per-point data for envelope sweeps.
struct EnvelopePoint {
  CellId cell = kNoCell;
  int end = 0;
  double h = 0.0;
  double norm = 0.0;
  BallVolume ball;               // in the point's end (whole grid for the core)
  BallVolume global_ball;        // whole grid, for small times
  std::vector<double> d_all;     // distances in M
  std::vector<double> d_avoid;   // distances avoiding the core
  std::vector<double> d_plus;    // distances through the core
};

EnvelopePoint envelope_point(const Grid& grid, const ProfileField& h, CellId x);

EstimateEnvelope heat_kernel_envelope(const VolumeTable& volumes, const EnvelopePoint& x, const EnvelopePoint& y,
                                      double t, const EnvelopeConstants& constants = {});

/// Convenience overload computing the point data.
EstimateEnvelope heat_kernel_envelope(const Grid& grid, const ProfileField& h, const VolumeTable& volumes, double t,
                                      CellId x, CellId y, const EnvelopeConstants& constants = {});

/// A cell within sqrt(t)/4 of x in the same end maximising the distance to
/// the end's Dirichlet boundary and the core.  Throws NoAdmissiblePoint when
/// that distance stays below c0 sqrt(t)/8, OutsideDomain for core cells.
CellId x_sqrt_t(const Grid& grid, CellId x, double t, double c0 = 1.0);

/// Distance from every cell to the nearest non-truncation Dirichlet cell or
/// core cell.
std::vector<double> boundary_distance(const Grid& grid);

enum class EndClass : std::uint8_t { E1_nonparabolic, E2_parabolic };

const char* to_string(EndClass c) noexcept;

/// True when int_1^inf ds / V(sqrt s) diverges.
bool parabolicity_test(const std::function<double(double)>& volume);

/// Same, for V(r) ~ r^beta (log r)^gamma.
bool parabolicity_test_exponent(double beta, double gamma = 0.0);

/// Class from the unweighted volume growth of the end: closed form for
/// unweighted model ends, the table's fitted growth otherwise.  Throws
/// Inconclusive for mask ends without a table.
EndClass classify_end(const ManifoldWithEnds& manifold, int end, const VolumeTable* volumes = nullptr);

struct GreenBounds {
  double lower = 0.0;
  double upper = 0.0;
  double tail = 0.0;  // int_{d^2}^inf ds / V(sqrt s)
};

/// Two-sided Green bounds c * tail, C * tail.  Throws ParabolicEnd when the
/// tail diverges.
GreenBounds green_estimate(const std::function<double(double)>& volume, double d, double c = 1.0, double C = 1.0);

/// Numerical Green function G(., y) = int_0^inf p(t, ., y) dt on the grid
/// (restrict_end > 0: the end alone, with the core absorbing).  Throws
/// SingularSystem when nothing absorbs.
std::vector<double> green_numeric(const Grid& grid, CellId y, int restrict_end = 0);

struct DecayClass {
  bool log_class = false;  // (t log^2 t)^-1
  double a = 0.0;          // power when !log_class, 1 otherwise
  std::vector<double> end_exponents;  // A-value per end (infinity: no constraint, NaN: log type)
  std::string describe() const;
};

/// Long-time law of p(t, o, o) from the end models.  Throws UnsupportedEnd
/// for mask ends.
DecayClass decay_exponent_prediction(const ManifoldWithEnds& manifold);

struct VolumeLemmaSample {
  CellId x = kNoCell;
  double r = 0.0;
  double ratio = 0.0;  // V_h(x, r) / V(x, r)
};

struct VolumeLemmaReport {
  std::vector<VolumeLemmaSample> samples;
  double min_ratio = 0.0;         // over the largest sampled radius
  double worst_step_ratio = 0.0;  // min of ratio(2r) / ratio(r)
  bool passed = false;
};

/// Weighted-vs-plain ball volumes at sampled centres on a radius ladder
/// from r_min up to the truncation.  Passes when every ratio is positive and
/// never drops by more than half from one radius to the next.
VolumeLemmaReport volume_lemma_check(const Grid& grid, const ProfileField& h, const std::vector<CellId>& centers,
                                     double r_min);

}  // namespace hkends
