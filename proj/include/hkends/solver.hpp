#pragma once

// Numerical ground truth: finite-volume heat flow, random walks, the
// discrete h-transform and decay-law fitting.
//
// The semi-discrete heat equation is M du/dt = -K u with M = diag(mu-measure)
// and K the symmetric conductance matrix (absorbing Dirichlet cells held at
// 0).  u is a density against mu, so p(t, x, y) = u_t(y) for u_0 = 1_x / m_x.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hkends/grid.hpp"
#include "hkends/profiles.hpp"

namespace hkends {

struct HeatField {
  std::vector<double> values;  // density per cell (0 off the domain)
  double t = 0.0;
  double total_mass = 0.0;
};

struct HeatOptions {
  bool implicit = false;
  /// Explicit step; 0 selects min(0.2 dx^2, 0.8 / max_rate).
  double dt = 0.0;
  /// Implicit mode: backward Euler with dt = epsilon * t_block, where the
  /// block length doubles with t (one factorisation per block).
  double epsilon = 0.02;
};

double total_mass(const Grid& grid, const std::vector<double>& values);

HeatField point_source(const Grid& grid, CellId x);

/// One explicit step.  Throws UnstableStep when dt > 1 / max_rate.
HeatField step_heat(const HeatField& field, const Grid& grid, double dt);

/// One backward-Euler step (unconditionally stable).
HeatField step_heat_implicit(const HeatField& field, const Grid& grid, double dt);

/// Earliest time whose kernel readings are trusted (25 dx^2).
double min_reliable_time(const Grid& grid);

/// Evolves fields under one fixed scheme; reuses factorisations.
class HeatEvolver {
 public:
  HeatEvolver(const Grid& grid, HeatOptions options = {});
  ~HeatEvolver();
  HeatEvolver(HeatEvolver&&) noexcept;
  HeatEvolver& operator=(HeatEvolver&&) noexcept;

  const Grid& grid() const noexcept { return *grid_; }
  double explicit_dt() const noexcept { return dt_; }

  /// Advances the field to exactly t_target.
  void advance(HeatField& field, double t_target);

  /// Evolves a point mass from x and returns snapshots at increasing times.
  std::vector<HeatField> snapshots(CellId x, const std::vector<double>& times);

 private:
  struct Impl;
  const Grid* grid_;
  HeatOptions options_;
  double dt_ = 0.0;
  std::unique_ptr<Impl> impl_;
};

/// p(t, x, y) at each requested time; times before min_reliable_time are
/// reported as NaN.  Throws UnstableStep for an explicit dt above the bound.
std::vector<double> heat_kernel_numeric(const Grid& grid, CellId x, CellId y, const std::vector<double>& times,
                                        HeatOptions options = {});

/// Same, for several probe cells from one evolution: result[k][probe].
std::vector<std::vector<double>> heat_kernel_probes(const Grid& grid, CellId x, const std::vector<CellId>& ys,
                                                    const std::vector<double>& times, HeatOptions options = {});

// ----- Monte Carlo ---------------------------------------------------------

struct MonteCarloResult {
  double estimate = 0.0;  // mean density over the neighbourhood of y
  double std_error = 0.0;
  double survival = 0.0;  // fraction of walkers alive at t
  double survival_stderr = 0.0;
  std::vector<CellId> neighborhood;
  double neighborhood_measure = 0.0;
  std::size_t walkers = 0;
};

/// Random walks from x.  On lattices: 4-direction steps of length dx,
/// time increment dx^2/4, moves into reflecting faces rejected, moves onto
/// Dirichlet cells killing.  Other grids use the exact continuous-time chain
/// with jump rates c_ij / m_i.  The density at y is averaged over domain
/// cells within `radius` of y (0 selects max(dx, sqrt(t)/4)).  Walker k uses
/// its own generator seeded from (seed, k), so results do not depend on
/// scheduling.
MonteCarloResult mc_heat_kernel(const Grid& grid, CellId x, CellId y, double t, std::size_t walkers,
                                std::uint64_t seed, double radius = 0.0);

/// Mean of the FD density over the same neighbourhood (for comparisons).
double neighborhood_average(const Grid& grid, const std::vector<double>& values, const std::vector<CellId>& cells);

// ----- h-transform ---------------------------------------------------------

struct HTransformResult {
  double p = 0.0;
  double p_h = 0.0;
  double deviation = 0.0;  // |p - h(x) h(y) p_h| / p
};

/// Builds the Doob-transformed generator (measure h^2 m, conductances
/// c_ij h_i h_j; Dirichlet neighbours become reflecting, truncation
/// neighbours stay absorbing), evolves both kernels with the same explicit
/// step and compares.  Throws ProfileTooSmall when h(x) or h(y) is below
/// 1e-6 max h or h is not positive on the domain.
HTransformResult h_transform_check(const Grid& grid, const ProfileField& h, double t, CellId x, CellId y);

// ----- decay fitting ---------------------------------------------------------

enum class DecayModel : std::uint8_t {
  Power,     // p = C t^-a
  PowerLog,  // p = C t^-a (log t)^-b, both free
  LogClass,  // p = C t^-1 (log t)^-b
  Auto,      // Power vs. C t^-a (log t)^-2 on the last decade
};

const char* to_string(DecayModel m) noexcept;

struct DecayFit {
  DecayModel model = DecayModel::Power;
  double a = 0.0;
  double b = 0.0;  // log power
  double log_c = 0.0;
  double residual = 0.0;  // rms of log-residuals over the window
  double t_min = 0.0, t_max = 0.0;
  std::size_t samples = 0;
  // Filled by Auto: last-decade rms residuals of the two candidates.
  double power_residual = 0.0;
  double log_residual = 0.0;
};

/// Least squares in log coordinates.  Non-finite or non-positive samples are
/// ignored.  Throws InsufficientRange for fewer than 10 samples or less than
/// 1.5 decades (log models also need t > 1).
DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& p, DecayModel model = DecayModel::Power);

}  // namespace hkends
