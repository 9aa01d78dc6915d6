#pragma once

// Scenario files: JSON descriptions of a manifold with ends, its grid and
// the run plan (series, envelope sweep, Monte Carlo check, thresholds).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hkends/geometry.hpp"
#include "hkends/grid.hpp"
#include "hkends/solver.hpp"

namespace hkends {

/// A probe point: the core centre ("o"), a reference point o_i ("o2"), or a
/// fixed or sqrt(t)-scaled point of a sheet.
struct ProbeSpec {
  enum class Kind : std::uint8_t { Core, Reference, Point };
  Kind kind = Kind::Core;
  int end = 0;  // Reference
  PlanePoint point;  // Point
  bool scale_sqrt_t = false;
  std::string label;

  /// Point for time t (scaled probes move with sqrt(t)).
  PlanePoint at(double t) const;
};

struct SeriesSpec {
  std::string name;
  ProbeSpec x, y;
  double t_min = 100.0;
  double t_max = 1e4;
  int samples = 17;
  DecayModel model = DecayModel::Power;
  bool normalize_h = false;  // fit p / (h(x) h(y))
  bool truncation_check = false;
  // Expectations; unset fields are not checked.
  std::optional<double> expect_a;
  bool expect_a_predicted = false;
  double a_tol = 0.15;
  bool expect_log_class = false;
  double b_target = 2.0;
  double b_tol = 0.5;
};

struct EnvelopeSweepSpec {
  std::vector<double> times;
  std::vector<ProbeSpec> points;
  double coverage = 0.95;
  double max_ratio = 1e3;
};

struct MonteCarloSpec {
  bool enabled = false;
  ProbeSpec x, y;
  double t = 2.0;
  std::size_t walkers = 20000;
  double sigmas = 3.0;
};

struct Thresholds {
  double symmetry = 1e-10;
  double semigroup = 1e-9;
  double truncation_drift = 0.02;
  double band_ratio = 4.0;
};

struct Scenario {
  std::string name;
  std::string description;

  std::vector<EndDescriptor> ends;
  double core_radius = 1.0;
  BoundaryCondition core_bc = BoundaryCondition::Neumann;

  double dx = 0.25;
  double r_max = 2000.0;
  Grading grading = Grading::Geometric;
  bool implicit = true;
  double epsilon = 0.02;
  std::uint64_t seed = 1;

  std::vector<SeriesSpec> series;
  EnvelopeSweepSpec envelope;
  MonteCarloSpec monte_carlo;
  Thresholds thresholds;

  /// Alternate configurations, each a JSON merge patch applied to this
  /// scenario's document (kept verbatim).
  std::vector<std::string> variant_patches;

  ManifoldWithEnds manifold() const;
  HeatOptions heat_options() const;
};

/// Throws ParseError for malformed JSON or invalid fields.
Scenario parse_scenario(const std::string& json_text);

/// Canonical JSON; parse_scenario(to_json(s)) reproduces s.
std::string to_json(const Scenario& s);

/// Bundled scenario by name, else a file path.  Throws NotFound.
Scenario load_scenario(const std::string& name_or_path);

/// The scenario followed by its variants.
std::vector<Scenario> expand_variants(const Scenario& s);

/// Names of the bundled scenarios.
std::vector<std::string> list_scenarios();

/// Raw JSON of a bundled scenario.  Throws NotFound.
const std::string& bundled_scenario_text(const std::string& name);

/// Human-readable description.  The string overload throws NotFound.
std::string describe(const Scenario& s);
std::string describe(const std::string& name);

/// Cell for a probe at time t: the nearest domain cell.  Throws OutsideDomain
/// when the point lies outside the continuous domain.
CellId resolve_probe(const Grid& grid, const ProbeSpec& probe, double t = 1.0);

/// Checks that every probe of the run plan lies in the domain at every time
/// it is used.  Throws OutsideDomain.
void validate_probes(const Scenario& s);

}  // namespace hkends
