#pragma once

// Scenario pipeline: profile -> volumes -> envelope -> solve -> fit ->
// compare, with CSV artifacts and a text summary.

#include <iosfwd>
#include <string>
#include <vector>

#include "hkends/error.hpp"
#include "hkends/estimates.hpp"
#include "hkends/profiles.hpp"
#include "hkends/scenario.hpp"
#include "hkends/solver.hpp"

namespace hkends {

/// Error raised by run_pipeline: the failing stage plus the original cause.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause);
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct PipelineOptions {
  std::string out_dir;  // empty: no files
  bool envelope = true;  // envelope shapes at the sweep triples
  bool solve = true;     // FD series, sweep kernels, Monte Carlo, invariants
  bool fit = true;
  bool compare = true;   // calibration and pass/fail
};

struct CriterionResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  std::string detail;
};

struct SeriesResult {
  SeriesSpec spec;
  std::vector<double> t, p, stderr_;  // p divided by h(x)h(y) when normalize_h
  bool fitted = false;
  DecayFit fit;       // scenario model
  DecayFit auto_fit;  // power vs log law
  double truncation_drift = -1.0;  // < 0: not measured
};

struct EnvelopeSample {
  double t = 0.0;
  std::size_t x = 0, y = 0;  // indices into the sweep points
  EstimateEnvelope shape;    // with unit constants
  double p = 0.0;
  double lower = 0.0, upper = 0.0;  // calibrated
};

struct SandwichResult {
  EnvelopeConstants constants;
  std::vector<EnvelopeSample> samples;
  double coverage = 0.0;
  double max_ratio = 0.0;
  bool calibrated = false;
};

struct MonteCarloCheck {
  bool ran = false;
  double fd = 0.0;
  MonteCarloResult mc;
  double sigmas = 0.0;  // |fd - mc| / stderr
};

struct InvariantReport {
  bool ran = false;
  double mass_increase = 0.0;      // largest step-to-step mass gain
  double min_value = 0.0;          // most negative density seen
  double symmetry = 0.0;           // relative
  double semigroup = 0.0;          // relative
  double H_min = 0.0, H_max = 0.0;
  bool volume_monotone = false;
  double v0_min_error = 0.0;       // |V0 - min_i V_i| / V0
  bool green_monotone = false;
  std::size_t green_checked = 0;
  VolumeLemmaReport lemma;
};

struct VerificationReport {
  std::string scenario;
  // Provenance.
  double dx = 0.0, r_max = 0.0;
  std::string grading;
  bool implicit = false;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::size_t cells = 0;
  Thresholds thresholds;

  bool prediction_available = false;
  DecayClass predicted;
  std::string prediction_note;

  ProfileReport profile;
  std::vector<SeriesResult> series;
  SandwichResult sandwich;
  MonteCarloCheck monte_carlo;
  InvariantReport invariants;
  std::vector<CriterionResult> criteria;

  bool passed() const;
  std::string summary() const;
};

/// Runs the requested stages.  Any stage error is rethrown as StageError.
VerificationReport run_pipeline(const Scenario& scenario, const PipelineOptions& options = {});

/// Envelope constants from anchor samples: for each Gaussian constant on a
/// log grid, the narrowest band [C_low, C_up] of p / shape holding the
/// requested fraction of anchors; the narrowest over the grid wins.  Fills
/// lower/upper, coverage and max_ratio over all samples.
void calibrate_sandwich(SandwichResult& sandwich, const std::vector<std::size_t>& anchors, double coverage = 1.0);

void write_series_csv(std::ostream& out, const SeriesResult& s);
void write_envelope_csv(std::ostream& out, const SandwichResult& s, const std::vector<std::string>& labels);

}  // namespace hkends
