#include "hkends/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

#include "hkends/distance.hpp"

namespace hkends {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> log_times(double lo, double hi, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) t[static_cast<std::size_t>(k)] = lo * std::pow(hi / lo, static_cast<double>(k) / (n - 1));
  t.back() = hi;
  return t;
}

template <class F>
void stage(const char* name, F&& body) {
  try {
    body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  } catch (const std::exception& e) {
    throw StageError(name, Error(ErrorKind::InvalidArgument, e.what()));
  }
}

double shape_with(const EstimateEnvelope& e, double t, double c) {
  auto gauss = [&](double d) { return d < kInfinity ? std::exp(-c * d * d / t) : 0.0; };
  return e.same_end_gaussian * gauss(e.d_empty) +
         (e.cross_term_00 + e.cross_term_x + e.cross_term_y) * gauss(e.d_plus);
}

// p(t, x, y) for one series on one grid.
void solve_series(const Grid& grid, const ProfileField& h, const SeriesSpec& spec, const HeatOptions& opts,
                  std::vector<double>& t, std::vector<double>& p) {
  t = log_times(spec.t_min, spec.t_max, spec.samples);
  p.assign(t.size(), kNaN);
  auto normalise = [&](double v, CellId x, CellId y) { return spec.normalize_h ? v / (h[x] * h[y]) : v; };
  if (!spec.x.scale_sqrt_t && !spec.y.scale_sqrt_t) {
    const CellId x = resolve_probe(grid, spec.x), y = resolve_probe(grid, spec.y);
    const auto raw = heat_kernel_numeric(grid, x, y, t, opts);
    for (std::size_t k = 0; k < t.size(); ++k) p[k] = normalise(raw[k], x, y);
    return;
  }
  for (std::size_t k = 0; k < t.size(); ++k) {
    const CellId x = resolve_probe(grid, spec.x, t[k]), y = resolve_probe(grid, spec.y, t[k]);
    p[k] = normalise(heat_kernel_numeric(grid, x, y, {t[k]}, opts).front(), x, y);
  }
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

// Drops the "<Kind>: " prefix the cause already carries.
std::string bare_message(const Error& e) {
  const std::string what = e.what();
  const std::string prefix = std::string(to_string(e.kind())) + ": ";
  return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

}  // namespace

StageError::StageError(std::string stage, const Error& cause)
    : Error(cause.kind(), "stage '" + stage + "': " + bare_message(cause)), stage_(std::move(stage)) {}

bool VerificationReport::passed() const {
  return !criteria.empty() &&
         std::all_of(criteria.begin(), criteria.end(), [](const CriterionResult& c) { return c.passed; });
}

void calibrate_sandwich(SandwichResult& sw, const std::vector<std::size_t>& anchors, double coverage) {
  std::vector<std::size_t> use;
  for (std::size_t i : anchors) {
    if (i < sw.samples.size() && sw.samples[i].p > 0.0 && std::isfinite(sw.samples[i].p)) use.push_back(i);
  }
  if (use.empty()) throw Error(ErrorKind::InsufficientRange, "no usable anchor samples for envelope calibration");
  const auto n = use.size();
  const auto keep = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(coverage * static_cast<double>(n) - 1e-9)),
                                            1, n);
  double best_c = 0.0, best_width = kInfinity, best_lo = 0.0, best_hi = 0.0;
  std::vector<double> r(n);
  for (int k = 0; k <= 60; ++k) {
    const double c = std::pow(10.0, -3.0 + 3.0 * k / 60.0);
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = sw.samples[use[i]];
      const double shape = shape_with(s.shape, s.t, c);
      if (!(shape > 0.0)) {
        ok = false;
        break;
      }
      r[i] = std::log(s.p / shape);
    }
    if (!ok) continue;
    std::sort(r.begin(), r.end());
    for (std::size_t j = 0; j + keep <= n; ++j) {
      const double w = r[j + keep - 1] - r[j];
      if (w < best_width) {
        best_width = w;
        best_c = c;
        best_lo = r[j];
        best_hi = r[j + keep - 1];
      }
    }
  }
  if (!std::isfinite(best_width)) throw Error(ErrorKind::Inconclusive, "envelope shape vanishes at an anchor");
  sw.constants = {std::exp(best_lo), best_c, std::exp(best_hi), best_c};
  std::size_t inside = 0, counted = 0;
  sw.max_ratio = 0.0;
  for (auto& s : sw.samples) {
    const double shape = shape_with(s.shape, s.t, best_c);
    s.lower = sw.constants.C_low * shape;
    s.upper = sw.constants.C_up * shape;
    if (!std::isfinite(s.p)) continue;
    ++counted;
    const double slack = 1e-12 * s.upper;
    if (s.p >= s.lower - slack && s.p <= s.upper + slack) ++inside;
    if (s.lower > 0.0) sw.max_ratio = std::max(sw.max_ratio, s.upper / s.lower);
  }
  sw.coverage = counted ? static_cast<double>(inside) / static_cast<double>(counted) : 0.0;
  sw.calibrated = true;
}

VerificationReport run_pipeline(const Scenario& sc, const PipelineOptions& opt) {
  VerificationReport rep;
  rep.scenario = sc.name;
  rep.dx = sc.dx;
  rep.r_max = sc.r_max;
  rep.grading = sc.grading == Grading::Geometric ? "geometric" : "uniform";
  rep.implicit = sc.implicit;
  rep.epsilon = sc.epsilon;
  rep.seed = sc.seed;
  rep.thresholds = sc.thresholds;
  const HeatOptions heat = sc.heat_options();

  std::optional<ManifoldWithEnds> manifold;
  std::optional<Grid> grid;
  ProfileField h;
  VolumeTable volumes;
  std::vector<CellId> sweep_cells;
  std::vector<EnvelopePoint> sweep_points;
  std::vector<std::string> sweep_labels;

  const bool write = !opt.out_dir.empty();
  auto open = [&](const std::string& file) {
    std::ofstream f(std::filesystem::path(opt.out_dir) / file);
    if (!f) throw Error(ErrorKind::InvalidArgument, "cannot write " + file + " in " + opt.out_dir);
    f << std::setprecision(17);
    return f;
  };
  if (write) {
    stage("output", [&] { std::filesystem::create_directories(opt.out_dir); });
  }

  stage("geometry", [&] {
    validate_probes(sc);
    for (const auto& p : sc.envelope.points) {
      if (p.scale_sqrt_t) throw Error(ErrorKind::InvalidArgument, "envelope sweep points must be fixed");
    }
    manifold = sc.manifold();
    grid = rasterize(*manifold, sc.dx, sc.r_max, sc.grading);
    rep.cells = grid->size();
    try {
      rep.predicted = decay_exponent_prediction(*manifold);
      rep.prediction_available = true;
    } catch (const Error& e) {
      rep.prediction_note = e.what();
    }
  });
  const Grid& g = *grid;

  stage("profile", [&] {
    if (manifold->has_dirichlet()) {
      h = solve_profile(g);
    } else {
      h.values.assign(g.size(), 1.0);
      h.provenance = Provenance::ClosedForm;
      h.normalization_cell = g.core_center();
    }
    rep.profile = verify_profile(h, g);
    if (write) {
      auto f = open("profile.csv");
      write_profile_csv(f, g, h);
    }
  });

  stage("volumes", [&] {
    volumes = VolumeTable(g, h);
    for (const auto& p : sc.envelope.points) {
      sweep_cells.push_back(resolve_probe(g, p));
      sweep_points.push_back(envelope_point(g, h, sweep_cells.back()));
      sweep_labels.push_back(p.label);
    }
  });

  if (opt.envelope) {
    stage("envelope", [&] {
      for (double t : sc.envelope.times) {
        for (std::size_t i = 0; i < sweep_points.size(); ++i) {
          for (std::size_t j = i; j < sweep_points.size(); ++j) {
            EnvelopeSample s;
            s.t = t;
            s.x = i;
            s.y = j;
            s.shape = heat_kernel_envelope(volumes, sweep_points[i], sweep_points[j], t);
            s.p = kNaN;
            s.lower = s.shape.lower;
            s.upper = s.shape.upper;
            rep.sandwich.samples.push_back(s);
          }
        }
      }
    });
  }

  if (opt.solve) {
    stage("solve", [&] {
      for (const auto& spec : sc.series) {
        SeriesResult r;
        r.spec = spec;
        solve_series(g, h, spec, heat, r.t, r.p);
        r.stderr_.assign(r.t.size(), 0.0);
        if (spec.truncation_check) {
          const Grid wide = rasterize(*manifold, sc.dx, 2.0 * sc.r_max, sc.grading);
          const ProfileField hw = spec.normalize_h ? solve_profile(wide) : ProfileField{};
          std::vector<double> t2, p2;
          solve_series(wide, hw, spec, heat, t2, p2);
          r.truncation_drift = 0.0;
          for (std::size_t k = 0; k < r.p.size(); ++k) {
            if (std::isfinite(r.p[k]) && r.p[k] > 0.0) {
              r.truncation_drift = std::max(r.truncation_drift, std::abs(p2[k] - r.p[k]) / r.p[k]);
            }
          }
        }
        rep.series.push_back(std::move(r));
      }

      // Kernel values for the envelope sweep: one evolution per source.
      if (opt.envelope && !sweep_cells.empty() && !sc.envelope.times.empty()) {
        std::vector<double> times = sc.envelope.times;
        std::sort(times.begin(), times.end());
        for (std::size_t i = 0; i < sweep_cells.size(); ++i) {
          const auto rows = heat_kernel_probes(g, sweep_cells[i], sweep_cells, times, heat);
          for (auto& s : rep.sandwich.samples) {
            if (s.x != i) continue;
            const auto k = static_cast<std::size_t>(std::find(times.begin(), times.end(), s.t) - times.begin());
            s.p = rows[k][s.y];
          }
        }
      }

      if (sc.monte_carlo.enabled) {
        const auto& spec = sc.monte_carlo;
        const CellId x = resolve_probe(g, spec.x, spec.t), y = resolve_probe(g, spec.y, spec.t);
        auto& mc = rep.monte_carlo;
        mc.mc = mc_heat_kernel(g, x, y, spec.t, spec.walkers, sc.seed);
        HeatEvolver ev(g);
        HeatField f = point_source(g, x);
        ev.advance(f, spec.t);
        mc.fd = neighborhood_average(g, f.values, mc.mc.neighborhood);
        mc.sigmas = mc.mc.std_error > 0.0 ? std::abs(mc.fd - mc.mc.estimate) / mc.mc.std_error : kInfinity;
        mc.ran = true;
      }

      // Invariants on the scenario grid.
      auto& inv = rep.invariants;
      const CellId a = g.core_center();
      CellId b = g.reference_cell(1);
      for (CellId c : sweep_cells) {
        if (c != a) {
          b = c;
          break;
        }
      }
      HeatEvolver ev(g);
      const double dt = ev.explicit_dt();
      const double t1 = 1.0, s1 = 1.0;
      HeatField fa = point_source(g, a);
      double mass = fa.total_mass;
      inv.min_value = 0.0;
      while (fa.t < t1 - 1e-12) {
        ev.advance(fa, std::min(t1, fa.t + dt));
        inv.mass_increase = std::max(inv.mass_increase, fa.total_mass - mass);
        mass = fa.total_mass;
        for (double v : fa.values) inv.min_value = std::min(inv.min_value, v);
      }
      HeatField fb = point_source(g, b);
      ev.advance(fb, s1);
      double ck = 0.0;
      for (CellId id : g.domain_cells()) {
        const auto k = static_cast<std::size_t>(id);
        ck += g.measure(id) * fa.values[k] * fb.values[k];
      }
      const double p_ab_t = fa.values[static_cast<std::size_t>(b)];
      const double p_ba_t = fb.values[static_cast<std::size_t>(a)];
      inv.symmetry = std::abs(p_ab_t - p_ba_t) / std::max(std::abs(p_ab_t), std::numeric_limits<double>::min());
      HeatField direct = fa;
      ev.advance(direct, t1 + s1);
      const double p_direct = direct.values[static_cast<std::size_t>(b)];
      inv.semigroup = std::abs(ck - p_direct) / std::max(std::abs(p_direct), std::numeric_limits<double>::min());

      inv.H_min = kInfinity;
      inv.H_max = -kInfinity;
      for (const auto& pt : sweep_points) {
        for (double t : sc.envelope.times) {
          if (t <= 1.0) continue;
          const double H = H_function_at(volumes, pt.end, pt.norm, t);
          inv.H_min = std::min(inv.H_min, H);
          inv.H_max = std::max(inv.H_max, H);
        }
      }

      inv.volume_monotone = true;
      for (int e = 0; e <= volumes.num_ends(); ++e) {
        double prev = 0.0;
        for (double r = 0.5 * sc.dx; r <= 4.0 * volumes.max_radius(); r *= 1.5) {
          const double v = volumes.volume(e, r);
          if (v < prev) inv.volume_monotone = false;
          prev = v;
          if (e == 0) {
            double lo = kInfinity;
            for (int i = 1; i <= volumes.num_ends(); ++i) lo = std::min(lo, volumes.volume(i, r));
            inv.v0_min_error = std::max(inv.v0_min_error, std::abs(v - lo) / std::max(lo, 1e-300));
          }
        }
      }

      inv.green_monotone = true;
      for (int e = 1; e <= g.num_ends(); ++e) {
        CellId y = g.reference_cell(e);
        for (CellId c : sweep_cells) {
          if (g.end_id(c) == e) {
            y = c;
            break;
          }
        }
        const auto whole = green_numeric(g, y, 0);
        const auto part = green_numeric(g, y, e);
        for (CellId id : g.domain_cells()) {
          if (g.end_id(id) != e) continue;
          const auto k = static_cast<std::size_t>(id);
          ++inv.green_checked;
          if (part[k] > whole[k] * (1.0 + 1e-9) + 1e-300) inv.green_monotone = false;
        }
      }

      std::vector<CellId> centers;
      for (CellId c : sweep_cells) {
        if (g.end_id(c) > 0) centers.push_back(c);
      }
      if (centers.empty()) {
        for (int e = 1; e <= g.num_ends(); ++e) centers.push_back(g.reference_cell(e));
      }
      inv.lemma = volume_lemma_check(g, h, centers, sc.core_radius);
      inv.ran = true;

      if (write) {
        for (const auto& r : rep.series) {
          auto f = open("series_" + r.spec.name + ".csv");
          write_series_csv(f, r);
        }
      }
    });
  }

  if (opt.fit && opt.solve) {
    stage("fit", [&] {
      for (auto& r : rep.series) {
        r.fit = fit_decay(r.t, r.p, r.spec.model);
        r.auto_fit = fit_decay(r.t, r.p, DecayModel::Auto);
        r.fitted = true;
      }
    });
  }

  if (opt.compare) {
    stage("compare", [&] {
      auto add = [&](std::string name, bool ok, double value, std::string detail) {
        rep.criteria.push_back({std::move(name), ok, value, std::move(detail)});
      };
      const auto& pr = rep.profile;
      add("profile.dirichlet_zero", pr.boundary_violation == 0.0, pr.boundary_violation, "max |h| on Dirichlet cells");
      add("profile.positive", !pr.nonpositive_interior, pr.nonpositive_interior ? 1.0 : 0.0, "h > 0 in the domain");
      double band = 0.0;
      for (const auto& b : pr.bands) band = std::max(band, b.ratio());
      add("profile.band_ratio", band <= sc.thresholds.band_ratio, band,
          "max hi/lo against the end profiles, limit " + fmt(sc.thresholds.band_ratio));

      for (const auto& r : rep.series) {
        if (!r.fitted) continue;
        const auto& s = r.spec;
        if (s.expect_a || s.expect_a_predicted) {
          double target = kNaN;
          std::string why;
          if (s.expect_a) {
            target = *s.expect_a;
          } else if (rep.prediction_available && !rep.predicted.log_class) {
            target = rep.predicted.a;
          } else {
            why = "no power-law prediction";
          }
          const bool ok = std::isfinite(target) && std::abs(r.fit.a - target) <= s.a_tol;
          add(s.name + ".a", ok, r.fit.a,
              why.empty() ? "fitted " + fmt(r.fit.a) + " vs " + fmt(target) + " +- " + fmt(s.a_tol) : why);
        }
        if (s.expect_log_class) {
          const DecayFit lc = s.model == DecayModel::LogClass ? r.fit : fit_decay(r.t, r.p, DecayModel::LogClass);
          const bool prefers = r.auto_fit.log_residual < r.auto_fit.power_residual;
          add(s.name + ".log_preferred", prefers, r.auto_fit.log_residual,
              "last-decade rms: log law " + fmt(r.auto_fit.log_residual, 3) + ", power " +
                  fmt(r.auto_fit.power_residual, 3));
          add(s.name + ".b", std::abs(lc.b - s.b_target) <= s.b_tol, lc.b,
              "fitted " + fmt(lc.b) + " vs " + fmt(s.b_target) + " +- " + fmt(s.b_tol));
        }
        if (r.truncation_drift >= 0.0) {
          add(s.name + ".truncation", r.truncation_drift < sc.thresholds.truncation_drift, r.truncation_drift,
              "max relative change with rmax doubled");
        }
      }

      auto& sw = rep.sandwich;
      if (opt.envelope && opt.solve && !sw.samples.empty()) {
        std::vector<std::size_t> anchors(sw.samples.size());
        for (std::size_t i = 0; i < anchors.size(); ++i) anchors[i] = i;
        calibrate_sandwich(sw, anchors, sc.envelope.coverage);
        add("envelope.sandwich", sw.coverage >= sc.envelope.coverage && sw.max_ratio <= sc.envelope.max_ratio,
            sw.coverage,
            "coverage " + fmt(sw.coverage) + " (need " + fmt(sc.envelope.coverage) + "), upper/lower " +
                fmt(sw.max_ratio) + " (limit " + fmt(sc.envelope.max_ratio) + ")");
      }
      if (rep.monte_carlo.ran) {
        const auto& mc = rep.monte_carlo;
        add("monte_carlo", mc.sigmas <= sc.monte_carlo.sigmas, mc.sigmas,
            "FD " + fmt(mc.fd, 6) + " vs MC " + fmt(mc.mc.estimate, 6) + " +- " + fmt(mc.mc.std_error, 3));
      }
      const auto& inv = rep.invariants;
      if (inv.ran) {
        add("invariants.mass", inv.mass_increase <= 1e-13, inv.mass_increase, "largest mass gain per step");
        add("invariants.positivity", inv.min_value >= 0.0, inv.min_value, "smallest density");
        add("invariants.symmetry", inv.symmetry <= sc.thresholds.symmetry, inv.symmetry, "relative");
        add("invariants.semigroup", inv.semigroup <= sc.thresholds.semigroup, inv.semigroup, "relative");
        add("invariants.H_range", inv.H_min > 0.0 && inv.H_max <= 1.0, inv.H_min,
            "H in [" + fmt(inv.H_min) + ", " + fmt(inv.H_max) + "]");
        add("invariants.volume_monotone", inv.volume_monotone, inv.volume_monotone ? 1.0 : 0.0, "V_i(r) nondecreasing");
        add("invariants.V0_min", inv.v0_min_error <= 1e-12, inv.v0_min_error, "V0 = min_i V_i");
        add("invariants.green_monotone", inv.green_monotone, static_cast<double>(inv.green_checked),
            "G_end <= G_M on end cells");
        add("invariants.volume_lemma", inv.lemma.passed, inv.lemma.worst_step_ratio,
            "weighted/plain ball ratio, worst step " + fmt(inv.lemma.worst_step_ratio));
      }
    });
  }

  if (write) {
    stage("report", [&] {
      if (!rep.sandwich.samples.empty()) {
        auto f = open("envelope.csv");
        write_envelope_csv(f, rep.sandwich, sweep_labels);
      }
      auto f = open("summary.txt");
      f << rep.summary();
    });
  }
  return rep;
}

void write_series_csv(std::ostream& out, const SeriesResult& s) {
  out << "t,p,stderr\n";
  for (std::size_t k = 0; k < s.t.size(); ++k) out << s.t[k] << "," << s.p[k] << "," << s.stderr_[k] << "\n";
}

void write_envelope_csv(std::ostream& out, const SandwichResult& s, const std::vector<std::string>& labels) {
  out << "t,x,y,lower,upper,same_end,cross_00,cross_x,cross_y,d_empty,d_plus,p\n";
  auto label = [&](std::size_t i) {
    const std::string l = i < labels.size() ? labels[i] : std::to_string(i);
    return "\"" + l + "\"";
  };
  for (const auto& e : s.samples) {
    out << e.t << "," << label(e.x) << "," << label(e.y) << "," << e.lower << "," << e.upper << ","
        << e.shape.same_end_gaussian << "," << e.shape.cross_term_00 << "," << e.shape.cross_term_x << ","
        << e.shape.cross_term_y << "," << e.shape.d_empty << "," << e.shape.d_plus << "," << e.p << "\n";
  }
}

std::string VerificationReport::summary() const {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "scenario " << scenario << "\n";
  os << "grid: dx " << dx << ", rmax " << r_max << ", " << grading << " grading, " << cells << " cells\n";
  os << "stepping: " << (implicit ? "implicit, epsilon " + fmt(epsilon) : std::string("explicit")) << "\n";
  os << "seed: " << seed << "\n";
  os << "thresholds: symmetry " << thresholds.symmetry << ", semigroup " << thresholds.semigroup
     << ", truncation drift " << thresholds.truncation_drift << ", band ratio " << thresholds.band_ratio << "\n";
  os << "prediction: " << (prediction_available ? predicted.describe() : "unavailable (" + prediction_note + ")")
     << "\n";
  os << "profile: max residual " << profile.max_interior_residual << " (relative " << profile.max_relative_residual
     << "), Dirichlet violation " << profile.boundary_violation << "\n";
  for (const auto& b : profile.bands) {
    os << "  end " << b.end << " band [" << b.lo << ", " << b.hi << "], ratio " << b.ratio() << "\n";
  }
  for (const auto& s : series) {
    os << "series " << s.spec.name << ": " << s.t.size() << " samples in [" << s.spec.t_min << ", " << s.spec.t_max
       << "]";
    if (s.fitted) {
      os << ", " << to_string(s.fit.model) << " fit a " << s.fit.a << " b " << s.fit.b << " rms " << s.fit.residual
         << "; last-decade rms power " << s.auto_fit.power_residual << " log " << s.auto_fit.log_residual;
    }
    if (s.truncation_drift >= 0.0) os << "; drift " << s.truncation_drift;
    os << "\n";
  }
  if (sandwich.calibrated) {
    const auto& k = sandwich.constants;
    os << "envelope: " << sandwich.samples.size() << " samples, C_low " << k.C_low << ", C_up " << k.C_up << ", c "
       << k.c_low << ", coverage " << sandwich.coverage << ", upper/lower " << sandwich.max_ratio << "\n";
  }
  if (monte_carlo.ran) {
    os << "monte carlo: " << monte_carlo.mc.walkers << " walkers, FD " << monte_carlo.fd << ", MC "
       << monte_carlo.mc.estimate << " +- " << monte_carlo.mc.std_error << " (" << monte_carlo.sigmas << " sigma)\n";
  }
  for (const auto& c : criteria) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  }
  if (!criteria.empty()) os << (passed() ? "overall: PASS" : "overall: FAIL") << "\n";
  return os.str();
}

}  // namespace hkends
