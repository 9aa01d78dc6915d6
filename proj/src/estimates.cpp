#include "hkends/estimates.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>

#include "hkends/distance.hpp"
#include "hkends/error.hpp"

namespace hkends {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_dirichlet(BoundaryCondition bc) { return bc == BoundaryCondition::Dirichlet; }

// Exponent beta of V_{i,h}(r) ~ r^beta for ends whose profile is a power;
// NaN when the growth has log factors or is exponential.
double closed_form_growth(const EndDescriptor& e) {
  if (const auto* c = std::get_if<ConeEnd>(&e.shape)) {
    const bool d1 = is_dirichlet(c->edge1), d2 = is_dirichlet(c->edge2);
    if (d1 && d2) return 2.0 + 2.0 * kPi / c->aperture;
    if (d1 || d2) return 2.0 + kPi / c->aperture;
    return kNaN;
  }
  if (const auto* s = std::get_if<StripEnd>(&e.shape)) {
    return (is_dirichlet(s->side1) || is_dirichlet(s->side2)) ? kNaN : 3.0;
  }
  if (const auto* p = std::get_if<ParabolaExteriorEnd>(&e.shape)) return is_dirichlet(p->bc) ? 3.0 : kNaN;
  return kNaN;
}

double log_slope(const std::function<double(double)>& f, double r0, double r1) {
  const double a = f(r0), b = f(r1);
  if (!(a > 0.0) || !(b > 0.0) || !(r1 > r0)) return 2.0;
  return std::log(b / a) / std::log(r1 / r0);
}

// Simpson rule for int_a^b g(u) du with n (even) panels.
template <class G>
double simpson(const G& g, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = g(a) + g(b);
  for (int k = 1; k < n; ++k) s += g(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// int ds / V(sqrt s) over [lo, hi] on a geometric midpoint grid of ratio q.
double midpoint_geometric(const std::function<double(double)>& vol, double lo, double hi, double q) {
  double sum = 0.0, a = lo;
  while (a < hi) {
    const double b = std::min(a * q, hi);
    const double m = 0.5 * (a + b);
    sum += (b - a) / vol(std::sqrt(m));
    a = b;
  }
  return sum;
}

}  // namespace

// ----- ball volumes ---------------------------------------------------------

BallVolume::BallVolume(const Grid& grid, const ProfileField& h, CellId center, int restrict_end) : center_(center) {
  if (h.values.size() != grid.size()) throw Error(ErrorKind::InvalidArgument, "profile does not match the grid");
  const bool restricted = restrict_end > 0;
  const auto d = distances_from(grid, center, restricted);
  std::vector<std::size_t> order;
  reach_ = kInfinity;
  double far_seen = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto id = static_cast<CellId>(k);
    if (!(d[k] < kInfinity)) continue;
    if (grid.cell(id).far_ring) reach_ = std::min(reach_, d[k]);
    if (!grid.in_domain(id)) continue;
    if (restricted && grid.end_id(id) != restrict_end) continue;
    order.push_back(k);
    far_seen = std::max(far_seen, d[k]);
  }
  if (!(reach_ < kInfinity)) reach_ = far_seen;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); });
  center_radius_ = std::sqrt(grid.cell(center).area / std::numbers::pi);
  double w = 0.0, m = 0.0;
  for (std::size_t k : order) {
    const auto id = static_cast<CellId>(k);
    w += h[id] * h[id] * grid.measure(id);
    m += grid.measure(id);
    dist_.push_back(d[k]);
    cum_w_.push_back(w);
    cum_m_.push_back(m);
  }
}

double BallVolume::lookup(const std::vector<double>& cum, double r) const {
  if (dist_.empty() || r < 0.0) return 0.0;
  // Below the first neighbour the centre cell is shared out as a disk.
  if (dist_.size() > 1 && r < dist_[1]) return cum[0] * std::min(1.0, r * r / (center_radius_ * center_radius_));
  const auto it = std::upper_bound(dist_.begin(), dist_.end(), r);
  return cum[static_cast<std::size_t>(it - dist_.begin() - 1)];
}

double BallVolume::weighted(double r) const { return lookup(cum_w_, r); }

double BallVolume::plain(double r) const { return lookup(cum_m_, r); }

VolumeTable::VolumeTable(const Grid& grid, const ProfileField& h) {
  max_radius_ = kInfinity;
  for (int i = 1; i <= grid.num_ends(); ++i) {
    ends_.emplace_back(grid, h, grid.reference_cell(i), i);
    max_radius_ = std::min(max_radius_, ends_.back().reach());
  }
  if (grid.truncation_radius() > 0.0) {
    max_radius_ = std::min(max_radius_, grid.truncation_radius() - grid.core_radius());
  }
  const ManifoldWithEnds* m = grid.manifold();
  for (int i = 1; i <= grid.num_ends(); ++i) {
    double beta = (m != nullptr && !m->weighted()) ? closed_form_growth(m->end(i)) : kNaN;
    if (std::isnan(beta)) {
      const auto& ball = ends_[static_cast<std::size_t>(i - 1)];
      beta = log_slope([&](double r) { return ball.weighted(r); }, 0.5 * max_radius_, max_radius_);
    }
    growth_.push_back(beta);
  }
}

double VolumeTable::growth_exponent(int end) const { return growth_.at(static_cast<std::size_t>(end - 1)); }

double VolumeTable::volume(int end, double r) const {
  if (end == 0) {
    double best = kInfinity;
    for (int i = 1; i <= num_ends(); ++i) best = std::min(best, volume(i, r));
    return best;
  }
  const BallVolume& b = ball(end);
  if (r <= max_radius_) return b.weighted(r);
  return b.weighted(max_radius_) * std::pow(r / max_radius_, growth_exponent(end));
}

double VolumeTable::plain_volume(int end, double r) const {
  if (end == 0) {
    double best = kInfinity;
    for (int i = 1; i <= num_ends(); ++i) best = std::min(best, plain_volume(i, r));
    return best;
  }
  const BallVolume& b = ball(end);
  if (r <= max_radius_) return b.plain(r);
  const double beta = log_slope([&](double s) { return b.plain(s); }, 0.5 * max_radius_, max_radius_);
  return b.plain(max_radius_) * std::pow(r / max_radius_, beta);
}

double weighted_volume(const Grid& grid, const ProfileField& h, int end, double r) {
  if (end < 1 || end > grid.num_ends()) throw Error(ErrorKind::InvalidArgument, "end index out of range");
  if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be positive");
  const BallVolume b(grid, h, grid.reference_cell(end), end);
  const double limit = grid.truncation_radius() > 0.0 ? grid.truncation_radius() - grid.core_radius() : b.reach();
  if (r > std::min(limit, b.reach()) * (1.0 + 1e-12)) {
    throw Error(ErrorKind::RadiusExceedsTruncation, "radius " + std::to_string(r) + " reaches the truncation");
  }
  return b.weighted(r);
}

double weighted_ball_volume(const Grid& grid, const ProfileField& h, CellId x, double r) {
  if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be positive");
  if (!grid.in_domain(x)) throw Error(ErrorKind::OutsideDomain, "ball centre must be a domain cell");
  const int end = grid.cell_class(x) == CellClass::Core ? -1 : grid.end_id(x);
  const BallVolume b(grid, h, x, end);
  if (r > b.reach() * (1.0 + 1e-12)) {
    throw Error(ErrorKind::RadiusExceedsTruncation, "radius " + std::to_string(r) + " reaches the truncation");
  }
  return b.weighted(r);
}

// ----- H ----------------------------------------------------------------------

double H_function_at(const VolumeTable& volumes, int end, double norm, double t) {
  if (!(t > 0.0)) throw Error(ErrorKind::InvalidArgument, "t must be positive");
  if (end <= 0) return 1.0;
  auto vol = [&](double r) { return std::max(volumes.volume(end, r), std::numeric_limits<double>::min()); };
  double value = norm * norm / vol(norm);
  const double lo = norm * norm;
  if (value < 1.0 && t > lo) {
    // Midpoint sums at ratios q and sqrt(q), Richardson-combined.
    const double coarse = midpoint_geometric(vol, lo, t, 1.25);
    const double fine = midpoint_geometric(vol, lo, t, std::sqrt(1.25));
    value += fine + (fine - coarse) / 3.0;
  }
  return std::clamp(value, std::numeric_limits<double>::min(), 1.0);
}

double H_function(const Grid& grid, const VolumeTable& volumes, CellId x, double t) {
  if (!grid.in_domain(x)) throw Error(ErrorKind::OutsideDomain, "H is defined on domain cells");
  if (grid.cell_class(x) == CellClass::Core) return 1.0;
  return H_function_at(volumes, grid.end_id(x), norm_from_core(grid, x), t);
}

// ----- envelopes ---------------------------------------------------------------

EnvelopePoint envelope_point(const Grid& grid, const ProfileField& h, CellId x) {
  if (x < 0 || static_cast<std::size_t>(x) >= grid.size() || !grid.in_domain(x)) {
    throw Error(ErrorKind::OutsideDomain, "envelope points must be domain cells");
  }
  EnvelopePoint p;
  p.cell = x;
  const bool core = grid.cell_class(x) == CellClass::Core;
  p.end = core ? 0 : grid.end_id(x);
  p.h = h[x];
  p.d_all = distances_from(grid, x);
  p.d_avoid = distances_from(grid, x, true);
  p.d_plus = distances_plus_from(grid, x);
  p.norm = grid.core_radius();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid.cell_class(static_cast<CellId>(k)) == CellClass::Core && p.d_all[k] < kInfinity) {
      p.norm = std::max(p.norm, p.d_all[k]);
    }
  }
  p.ball = BallVolume(grid, h, x, core ? -1 : p.end);
  p.global_ball = BallVolume(grid, h, x, -1);
  return p;
}

namespace {

// V_{i_x,h}(x, r) with extrapolation past the ball's reach; core points use
// V_{0,h}.
double point_volume(const VolumeTable& vol, const EnvelopePoint& p, double r) {
  if (p.end == 0) return vol.volume(0, r);
  const double reach = p.ball.reach();
  if (r <= reach) return p.ball.weighted(r);
  return p.ball.weighted(reach) * std::pow(r / reach, vol.growth_exponent(p.end));
}

}  // namespace

EstimateEnvelope heat_kernel_envelope(const VolumeTable& volumes, const EnvelopePoint& x, const EnvelopePoint& y,
                                      double t, const EnvelopeConstants& k) {
  if (!(t > 0.0)) throw Error(ErrorKind::InvalidArgument, "t must be positive");
  EstimateEnvelope e;
  e.constants = k;
  const double hh = x.h * y.h;
  const auto iy = static_cast<std::size_t>(y.cell);
  const double tiny = std::numeric_limits<double>::min();
  if (t <= 1.0) {
    e.small_time = true;
    // Geometric mean of the two ball volumes keeps the envelope symmetric.
    const double r = std::sqrt(t);
    const double v = std::max(std::sqrt(x.global_ball.weighted(r) * y.global_ball.weighted(r)), tiny);
    const double d = x.d_all[iy];
    e.same_end_gaussian = hh / v;
    e.d_empty = d;
    e.d_plus = d;
    e.lower = k.C_low * e.same_end_gaussian * std::exp(-k.c_low * d * d / t);
    e.upper = k.C_up * e.same_end_gaussian * std::exp(-k.c_up * d * d / t);
    return e;
  }
  const double r = std::sqrt(t);
  e.d_empty = (x.end == 0 || y.end == 0) ? kInfinity : x.d_avoid[iy];
  e.d_plus = x.d_plus[iy];
  if (e.d_empty < kInfinity) {
    e.same_end_gaussian = hh / std::sqrt(std::max(point_volume(volumes, x, r) * point_volume(volumes, y, r), tiny));
  }
  const double Hx = H_function_at(volumes, x.end, x.norm, t);
  const double Hy = H_function_at(volumes, y.end, y.norm, t);
  e.cross_term_00 = hh * Hx * Hy / std::max(volumes.volume(0, r), tiny);
  e.cross_term_x = hh * Hy / std::max(volumes.volume(x.end, r), tiny);
  e.cross_term_y = hh * Hx / std::max(volumes.volume(y.end, r), tiny);
  const double cross = e.cross_term_00 + e.cross_term_x + e.cross_term_y;
  auto gauss = [&](double c, double d) { return d < kInfinity ? std::exp(-c * d * d / t) : 0.0; };
  e.lower = k.C_low * (e.same_end_gaussian * gauss(k.c_low, e.d_empty) + cross * gauss(k.c_low, e.d_plus));
  e.upper = k.C_up * (e.same_end_gaussian * gauss(k.c_up, e.d_empty) + cross * gauss(k.c_up, e.d_plus));
  return e;
}

EstimateEnvelope heat_kernel_envelope(const Grid& grid, const ProfileField& h, const VolumeTable& volumes, double t,
                                      CellId x, CellId y, const EnvelopeConstants& constants) {
  const auto px = envelope_point(grid, h, x);
  const auto py = envelope_point(grid, h, y);
  return heat_kernel_envelope(volumes, px, py, t, constants);
}

// ----- x_sqrt(t) --------------------------------------------------------------

std::vector<double> boundary_distance(const Grid& grid) {
  std::vector<CellId> sources;
  for (CellId id = 0; id < static_cast<CellId>(grid.size()); ++id) {
    const auto& c = grid.cell(id);
    if ((c.cls == CellClass::DirichletBdry && !c.far_ring) || c.cls == CellClass::Core) sources.push_back(id);
  }
  if (sources.empty()) return std::vector<double>(grid.size(), kInfinity);
  return distances_from_cells(grid, sources);
}

CellId x_sqrt_t(const Grid& grid, CellId x, double t, double c0) {
  if (!grid.in_domain(x) || grid.cell_class(x) == CellClass::Core) {
    throw Error(ErrorKind::OutsideDomain, "x_sqrt_t needs a point in an end");
  }
  if (!(t > 0.0) || !(c0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "t and c0 must be positive");
  const double need = c0 * std::sqrt(t) / 8.0;
  const auto bd = boundary_distance(grid);
  if (bd[static_cast<std::size_t>(x)] >= need) return x;
  const auto d = distances_from(grid, x, true);
  const double reach = std::sqrt(t) / 4.0;
  CellId best = x;
  for (CellId id = 0; id < static_cast<CellId>(grid.size()); ++id) {
    const auto k = static_cast<std::size_t>(id);
    if (!grid.in_domain(id) || grid.end_id(id) != grid.end_id(x) || d[k] > reach) continue;
    const auto b = static_cast<std::size_t>(best);
    if (bd[k] > bd[b] || (bd[k] == bd[b] && d[k] < d[b])) best = id;
  }
  if (bd[static_cast<std::size_t>(best)] < need) {
    throw Error(ErrorKind::NoAdmissiblePoint, "end too narrow at scale sqrt(t) = " + std::to_string(std::sqrt(t)));
  }
  return best;
}

// ----- parabolicity and Green bounds -------------------------------------------

const char* to_string(EndClass c) noexcept {
  return c == EndClass::E1_nonparabolic ? "E1 (non-parabolic)" : "E2 (parabolic)";
}

bool parabolicity_test(const std::function<double(double)>& volume) {
  // Blocks I_k = int_{4^k}^{4^{k+1}} ds / V(sqrt s), in u = log s.
  const double step = std::log(4.0);
  auto block = [&](int k) {
    return simpson([&](double u) { return std::exp(u) / volume(std::exp(0.5 * u)); }, k * step, (k + 1) * step, 32);
  };
  constexpr int K = 60;
  const double last = block(K), prev = block(K - 1), early = block(K - 10);
  if (!std::isfinite(last) || !(last > 0.0)) return !(last == 0.0);
  const double q = last / prev;
  if (q > 1.05) return true;
  if (q < 0.95) return false;
  // Polynomial decay I_k ~ k^-p: the series diverges for p <= 1.
  const double p = std::log(early / last) / std::log(static_cast<double>(K) / (K - 10));
  return p < 1.5;
}

bool parabolicity_test_exponent(double beta, double gamma) { return beta < 2.0 || (beta == 2.0 && gamma <= 1.0); }

EndClass classify_end(const ManifoldWithEnds& manifold, int end, const VolumeTable* volumes) {
  const auto& e = manifold.end(end);
  if (!manifold.weighted() && !std::holds_alternative<UserGridEnd>(e.shape)) {
    const double beta = std::holds_alternative<StripEnd>(e.shape) ? 1.0 : 2.0;
    return parabolicity_test_exponent(beta) ? EndClass::E2_parabolic : EndClass::E1_nonparabolic;
  }
  if (volumes == nullptr) throw Error(ErrorKind::Inconclusive, "no asymptotic volume model for this end");
  const double R = volumes->max_radius();
  const double beta = log_slope([&](double r) { return volumes->plain_volume(end, r); }, 0.25 * R, R);
  return parabolicity_test_exponent(beta) ? EndClass::E2_parabolic : EndClass::E1_nonparabolic;
}

GreenBounds green_estimate(const std::function<double(double)>& volume, double d, double c, double C) {
  if (!(d > 0.0)) throw Error(ErrorKind::InvalidArgument, "distance must be positive");
  if (parabolicity_test(volume)) throw Error(ErrorKind::ParabolicEnd, "the volume tail integral diverges");
  const double u0 = 2.0 * std::log(d), step = std::log(4.0);
  double tail = 0.0;
  for (int k = 0; k < 400; ++k) {
    const double b = simpson([&](double u) { return std::exp(u) / volume(std::exp(0.5 * u)); }, u0 + k * step,
                             u0 + (k + 1) * step, 64);
    tail += b;
    if (b < 1e-14 * tail) break;
  }
  return {c * tail, C * tail, tail};
}

std::vector<double> green_numeric(const Grid& grid, CellId y, int restrict_end) {
  if (!grid.in_domain(y)) throw Error(ErrorKind::OutsideDomain, "Green pole must be a domain cell");
  auto unknown = [&](CellId id) {
    if (!grid.in_domain(id)) return false;
    if (restrict_end > 0) return grid.cell_class(id) != CellClass::Core && grid.end_id(id) == restrict_end;
    return true;
  };
  if (!unknown(y)) throw Error(ErrorKind::OutsideDomain, "Green pole lies outside the subdomain");
  std::vector<int> index(grid.size(), -1);
  std::vector<CellId> cells;
  for (CellId id = 0; id < static_cast<CellId>(grid.size()); ++id) {
    if (unknown(id)) {
      index[static_cast<std::size_t>(id)] = static_cast<int>(cells.size());
      cells.push_back(id);
    }
  }
  std::vector<Eigen::Triplet<double>> trip;
  bool absorbs = false;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    double diag = 0.0;
    for (const auto& l : grid.links(cells[i])) {
      diag += l.conductance;
      const int j = index[static_cast<std::size_t>(l.to)];
      if (j >= 0) {
        trip.emplace_back(static_cast<Eigen::Index>(i), j, -l.conductance);
      } else if (l.conductance > 0.0) {
        absorbs = true;
      }
    }
    trip.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i), diag);
  }
  if (!absorbs) throw Error(ErrorKind::SingularSystem, "no absorbing boundary: the Green function is infinite");
  const auto n = static_cast<Eigen::Index>(cells.size());
  Eigen::SparseMatrix<double> K(n, n);
  K.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "Green system factorisation failed");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[index[static_cast<std::size_t>(y)]] = 1.0;
  const Eigen::VectorXd g = ldlt.solve(rhs);
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t i = 0; i < cells.size(); ++i) out[static_cast<std::size_t>(cells[i])] = g[static_cast<Eigen::Index>(i)];
  return out;
}

// ----- decay prediction -----------------------------------------------------------

std::string DecayClass::describe() const {
  if (log_class) return "(t log^2 t)^-1";
  char buf[64];
  std::snprintf(buf, sizeof buf, "t^-%.4g", a);
  return buf;
}

DecayClass decay_exponent_prediction(const ManifoldWithEnds& m) {
  if (m.weighted()) throw Error(ErrorKind::UnsupportedEnd, "decay prediction assumes unit weight");
  DecayClass out;
  const bool dirichlet = m.has_dirichlet();
  double best = kInfinity;
  bool log_type = false;
  for (int i = 1; i <= static_cast<int>(m.num_ends()); ++i) {
    const auto& e = m.end(i);
    double A = kInfinity;
    if (std::holds_alternative<UserGridEnd>(e.shape)) throw Error(ErrorKind::UnsupportedEnd, "mask ends have no model law");
    if (!dirichlet) {
      // Neumann problem: p(t,o,o) ~ 1 / min_i V_i(sqrt t).
      A = std::holds_alternative<StripEnd>(e.shape) ? 0.5 : 1.0;
    } else if (const auto* c = std::get_if<ConeEnd>(&e.shape)) {
      const bool d1 = is_dirichlet(c->edge1), d2 = is_dirichlet(c->edge2);
      if (d1 && d2) A = 1.0 + kPi / c->aperture;
      else if (d1 || d2) A = 1.0 + kPi / (2.0 * c->aperture);
      else A = kNaN;
    } else if (const auto* s = std::get_if<StripEnd>(&e.shape)) {
      A = (is_dirichlet(s->side1) || is_dirichlet(s->side2)) ? kInfinity : 1.5;
    } else if (const auto* p = std::get_if<ParabolaExteriorEnd>(&e.shape)) {
      A = is_dirichlet(p->bc) ? 1.5 : kNaN;
    } else {
      A = kNaN;  // plane
    }
    out.end_exponents.push_back(A);
    if (std::isnan(A)) log_type = true;
    else best = std::min(best, A);
  }
  if (log_type) {
    out.log_class = true;
    out.a = 1.0;
  } else {
    out.a = best;
  }
  return out;
}

// ----- volume lemma ------------------------------------------------------------------

VolumeLemmaReport volume_lemma_check(const Grid& grid, const ProfileField& h, const std::vector<CellId>& centers,
                                     double r_min) {
  if (!(r_min > 0.0)) throw Error(ErrorKind::InvalidArgument, "r_min must be positive");
  VolumeLemmaReport rep;
  rep.min_ratio = kInfinity;
  rep.worst_step_ratio = kInfinity;
  bool positive = true;
  for (CellId x : centers) {
    if (!grid.in_domain(x) || grid.cell_class(x) == CellClass::Core) {
      throw Error(ErrorKind::OutsideDomain, "volume lemma centres must lie in an end");
    }
    const BallVolume b(grid, h, x, grid.end_id(x));
    double prev = kNaN, last = kNaN;
    for (double r = r_min; r <= b.reach(); r *= 2.0) {
      const double ratio = b.weighted(r) / b.plain(r);
      rep.samples.push_back({x, r, ratio});
      positive = positive && ratio > 0.0;
      if (!std::isnan(prev) && prev > 0.0) rep.worst_step_ratio = std::min(rep.worst_step_ratio, ratio / prev);
      prev = ratio;
      last = ratio;
    }
    if (!std::isnan(last)) rep.min_ratio = std::min(rep.min_ratio, last);
  }
  rep.passed = !rep.samples.empty() && positive && rep.worst_step_ratio >= 0.5;
  return rep;
}

}  // namespace hkends
