#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hkends/solver.hpp"
#include "test_util.hpp"

using namespace hkends;
using std::numbers::pi;

namespace {
constexpr auto D = BoundaryCondition::Dirichlet;
constexpr auto N = BoundaryCondition::Neumann;

double gauss(double dx, double dy, double t) { return std::exp(-(dx * dx + dy * dy) / (4 * t)) / (4 * pi * t); }

CellId at(const Grid& g, double x, double y) { return g.locate(PlanePoint{0, x, y}); }
}  // namespace

TEST_CASE("free-space kernel matches the Gaussian") {
  const double dx = 0.05;
  const Grid g = make_box(200, 200, dx, {}, -5.0, -5.0);
  const CellId x = at(g, 0.01, 0.01);
  const auto& cx = g.cell(x).center;
  for (auto [px, py] : {std::pair{0.01, 0.01}, std::pair{0.61, -0.39}}) {
    const CellId y = at(g, px, py);
    const auto& cy = g.cell(y).center;
    const double p = heat_kernel_numeric(g, x, y, {0.5}).front();
    CHECK(p == doctest::Approx(gauss(cx.x - cy.x, cx.y - cy.y, 0.5)).epsilon(0.02));
  }
}

TEST_CASE("half-plane kernel matches the image formula") {
  const double dx = 0.05;
  BoxBoundary bc;
  bc.bottom = D;
  const Grid g = make_box(200, 120, dx, bc, -5.0, dx / 2);  // absorbing line y = 0
  const CellId x = at(g, 0.01, 1.01);
  const CellId y = at(g, 0.31, 0.61);
  const auto& a = g.cell(x).center;
  const auto& b = g.cell(y).center;
  const double t = 0.5;
  const double exact = gauss(a.x - b.x, a.y - b.y, t) - gauss(a.x - b.x, a.y + b.y, t);
  CHECK(heat_kernel_numeric(g, x, y, {t}).front() == doctest::Approx(exact).epsilon(0.02));
}

TEST_CASE("mass, symmetry and semigroup") {
  const Grid g = make_box(30, 20, 0.1);
  const Grid gd = make_box(30, 20, 0.1, BoxBoundary{D, N, D, N});
  const CellId x = at(g, 0.55, 0.45), y = at(g, 2.05, 1.55);

  HeatEvolver ev(g);
  const auto snaps = ev.snapshots(x, {0.1, 0.5, 1.0});
  for (const auto& s : snaps) CHECK(s.total_mass == doctest::Approx(1.0).epsilon(1e-12));

  HeatEvolver evd(gd);
  const auto sd = evd.snapshots(x, {0.1, 0.5, 1.0, 2.0});
  for (std::size_t k = 1; k < sd.size(); ++k) CHECK(sd[k].total_mass < sd[k - 1].total_mass);

  const double pxy = heat_kernel_numeric(gd, x, y, {0.7}).front();
  const double pyx = heat_kernel_numeric(gd, y, x, {0.7}).front();
  CHECK(std::abs(pxy - pyx) <= 1e-10 * pxy);

  // Chapman-Kolmogorov on whole steps.
  const double dt = HeatEvolver(gd).explicit_dt();
  const double t = 100 * dt, s = 60 * dt;
  HeatEvolver e1(gd), e2(gd);
  const auto fx = e1.snapshots(x, {t}).front();
  const auto fy = e2.snapshots(y, {s}).front();
  double sum = 0.0;
  for (CellId z : gd.domain_cells()) sum += fx.values[z] * fy.values[z] * gd.measure(z);
  const double direct = heat_kernel_numeric(gd, x, y, {t + s}).front();
  CHECK(sum == doctest::Approx(direct).epsilon(1e-9));
}

TEST_CASE("early times are NaN and unstable steps are rejected") {
  const Grid g = make_box(10, 10, 0.1);
  const auto p = heat_kernel_numeric(g, 0, 5, {0.1 * min_reliable_time(g), 2 * min_reliable_time(g)});
  CHECK(std::isnan(p[0]));
  CHECK(std::isfinite(p[1]));
  HeatOptions o;
  o.dt = 2.0 / g.max_rate();
  CHECK(error_kind_of([&] { heat_kernel_numeric(g, 0, 5, {1.0}, o); }) == ErrorKind::UnstableStep);
  CHECK(error_kind_of([&] { step_heat(point_source(g, 0), g, o.dt); }) == ErrorKind::UnstableStep);
}

TEST_CASE("implicit stepping tracks the explicit kernel") {
  const double dx = 0.1;
  const Grid g = make_box(60, 60, dx, BoxBoundary{D, D, D, D});
  const CellId x = at(g, 2.05, 2.05), y = at(g, 3.05, 2.55);
  const std::vector<double> times{1.0, 2.0, 4.0};
  HeatOptions imp;
  imp.implicit = true;
  const auto pe = heat_kernel_numeric(g, x, y, times);
  const auto pi_ = heat_kernel_numeric(g, x, y, times, imp);
  for (std::size_t k = 0; k < times.size(); ++k) CHECK(pi_[k] == doctest::Approx(pe[k]).epsilon(0.03));
  // A single implicit step conserves mass on a reflecting box.
  const Grid gn = make_box(10, 10, dx);
  CHECK(step_heat_implicit(point_source(gn, 3), gn, 5.0).total_mass == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("random walk agrees with the finite-volume kernel") {
  const double dx = 0.1;
  BoxBoundary bc;
  bc.left = D;
  const Grid g = make_box(30, 30, dx, bc);
  const CellId x = at(g, 0.55, 1.55), y = at(g, 1.05, 1.35);
  const double t = 0.4;
  HeatOptions o;
  o.dt = 0.25 * dx * dx;  // the walk's own clock
  HeatEvolver ev(g, o);
  const auto f = ev.snapshots(x, {t}).front();
  const auto mc = mc_heat_kernel(g, x, y, t, 40000, 7);
  const double fd = neighborhood_average(g, f.values, mc.neighborhood);
  CHECK(std::abs(mc.estimate - fd) <= 3 * mc.std_error);
  CHECK(std::abs(mc.survival - f.total_mass) <= 3 * mc.survival_stderr);

  const auto again = mc_heat_kernel(g, x, y, t, 40000, 7);
  CHECK(again.estimate == mc.estimate);
  CHECK(again.survival == mc.survival);
}

TEST_CASE("half-line survival follows erf") {
  const double dx = 0.02, d = 2.0, t = 1.0;
  BoxBoundary bc;
  bc.bottom = D;
  const Grid g = make_box(8, 400, dx, bc, 0.0, dx / 2);
  const CellId x = at(g, 0.07, d);
  const auto mc = mc_heat_kernel(g, x, x, t, 20000, 11);
  CHECK(std::abs(mc.survival - std::erf(d / std::sqrt(4 * t))) <= 3 * mc.survival_stderr);
}

TEST_CASE("continuous-time walk on a rasterized end") {
  const auto m = assemble({EndDescriptor{ConeEnd{pi / 2, 0.0, D, D}}}, 1.0);
  const Grid g = rasterize(m, 0.2, 6.0, Grading::Uniform);
  const CellId x = g.core_center();
  const CellId y = g.locate_domain(PlanePoint{0, 1.5, 1.5});
  const double t = 1.0;
  HeatEvolver ev(g);
  const auto f = ev.snapshots(x, {t}).front();
  const auto mc = mc_heat_kernel(g, x, y, t, 20000, 3, 0.6);
  CHECK(std::abs(mc.estimate - neighborhood_average(g, f.values, mc.neighborhood)) <= 3 * mc.std_error);
  CHECK(std::abs(mc.survival - f.total_mass) <= 3 * mc.survival_stderr);
}

TEST_CASE("h-transform with a discrete-harmonic profile is exact") {
  BoxBoundary bc;
  bc.bottom = D;
  bc.top = D;
  bc.far_top = true;
  const Grid g = make_box(20, 30, 0.1, bc);
  const ProfileField h = solve_profile(g);
  const auto r = h_transform_check(g, h, 0.5, at(g, 0.55, 0.85), at(g, 1.25, 2.05));
  CHECK(r.deviation <= 1e-8);

  const auto m = assemble({EndDescriptor{ConeEnd{pi / 2, 0.0, D, D}}}, 1.0);
  const Grid gc = rasterize(m, 0.1, 5.0);
  const ProfileField hc = solve_profile(gc);
  const auto rc = h_transform_check(gc, hc, 0.3, gc.core_center(), gc.locate_domain(PlanePoint{0, 1.5, 1.2}));
  CHECK(rc.deviation <= 1e-8);
}

TEST_CASE("h-transform with a sampled closed form converges at second order") {
  const auto f = [](const PlanePoint& p) {
    const double r = std::hypot(p.x, p.y), th = std::atan2(p.y, p.x);
    return std::pow(r, 1.5) * std::sin(1.5 * th);
  };
  std::vector<double> dev;
  for (double dx : {0.05, 0.025, 0.0125}) {
    const int n = static_cast<int>(std::lround(1.0 / dx)) - 1;
    BoxBoundary bc{D, D, D, D, true, true, true, true};
    const Grid g = make_box(n, n, dx, bc, 1.0 + dx / 2, 0.5 + dx / 2);
    const auto r = h_transform_check(g, sample_profile(g, f), 0.05, at(g, 1.3, 0.8), at(g, 1.6, 1.1));
    dev.push_back(r.deviation);
  }
  CHECK(std::log2(dev[0] / dev[1]) >= 1.8);
  CHECK(std::log2(dev[1] / dev[2]) >= 1.8);
}

TEST_CASE("h-transform rejects small profiles") {
  BoxBoundary bc;
  bc.bottom = D;
  bc.top = D;
  bc.far_top = true;
  const Grid g = make_box(10, 10, 0.1, bc);
  ProfileField h = solve_profile(g);
  h.values[static_cast<std::size_t>(at(g, 0.55, 0.05))] = 1e-9;
  CHECK(error_kind_of([&] { h_transform_check(g, h, 0.1, at(g, 0.55, 0.05), at(g, 0.55, 0.55)); }) ==
        ErrorKind::ProfileTooSmall);
  h.values[static_cast<std::size_t>(at(g, 0.55, 0.05))] = -1.0;
  CHECK(error_kind_of([&] { h_transform_check(g, h, 0.1, at(g, 0.55, 0.55), at(g, 0.25, 0.55)); }) ==
        ErrorKind::ProfileTooSmall);
}

TEST_CASE("decay fits") {
  std::vector<double> t, p2, plog, pl15;
  for (int k = 0; k <= 40; ++k) {
    const double s = std::pow(10.0, 2.0 + 2.0 * k / 40.0);
    t.push_back(s);
    p2.push_back(3.0 / (s * s));
    plog.push_back(1.0 / (s * std::log(s) * std::log(s)));
    pl15.push_back(0.5 * std::pow(s, -1.5) / std::log(s));
  }
  const auto f = fit_decay(t, p2);
  CHECK(f.a == doctest::Approx(2.0));
  CHECK(f.log_c == doctest::Approx(std::log(3.0)));
  CHECK(f.residual < 1e-10);
  CHECK(f.samples == t.size());

  const auto lc = fit_decay(t, plog, DecayModel::LogClass);
  CHECK(lc.a == 1.0);
  CHECK(lc.b == doctest::Approx(2.0));

  const auto pl = fit_decay(t, pl15, DecayModel::PowerLog);
  CHECK(pl.a == doctest::Approx(1.5));
  CHECK(pl.b == doctest::Approx(1.0));

  const auto au = fit_decay(t, plog, DecayModel::Auto);
  CHECK(au.log_residual < au.power_residual);
  CHECK(au.b == 2.0);
  CHECK(au.a == doctest::Approx(1.0).epsilon(1e-6));
  const auto ap = fit_decay(t, p2, DecayModel::Auto);
  CHECK(ap.power_residual < ap.log_residual);
  CHECK(ap.b == 0.0);

  // NaN and non-positive samples are dropped.
  auto noisy = p2;
  noisy[3] = std::nan("");
  noisy[5] = 0.0;
  CHECK(fit_decay(t, noisy).samples == t.size() - 2);

  const std::vector<double> short_t(t.begin(), t.begin() + 12), short_p(p2.begin(), p2.begin() + 12);
  CHECK(error_kind_of([&] { fit_decay(short_t, short_p); }) == ErrorKind::InsufficientRange);
  const std::vector<double> few_t(t.begin(), t.begin() + 9), few_p(p2.begin(), p2.begin() + 9);
  CHECK(error_kind_of([&] { fit_decay(few_t, few_p); }) == ErrorKind::InsufficientRange);
  CHECK(std::string(to_string(DecayModel::LogClass)) == "log-class");
}
