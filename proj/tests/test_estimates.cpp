#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hkends/distance.hpp"
#include "hkends/estimates.hpp"
#include "test_util.hpp"

using namespace hkends;
using std::numbers::pi;

namespace {
constexpr auto D = BoundaryCondition::Dirichlet;
constexpr auto N = BoundaryCondition::Neumann;

double slope(const VolumeTable& v, int end, double r0, double r1) {
  return std::log(v.volume(end, r1) / v.volume(end, r0)) / std::log(r1 / r0);
}
}  // namespace

TEST_CASE("weighted volumes grow with the profile exponent") {
  const auto m = assemble({EndDescriptor{ConeEnd{pi, 0.0, D, D}}}, 1.0);
  const Grid g = rasterize(m, 0.1, 200.0);
  const auto h = closed_form_profile(g);
  const VolumeTable v(g, h);
  CHECK(slope(v, 1, 20.0, 150.0) == doctest::Approx(4.0).epsilon(0.05));
  // Brute-force integral of (r sin t)^2 over the half disk of radius R, with
  // a ball centred near the origin: V ~ pi R^4 / 8.
  const double R = 150.0;
  CHECK(v.volume(1, R) / (pi * std::pow(R, 4) / 8.0) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(v.volume(1, 1e-3) < 1e-3);
  CHECK(v.volume(0, 30.0) == v.volume(1, 30.0));

  for (double r : {1.0, 5.0, 40.0}) CHECK(weighted_volume(g, h, 1, r) == doctest::Approx(v.volume(1, r)));
  CHECK(error_kind_of([&] { weighted_volume(g, h, 1, 500.0); }) == ErrorKind::RadiusExceedsTruncation);
  CHECK(error_kind_of([&] { weighted_ball_volume(g, h, g.core_center(), 500.0); }) ==
        ErrorKind::RadiusExceedsTruncation);
  // Beyond the table the closed-form exponent takes over.
  CHECK(v.growth_exponent(1) == doctest::Approx(4.0));
  CHECK(slope(v, 1, 2 * v.max_radius(), 4 * v.max_radius()) == doctest::Approx(4.0));
}

TEST_CASE("strip with a linear profile has cubic volume") {
  const auto m = assemble({EndDescriptor{StripEnd{0.8, 0.0, N, N}}}, 1.0, {}, D);
  const Grid g = rasterize(m, 0.05, 400.0);
  const auto h = closed_form_profile(g);
  const VolumeTable v(g, h);
  CHECK(slope(v, 1, 50.0, 300.0) == doctest::Approx(3.0).epsilon(0.03));
  // int_0^r s^2 w ds = w r^3 / 3.
  CHECK(v.volume(1, 300.0) / (0.8 * std::pow(300.0, 3) / 3.0) == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("volumes are monotone and V0 is the minimum") {
  const auto m = assemble({EndDescriptor{ConeEnd{pi / 2, 0.2, D, D}}, EndDescriptor{ConeEnd{pi / 3, 2.2, D, N}},
                           EndDescriptor{ConeEnd{pi / 2, 4.0, N, N}}},
                          1.0);
  const Grid g = rasterize(m, 0.2, 300.0);
  const auto h = solve_profile(g);
  const VolumeTable v(g, h);
  for (int i = 0; i <= 3; ++i) {
    double prev = 0.0;
    for (double r = 0.1; r < 1000.0; r *= 1.3) {
      const double cur = v.volume(i, r);
      CHECK(cur >= prev);
      prev = cur;
    }
  }
  for (double r : {1.0, 10.0, 100.0}) {
    CHECK(v.volume(0, r) == std::min({v.volume(1, r), v.volume(2, r), v.volume(3, r)}));
  }
}

TEST_CASE("H function") {
  const auto m = assemble({EndDescriptor{ConeEnd{pi, 0.0, D, D}}}, 1.0);
  const Grid g = rasterize(m, 0.1, 400.0);
  const auto h = closed_form_profile(g);
  const VolumeTable v(g, h);
  CHECK(H_function(g, v, g.core_center(), 50.0) == 1.0);
  // Fast volume growth: H ~ |x|^-2, and the integral adds a bounded factor.
  std::vector<double> scaled;
  for (double r : {4.0, 8.0, 16.0, 32.0}) {
    const double H = H_function_at(v, 1, r, 1e4);
    CHECK(H > 0.0);
    CHECK(H <= 1.0);
    const double simple = r * r / v.volume(1, r);
    CHECK(H >= simple);
    CHECK(H <= 3.0 * simple);
    scaled.push_back(H * r * r);
  }
  CHECK(scaled.back() / scaled.front() > 0.5);
  CHECK(scaled.back() / scaled.front() < 2.0);
  // Nonincreasing along the bisector.
  double prev = 2.0;
  for (double y = 1.5; y < 60.0; y *= 1.5) {
    const double H = H_function(g, v, g.locate_domain(PlanePoint{0, 0.0, y}), 900.0);
    CHECK(H <= prev * (1.0 + 1e-12));
    prev = H;
  }
  // |x|^2 / V >= 1 gives 1.
  ProfileField small = h;
  for (double& value : small.values) value *= 1e-3;
  const VolumeTable vs(g, small);
  CHECK(H_function_at(vs, 1, 2.0, 1e6) == 1.0);
}

TEST_CASE("H decays like 1/log^2 t on a plane-like end") {
  const auto m = assemble({EndDescriptor{ParabolaExteriorEnd{D, 1.5}}, EndDescriptor{PlaneEnd{}}}, 1.0);
  const Grid g = rasterize(m, 0.25, 1e5);
  const auto h = solve_profile(g);
  const VolumeTable v(g, h);
  std::vector<double> scaled;
  for (double t : {1e3, 1e5, 1e7, 1e9}) {
    const double H = H_function_at(v, 2, std::sqrt(t), t);
    scaled.push_back(H * std::log(t) * std::log(t));
  }
  for (double s : scaled) CHECK(s / scaled.front() == doctest::Approx(1.0).epsilon(0.5));
  // The parabola end has cubic weighted growth: H ~ t^-1/2 at |x| ~ sqrt(t).
  const double r1 = H_function_at(v, 1, 30.0, 900.0) * 30.0, r2 = H_function_at(v, 1, 300.0, 9e4) * 300.0;
  CHECK(r2 / r1 == doctest::Approx(1.0).epsilon(0.5));
}

TEST_CASE("envelope structure") {
  const auto m = assemble({EndDescriptor{ConeEnd{pi / 2, 0.2, D, D}}, EndDescriptor{ConeEnd{pi / 2, 2.5, D, N}}}, 1.0);
  const Grid g = rasterize(m, 0.2, 200.0);
  const auto h = solve_profile(g);
  const VolumeTable v(g, h);
  const CellId o = g.core_center();
  const CellId x = g.locate_domain(PlanePoint{0, 4.0 * std::cos(0.2 + pi / 4), 4.0 * std::sin(0.2 + pi / 4)});
  const CellId y = g.locate_domain(PlanePoint{0, 5.0 * std::cos(2.5 + pi / 4), 5.0 * std::sin(2.5 + pi / 4)});
  const CellId x2 = g.locate_domain(PlanePoint{0, 6.0 * std::cos(0.2 + pi / 3), 6.0 * std::sin(0.2 + pi / 3)});
  for (double t : {0.5, 2.0, 50.0, 400.0}) {
    for (auto [a, b] : {std::pair{x, y}, std::pair{x, x2}, std::pair{o, x}, std::pair{o, o}}) {
      const auto e = heat_kernel_envelope(g, h, v, t, a, b);
      const auto f = heat_kernel_envelope(g, h, v, t, b, a);
      CHECK(e.lower >= 0.0);
      CHECK(e.lower <= e.upper);
      CHECK(e.same_end_gaussian >= 0.0);
      CHECK(e.cross_term_00 >= 0.0);
      CHECK(e.lower == doctest::Approx(f.lower).epsilon(1e-12));
      CHECK(e.upper == doctest::Approx(f.upper).epsilon(1e-12));
      CHECK(e.small_time == (t <= 1.0));
    }
  }
  // Across ends the same-end term vanishes.
  const auto cross = heat_kernel_envelope(g, h, v, 50.0, x, y);
  CHECK(std::isinf(cross.d_empty));
  CHECK(cross.same_end_gaussian == 0.0);
  CHECK(heat_kernel_envelope(g, h, v, 50.0, x, x2).same_end_gaussian > 0.0);
  // At o the cross terms give 3 h(o)^2 / V0.
  const auto oo = heat_kernel_envelope(g, h, v, 100.0, o, o);
  CHECK(oo.cross_term_00 + oo.cross_term_x + oo.cross_term_y ==
        doctest::Approx(3.0 * h[o] * h[o] / v.volume(0, 10.0)));
}

TEST_CASE("x_sqrt_t") {
  const auto m = assemble({EndDescriptor{ConeEnd{pi / 2, 0.0, D, D}}}, 1.0);
  const Grid g = rasterize(m, 0.1, 40.0, Grading::Uniform);
  const auto bd = boundary_distance(g);
  const CellId deep = g.locate_domain(PlanePoint{0, 20.0, 20.0});
  CHECK(x_sqrt_t(g, deep, 400.0) == deep);
  const CellId edge = g.locate_domain(PlanePoint{0, 28.0, 0.08});
  const CellId moved = x_sqrt_t(g, edge, 400.0);
  CHECK(moved != edge);
  CHECK(bd[moved] > bd[edge]);
  CHECK(bd[moved] >= std::sqrt(400.0) / 8.0);
  CHECK(distance(g, edge, moved) <= std::sqrt(400.0) / 4.0 + 1e-9);
  CHECK(x_sqrt_t(g, edge, 1e-6) == edge);
  // Near the vertex the cone is too narrow at large scales.
  const CellId near = g.locate_domain(PlanePoint{0, 1.3, 0.1});
  CHECK(error_kind_of([&] { x_sqrt_t(g, near, 1e4, 4.0); }) == ErrorKind::NoAdmissiblePoint);
  CHECK(error_kind_of([&] { x_sqrt_t(g, g.core_center(), 1.0); }) == ErrorKind::OutsideDomain);
}

TEST_CASE("parabolicity and end classes") {
  CHECK(parabolicity_test([](double r) { return r * r; }));
  CHECK_FALSE(parabolicity_test([](double r) { return r * r * r; }));
  CHECK(parabolicity_test([](double r) { return r; }));
  CHECK(parabolicity_test([](double r) { return r * r * std::log(2.0 + r); }));
  CHECK_FALSE(parabolicity_test([](double r) { return r * r * std::pow(std::log(2.0 + r), 2); }));

  const auto m = assemble({EndDescriptor{ConeEnd{pi / 2, 0.0, N, N}}, EndDescriptor{StripEnd{0.5, pi, N, N}}}, 1.0);
  CHECK(classify_end(m, 1) == EndClass::E2_parabolic);
  CHECK(classify_end(m, 2) == EndClass::E2_parabolic);

  // A weight sigma = r^2 makes the cone volume grow like r^4.
  const auto mw = assemble({EndDescriptor{ConeEnd{pi / 2, 0.0, D, D}}}, 1.0,
                           [](int, double x, double y) { return 1.0 + x * x + y * y; });
  const Grid gw = rasterize(mw, 0.1, 200.0);
  const VolumeTable vw(gw, solve_profile(gw));
  CHECK(classify_end(mw, 1, &vw) == EndClass::E1_nonparabolic);
  CHECK(error_kind_of([&] { classify_end(mw, 1); }) == ErrorKind::Inconclusive);
  CHECK(std::string(to_string(EndClass::E2_parabolic)).find("parabolic") != std::string::npos);
}

TEST_CASE("Green bounds") {
  const auto g = green_estimate([](double r) { return std::pow(r, 4); }, 3.0, 0.5, 2.0);
  CHECK(g.tail == doctest::Approx(1.0 / 9.0).epsilon(1e-6));
  CHECK(g.lower == doctest::Approx(0.5 / 9.0).epsilon(1e-6));
  CHECK(g.upper == doctest::Approx(2.0 / 9.0).epsilon(1e-6));
  CHECK(green_estimate([](double r) { return std::pow(r, 4); }, 300.0).tail < 1e-4);
  CHECK(error_kind_of([] { green_estimate([](double r) { return r * r; }, 1.0); }) == ErrorKind::ParabolicEnd);
}

TEST_CASE("numerical Green functions are monotone in the domain") {
  const auto m = assemble({EndDescriptor{ConeEnd{pi / 2, 0.2, D, D}}, EndDescriptor{ConeEnd{pi / 2, 2.5, N, N}}}, 1.0);
  const Grid g = rasterize(m, 0.2, 100.0);
  for (int e : {1, 2}) {
    const CellId y = g.locate_domain(PlanePoint{0, 3.0 * std::cos(0.2 + 1.3 * (e - 1) * 1.77), 3.0 * std::sin(0.2 + 1.3 * (e - 1) * 1.77)});
    REQUIRE(g.end_id(y) == e);
    const auto G = green_numeric(g, y);
    const auto Gu = green_numeric(g, y, e);
    for (CellId c = 0; c < static_cast<CellId>(g.size()); ++c) {
      CHECK(Gu[c] <= G[c] * (1.0 + 1e-10) + 1e-14);
      CHECK(Gu[c] >= 0.0);
    }
  }
  const Grid box = make_box(5, 5, 0.1);
  CHECK(error_kind_of([&] { green_numeric(box, 3); }) == ErrorKind::SingularSystem);
}

TEST_CASE("decay exponent predictions") {
  const auto a = decay_exponent_prediction(assemble({EndDescriptor{ConeEnd{0.9 * pi, 0.0, D, D}},
                                                     EndDescriptor{ConeEnd{0.45 * pi, pi, D, N}},
                                                     EndDescriptor{ConeEnd{0.45 * pi, 1.5 * pi, D, N}}},
                                                    1.0));
  CHECK_FALSE(a.log_class);
  CHECK(a.a == doctest::Approx(1.0 + 1.0 / 0.9));

  const auto strip = decay_exponent_prediction(assemble({EndDescriptor{StripEnd{0.6, 0.0, N, N}},
                                                         EndDescriptor{ConeEnd{pi / 2, 1.0, D, D}},
                                                         EndDescriptor{ConeEnd{pi / 2, 3.5, D, D}}},
                                                        1.0));
  CHECK(strip.a == doctest::Approx(1.5));
  const auto logc = decay_exponent_prediction(
      assemble({EndDescriptor{ConeEnd{pi / 2, 0.2, N, N}}, EndDescriptor{ConeEnd{pi / 2, 2.5, D, D}}}, 1.0));
  CHECK(logc.log_class);
  CHECK(logc.describe() == "(t log^2 t)^-1");
  const auto pp = decay_exponent_prediction(
      assemble({EndDescriptor{ParabolaExteriorEnd{D, 1.5}}, EndDescriptor{ParabolaExteriorEnd{D, 1.5}}}, 1.0));
  CHECK(pp.a == doctest::Approx(1.5));
  const auto pplane = decay_exponent_prediction(
      assemble({EndDescriptor{ParabolaExteriorEnd{D, 1.5}}, EndDescriptor{PlaneEnd{}}}, 1.0));
  CHECK(pplane.log_class);

  UserGridEnd mask;
  mask.nx = 3;
  mask.ny = 2;
  mask.x0 = 0.95;
  mask.y0 = -0.1;
  mask.mask = {1, 1, 1, 1, 1, 1};
  CHECK(error_kind_of([&] { decay_exponent_prediction(assemble({EndDescriptor{mask}}, 1.0)); }) ==
        ErrorKind::UnsupportedEnd);
}

TEST_CASE("weighted volume dominates the plain volume") {
  const auto m = assemble({EndDescriptor{ConeEnd{pi / 2, 0.2, D, D}}, EndDescriptor{ConeEnd{pi / 2, 2.5, D, N}}}, 1.0);
  const Grid g = rasterize(m, 0.2, 300.0);
  const auto h = solve_profile(g);
  std::vector<CellId> centers;
  for (double r : {2.0, 10.0}) {
    centers.push_back(g.locate_domain(PlanePoint{0, r * std::cos(0.25), r * std::sin(0.25)}));
    centers.push_back(g.locate_domain(PlanePoint{0, r * std::cos(2.5 + pi / 4), r * std::sin(2.5 + pi / 4)}));
  }
  const auto rep = volume_lemma_check(g, h, centers, 1.0);
  CHECK(rep.passed);
  CHECK(rep.min_ratio > 0.0);
  CHECK(rep.samples.size() >= 8);
}
