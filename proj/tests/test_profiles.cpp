#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "hkends/error.hpp"
#include "hkends/profiles.hpp"

using namespace hkends;
using std::numbers::pi;

namespace {
constexpr auto D = BoundaryCondition::Dirichlet;
constexpr auto N = BoundaryCondition::Neumann;

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an hkends::Error");
  return ErrorKind::InvalidArgument;
}
}  // namespace

TEST_CASE("cone closed forms") {
  CHECK(cone_profile(ConeEnd{pi, 0.0, D, D}, 1.0, pi / 2) == doctest::Approx(1.0));
  CHECK(std::abs(cone_profile(ConeEnd{pi, 0.0, D, D}, 3.0, 0.0)) < 1e-12);
  CHECK(cone_profile(ConeEnd{pi / 2, 0.0, D, N}, 4.0, pi / 4) == doctest::Approx(4.0 * std::sqrt(0.5)));
  // ND mirrors DN about the bisector.
  CHECK(cone_profile(ConeEnd{pi / 2, 0.0, N, D}, 4.0, pi / 4) == doctest::Approx(4.0 * std::sqrt(0.5)));
  CHECK(cone_profile(ConeEnd{pi / 2, 0.0, N, D}, 2.0, pi / 2 - 1e-14) == doctest::Approx(0.0));
  CHECK(cone_profile(ConeEnd{pi / 2, 0.0, N, N}, std::exp(2.0), 0.3) == doctest::Approx(2.0));
  CHECK(kind_of([] { cone_profile(ConeEnd{0.0, 0.0, D, D}, 1.0, 0.0); }) == ErrorKind::InvalidAperture);
  CHECK(kind_of([] { cone_profile(ConeEnd{7.0, 0.0, D, D}, 1.0, 0.0); }) == ErrorKind::InvalidAperture);
}

TEST_CASE("strip and parabola closed forms") {
  const StripEnd nn{1.0, 0.0, N, N};
  CHECK(strip_profile(nn, 0.0, 0.1) == 0.0);
  CHECK(strip_profile(nn, 6.0, 0.3) == doctest::Approx(2.0 * strip_profile(nn, 3.0, -0.2)));
  CHECK(strip_profile(nn, 2.5, -0.5) == strip_profile(nn, 2.5, 0.5));

  CHECK(exterior_parabola_profile(0.0, 0.0) == doctest::Approx(0.0));
  CHECK(exterior_parabola_profile(0.0, -2.0) == doctest::Approx(2.0));
  CHECK(exterior_parabola_profile(3.0, 9.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(kind_of([] { exterior_parabola_profile(0.0, 1.0); }) == ErrorKind::OutsideDomain);
  // Along the downward axis h grows like |x|^{1/2}.
  const double a = exterior_parabola_profile(0.0, -1e4), b = exterior_parabola_profile(0.0, -4e4);
  CHECK((b + 1.0) / (a + 1.0) == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("closed forms are discretely harmonic to second order") {
  // r^{3/2} sin(3 theta / 2) on a box in the first quadrant.
  const auto f = [](const PlanePoint& p) {
    return cone_profile(ConeEnd{2 * pi / 3, 0.0, D, D}, std::hypot(p.x, p.y), std::atan2(p.y, p.x));
  };
  double prev = 0.0;
  for (int level = 0; level < 3; ++level) {
    const int n = 20 << level;
    const double dx = 1.0 / n;
    BoxBoundary bc{D, D, D, D, true, true, true, true};
    const Grid g = make_box(n, n, dx, bc, 1.0, 0.5);
    const auto rep = verify_profile(sample_profile(g, f), g);
    if (level > 0) CHECK(std::log2(prev / rep.max_interior_residual) > 1.8);
    prev = rep.max_interior_residual;
  }
}

TEST_CASE("solved profile on a box is linear away from the wall") {
  BoxBoundary bc{D, D, N, N, false, true, false, false};
  const Grid g = make_box(40, 6, 0.25, bc);
  const auto h = solve_profile(g);
  // Wall at x = -dx/2: h proportional to x + dx/2.
  const double slope = h[g.at(39, 3)] / (g.cell(g.at(39, 3)).center.x + 0.125);
  for (int i = 0; i < 40; ++i) {
    const CellId c = g.at(i, 2);
    CHECK(h[c] == doctest::Approx(slope * (g.cell(c).center.x + 0.125)).epsilon(1e-9));
  }
  const auto rep = verify_profile(h, g);
  CHECK(rep.max_relative_residual < 1e-12);
  CHECK(rep.boundary_violation == 0.0);
  CHECK_FALSE(rep.nonpositive_interior);
}

TEST_CASE("profile solve errors") {
  const Grid g = make_box(8, 8, 0.5);
  CHECK(kind_of([&] { solve_profile(g); }) == ErrorKind::NoDirichletBoundary);
  const Grid walls = make_box(8, 8, 0.5, BoxBoundary{D, D, D, D});
  CHECK(kind_of([&] { solve_profile(walls); }) == ErrorKind::SingularSystem);

  ProfileField zero;
  zero.values.assign(walls.size(), 0.0);
  const auto rep = verify_profile(zero, walls);
  CHECK(rep.boundary_violation == 0.0);
  CHECK(rep.nonpositive_interior);
}

TEST_CASE("solved DD cone profile matches the closed form") {
  const auto m = assemble({EndDescriptor{ConeEnd{pi / 2, 0.0, D, D}}}, 1.0);
  const Grid g = rasterize(m, 0.05, 40.0, Grading::Geometric);
  const auto h = solve_profile(g);
  const auto rep = verify_profile(h, g);
  CHECK(rep.max_relative_residual < 1e-10);
  CHECK(rep.boundary_violation == 0.0);
  CHECK_FALSE(rep.nonpositive_interior);
  REQUIRE(rep.bands.size() == 1);
  CHECK(rep.bands[0].ratio() < 4.0);
  CHECK(h[g.core_center()] == doctest::Approx(1.0));

  std::ostringstream csv;
  write_profile_csv(csv, g, h);
  CHECK(csv.str().rfind("x,y,sheet,end,h\n", 0) == 0);
}
