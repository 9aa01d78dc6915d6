#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "grid_builder.hpp"
#include "hkends/error.hpp"

namespace hkends {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * kPi;

SideKind side_of(BoundaryCondition bc) {
  return bc == BoundaryCondition::Dirichlet ? SideKind::DirichletHalf : SideKind::Neumann;
}

// Faces r0 * exp(k * d) from r0 up to exactly r1, with d close to `target`.
std::vector<double> log_faces(double r0, double r1, double target) {
  const double span = std::log(r1 / r0);
  const int n = std::max(1, static_cast<int>(std::ceil(span / target - 1e-9)));
  std::vector<double> f(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) f[static_cast<std::size_t>(k)] = r0 * std::exp(span * k / n);
  f.back() = r1;
  return f;
}

std::vector<double> linear_faces(double a0, double a1, double target) {
  const int n = std::max(1, static_cast<int>(std::round((a1 - a0) / target)));
  std::vector<double> f(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) f[static_cast<std::size_t>(k)] = a0 + (a1 - a0) * k / n;
  f.back() = a1;
  return f;
}

std::vector<double> refine(const std::vector<double>& f, int factor) {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < f.size(); ++k) {
    for (int s = 0; s < factor; ++s) out.push_back(f[k] + (f[k + 1] - f[k]) * s / factor);
  }
  out.push_back(f.back());
  return out;
}

double mean_step(const std::vector<double>& f) {
  return (f.back() - f.front()) / static_cast<double>(f.size() - 1);
}

// Radial bands of a polar end: one log-polar patch (geometric) or bands of
// doubling radius with the angular faces refined by 2 per band (uniform).
struct RadialBand {
  std::vector<double> fa, fb;
};

std::vector<RadialBand> polar_bands(double r0, double r_max, const std::vector<double>& fb, double dx,
                                    Grading grading) {
  std::vector<RadialBand> bands;
  if (grading == Grading::Geometric) {
    bands.push_back({log_faces(r0, r_max, mean_step(fb)), fb});
    return bands;
  }
  double lo = r0;
  int factor = 1;
  while (lo < r_max * (1.0 - 1e-12)) {
    const double hi = std::min(2.0 * lo, r_max);
    // Merge a thin tail into the previous band's refinement level.
    const double top = (r_max - hi < 0.25 * (hi - lo)) ? r_max : hi;
    bands.push_back({linear_faces(lo, top, dx), refine(fb, factor)});
    lo = top;
    factor *= 2;
  }
  return bands;
}

class Rasterizer {
 public:
  Rasterizer(const ManifoldWithEnds& m, double dx, double r_max, Grading grading)
      : m_(m), dx_(dx), r_max_(r_max), grading_(grading), R_(m.core_radius()), b_(grid_) {}

  Grid run() {
    if (m_.sheet_layout()) {
      build_sheets();
    } else {
      build_sectors();
    }
    b_.finish();
    finish_meta();
    return std::move(grid_);
  }

 private:
  std::function<double(const PlanePoint&)> weight_fn() const {
    const ManifoldWithEnds* m = &m_;
    return [m](const PlanePoint& p) { return m->weight(p.sheet, p.x, p.y); };
  }

  // ----- sector layout -----------------------------------------------------

  void build_sectors() {
    // Base angular faces on the core circle: every footprint edge is a face.
    std::vector<double> cuts;
    for (std::size_t k = 0; k < m_.num_ends(); ++k) {
      const auto& e = m_.ends()[k];
      if (std::holds_alternative<UserGridEnd>(e.shape)) continue;
      const auto arc = footprint(e, R_);
      cuts.push_back(wrap_angle(arc.lo));
      cuts.push_back(wrap_angle(arc.hi));
    }
    if (cuts.empty()) cuts.push_back(0.0);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               cuts.end());
    if (cuts.size() > 1 && cuts.back() > kTwoPi - 1e-12) cuts.pop_back();
    cuts.push_back(cuts.front() + kTwoPi);
    base_.clear();
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double gap = cuts[k + 1] - cuts[k];
      const int n = std::max(1, static_cast<int>(std::round(gap * R_ / dx_)));
      for (int s = 0; s < n; ++s) base_.push_back(cuts[k] + gap * s / n);
    }
    base_.push_back(cuts.back());

    build_core_disk();

    std::vector<double> covered(static_cast<std::size_t>(core_ring_.nb), 0.0);
    for (std::size_t k = 0; k < m_.num_ends(); ++k) {
      const int id = static_cast<int>(k) + 1;
      const auto& shape = m_.ends()[k].shape;
      if (const auto* c = std::get_if<ConeEnd>(&shape)) {
        build_cone(*c, id, covered);
      } else if (const auto* s = std::get_if<StripEnd>(&shape)) {
        build_strip(*s, id, covered);
      } else if (const auto* u = std::get_if<UserGridEnd>(&shape)) {
        build_mask(*u, id, covered);
      }
    }

    // Uncovered parts of the core circle carry the core boundary condition.
    const int ii = core_ring_.na - 1;
    for (int j = 0; j < core_ring_.nb; ++j) {
      const CellId cell = core_ring_.id(ii, j);
      const double width = core_ring_.spec.fb[static_cast<std::size_t>(j) + 1] - core_ring_.spec.fb[static_cast<std::size_t>(j)];
      const double free = width - covered[static_cast<std::size_t>(j)];
      if (free <= 1e-12 * width) continue;
      if (m_.core_bc() == BoundaryCondition::Dirichlet) {
        const PlanePoint at = core_ring_.world(R_, core_ring_.bc(j));
        b_.add_ghost(cell, at, free / std::log(R_ / core_ring_.ac(ii)), R_ - core_ring_.ac(ii), false);
      } else {
        b_.mark_reflecting(cell);
      }
    }
  }

  void build_core_disk() {
    // Log-polar bands towards the centre; angular resolution halves per band
    // while at least 8 cells remain.
    std::vector<TensorPatch> bands;
    std::vector<double> fb = base_;
    double outer = R_;
    while (true) {
      const double inner = 0.5 * outer;
      TensorSpec spec;
      spec.metric = Metric::Polar;
      spec.fa = log_faces(inner, outer, mean_step(fb));
      spec.fb = fb;
      spec.a_lo = spec.a_hi = SideKind::External;
      spec.b_lo = spec.b_hi = SideKind::Periodic;
      bands.push_back(b_.add_tensor(
          spec, [](const PlanePoint&, int, int) { return Classification{CellRole::Domain, 0}; }, weight_fn()));
      outer = inner;
      const int n = static_cast<int>(fb.size()) - 1;
      if (n < 16) break;
      std::vector<double> coarse;
      for (int k = 0; k < n; k += 2) coarse.push_back(fb[static_cast<std::size_t>(k)]);
      if (n % 2 == 1) coarse.pop_back();  // merge the odd cell into the last one
      coarse.push_back(fb.back());
      fb = std::move(coarse);
    }
    for (std::size_t k = 0; k + 1 < bands.size(); ++k) glue_polar_rings(b_, bands[k + 1], bands[k]);

    // Centre disk.
    const auto& last = bands.back();
    Cell disk;
    disk.center = {0, 0.0, 0.0};
    disk.area = kPi * outer * outer;
    disk.weight = m_.weight(0, 0.0, 0.0);
    disk.end_id = 0;
    const CellId centre = b_.add_cell(disk);
    b_.add_disk_index(0, outer, centre);
    for (int j = 0; j < last.nb; ++j) {
      const double dtheta = last.spec.fb[static_cast<std::size_t>(j) + 1] - last.spec.fb[static_cast<std::size_t>(j)];
      const double rc = last.ac(0);
      b_.add_link(centre, last.id(0, j), outer * dtheta / rc, rc);
    }
    core_center_ = centre;
    core_ring_ = bands.front();
  }

  // Position of angle `theta` in the base faces (shifted by 2pi as needed).
  std::size_t base_index(double theta) const {
    double best = std::numeric_limits<double>::infinity();
    std::size_t idx = 0;
    for (std::size_t k = 0; k < base_.size(); ++k) {
      const double d = std::abs(std::remainder(base_[k] - theta, kTwoPi));
      if (d < best) {
        best = d;
        idx = k;
      }
    }
    return idx;
  }

  void build_cone(const ConeEnd& c, int id, std::vector<double>& covered) {
    if (std::round(c.aperture * R_ / dx_) < 4) {
      throw Error(ErrorKind::ResolutionTooCoarse, "cone end " + std::to_string(id) + " is fewer than 4 cells wide");
    }
    const auto arc = footprint(EndDescriptor{c}, R_);
    // Base faces inside [lo, hi], continued past 2pi when the cone wraps.
    std::vector<double> fb;
    for (int turn = 0; turn < 2; ++turn) {
      for (std::size_t k = 0; k + 1 < base_.size(); ++k) {
        const double f = base_[k] + turn * kTwoPi;
        if (f > arc.lo - 1e-9 && f < arc.hi - 1e-9) fb.push_back(f);
      }
    }
    fb.front() = arc.lo;
    fb.push_back(arc.hi);

    auto bands = polar_bands(R_, r_max_, fb, dx_, grading_);
    std::vector<TensorPatch> patches;
    for (std::size_t bnd = 0; bnd < bands.size(); ++bnd) {
      TensorSpec spec;
      spec.metric = Metric::Polar;
      spec.fa = bands[bnd].fa;
      spec.fb = bands[bnd].fb;
      spec.a_lo = SideKind::External;
      spec.a_hi = bnd + 1 == bands.size() ? SideKind::FarHalf : SideKind::External;
      spec.b_lo = side_of(c.edge1);
      spec.b_hi = side_of(c.edge2);
      patches.push_back(
          b_.add_tensor(spec, [id](const PlanePoint&, int, int) { return Classification{CellRole::Domain, id}; },
                        weight_fn()));
    }
    for (std::size_t bnd = 0; bnd + 1 < patches.size(); ++bnd) glue_polar_rings(b_, patches[bnd], patches[bnd + 1]);
    const auto cov = glue_polar_rings(b_, core_ring_, patches.front());
    for (std::size_t j = 0; j < cov.size(); ++j) covered[j] += cov[j];
    mark_corners(patches.front(), arc);
  }

  void mark_corners(const TensorPatch& first, ArcFootprint arc) {
    b_.cell(first.id(0, 0)).singular = true;
    b_.cell(first.id(0, first.nb - 1)).singular = true;
    for (double edge : {arc.lo, arc.hi}) {
      const std::size_t k = base_index(edge) % static_cast<std::size_t>(core_ring_.nb);
      const int nb = core_ring_.nb;
      const int right = static_cast<int>(k);
      const int left = (right - 1 + nb) % nb;
      b_.cell(core_ring_.id(core_ring_.na - 1, right)).singular = true;
      b_.cell(core_ring_.id(core_ring_.na - 1, left)).singular = true;
    }
  }

  void build_strip(const StripEnd& s, int id, std::vector<double>& covered) {
    const int nw = static_cast<int>(std::round(s.width / dx_));
    if (nw < 4) {
      throw Error(ErrorKind::ResolutionTooCoarse, "strip end " + std::to_string(id) + " is " + std::to_string(nw) +
                                                       " cells wide, at least 4 are required");
    }
    const double half = 0.5 * s.width;
    const double s0 = std::sqrt(R_ * R_ - half * half);
    const double s_end = std::sqrt(r_max_ * r_max_ - half * half);
    const double ds = s.width / nw;
    const double gamma = grading_ == Grading::Geometric ? dx_ / R_ : 0.0;
    std::vector<double> fa{s0};
    while (fa.back() < s_end) {
      const double step = std::max(ds, gamma * fa.back());
      if (fa.back() + 1.5 * step >= s_end) {
        fa.push_back(s_end);
      } else {
        fa.push_back(fa.back() + step);
      }
    }
    TensorSpec spec;
    spec.metric = Metric::Cartesian;
    spec.axis = s.direction;
    spec.fa = std::move(fa);
    spec.fb = linear_faces(-half, half, ds);
    spec.a_lo = SideKind::External;
    spec.a_hi = SideKind::FarHalf;
    spec.b_lo = side_of(s.side1);
    spec.b_hi = side_of(s.side2);
    const auto patch = b_.add_tensor(
        spec, [id](const PlanePoint&, int, int) { return Classification{CellRole::Domain, id}; }, weight_fn());

    // Glue row 0 to the core ring by overlap in the across-coordinate.
    const int ii = core_ring_.na - 1;
    for (int j = 0; j < core_ring_.nb; ++j) {
      const double t0 = core_ring_.spec.fb[static_cast<std::size_t>(j)];
      const double t1 = core_ring_.spec.fb[static_cast<std::size_t>(j) + 1];
      const double rel0 = std::remainder(t0 - s.direction, kTwoPi);
      const double rel1 = rel0 + (t1 - t0);
      if (rel1 <= -kPi / 2 || rel0 >= kPi / 2) continue;
      const double u0 = R_ * std::sin(std::max(rel0, -kPi / 2));
      const double u1 = R_ * std::sin(std::min(rel1, kPi / 2));
      const CellId core_cell = core_ring_.id(ii, j);
      for (int q = 0; q < patch.nb; ++q) {
        const double b0 = patch.spec.fb[static_cast<std::size_t>(q)];
        const double b1 = patch.spec.fb[static_cast<std::size_t>(q) + 1];
        const double overlap = std::min(u1, b1) - std::max(u0, b0);
        if (overlap <= 1e-12) continue;
        const CellId sc = patch.id(0, q);
        const double dist = euclid(b_.cell(sc).center, b_.cell(core_cell).center);
        b_.add_link(core_cell, sc, overlap / dist, dist);
        covered[static_cast<std::size_t>(j)] += (t1 - t0) * overlap / (u1 - u0);
        b_.cell(core_cell).singular = true;
        b_.cell(sc).singular = true;
      }
    }
  }

  void build_mask(const UserGridEnd& u, int id, std::vector<double>& covered) {
    TensorSpec spec;
    spec.metric = Metric::Cartesian;
    spec.cx = u.x0;
    spec.cy = u.y0;
    for (int i = 0; i <= u.nx; ++i) spec.fa.push_back(i * u.spacing);
    for (int j = 0; j <= u.ny; ++j) spec.fb.push_back(j * u.spacing);
    const double R = R_, rmax = r_max_;
    const auto patch = b_.add_tensor(
        spec,
        [&u, id, R, rmax](const PlanePoint& p, int i, int j) {
          const double r = std::hypot(p.x, p.y);
          if (r < R || r > rmax) return Classification{CellRole::Outside, 0};
          const auto v = u.mask[static_cast<std::size_t>(j) * static_cast<std::size_t>(u.nx) + static_cast<std::size_t>(i)];
          if (v == 1) return Classification{CellRole::Domain, id};
          if (v == 2) return Classification{CellRole::Wall, id};
          return Classification{CellRole::Outside, 0};
        },
        weight_fn());
    const int ii = core_ring_.na - 1;
    for (int i = 0; i < patch.na; ++i) {
      for (int j = 0; j < patch.nb; ++j) {
        const CellId c = patch.id(i, j);
        if (!b_.is_domain(c)) continue;
        const auto& p = b_.cell(c).center;
        const double r = std::hypot(p.x, p.y);
        if (r >= R_ + u.spacing) continue;
        const double theta = core_ring_.spec.fb.front() +
                             wrap_angle(std::atan2(p.y, p.x) - core_ring_.spec.fb.front());
        const auto it = std::upper_bound(core_ring_.spec.fb.begin(), core_ring_.spec.fb.end(), theta);
        const int jj = std::clamp(static_cast<int>(it - core_ring_.spec.fb.begin()) - 1, 0, core_ring_.nb - 1);
        const CellId core_cell = core_ring_.id(ii, jj);
        const double dist = std::max(euclid(p, b_.cell(core_cell).center), 0.5 * u.spacing);
        b_.add_link(core_cell, c, u.spacing / dist, dist);
        const double width =
            core_ring_.spec.fb[static_cast<std::size_t>(jj) + 1] - core_ring_.spec.fb[static_cast<std::size_t>(jj)];
        covered[static_cast<std::size_t>(jj)] = std::min(width, covered[static_cast<std::size_t>(jj)] + u.spacing / R_);
        b_.cell(core_cell).singular = true;
        b_.cell(c).singular = true;
      }
    }
  }

  // ----- sheet layout ------------------------------------------------------

  void build_sheets() {
    const int nsheets = static_cast<int>(m_.num_ends());
    const double r_glue = m_.glue_radius();
    int n_theta = std::max(16, static_cast<int>(std::round(kTwoPi * R_ / dx_)));
    n_theta += (4 - n_theta % 4) % 4;
    const double dtheta = kTwoPi / n_theta;
    const double theta0 = -kPi / 2 - dtheta / 2;  // a cell centred on -pi/2
    std::vector<double> fb(static_cast<std::size_t>(n_theta) + 1);
    for (int j = 0; j <= n_theta; ++j) fb[static_cast<std::size_t>(j)] = theta0 + j * dtheta;

    std::vector<TensorPatch> first_rings;
    for (int sheet = 0; sheet < nsheets; ++sheet) {
      const int id = sheet + 1;
      const auto* para = std::get_if<ParabolaExteriorEnd>(&m_.ends()[static_cast<std::size_t>(sheet)].shape);

      std::vector<RadialBand> bands;
      if (grading_ == Grading::Geometric) {
        auto inner = log_faces(r_glue, R_, dtheta);
        auto outer = log_faces(R_, r_max_, std::log(inner[1] / inner[0]));
        inner.insert(inner.end(), outer.begin() + 1, outer.end());
        bands.push_back({std::move(inner), fb});
      } else {
        bands.push_back({linear_faces(r_glue, R_, dx_), fb});
        auto rest = polar_bands(R_, r_max_, refine(fb, 2), dx_, Grading::Uniform);
        bands.insert(bands.end(), rest.begin(), rest.end());
      }

      std::vector<TensorPatch> patches;
      for (std::size_t bnd = 0; bnd < bands.size(); ++bnd) {
        TensorSpec spec;
        spec.metric = Metric::Polar;
        spec.sheet = sheet;
        spec.fa = bands[bnd].fa;
        spec.fb = bands[bnd].fb;
        spec.b_lo = spec.b_hi = SideKind::Periodic;
        spec.a_lo = bnd == 0 ? (nsheets == 2 ? SideKind::External : SideKind::Neumann) : SideKind::External;
        spec.a_hi = bnd + 1 == bands.size() ? SideKind::FarHalf : SideKind::External;
        const double R = R_;
        const std::vector<double> faces = spec.fb;
        const std::vector<double> rfaces = spec.fa;
        auto classify = [para, id, R, faces, rfaces](const PlanePoint& p, int i, int j) {
          const double r = std::hypot(p.x, p.y);
          if (r <= R) return Classification{CellRole::Domain, 0};
          if (para != nullptr) {
            const CellRole blocked = para->bc == BoundaryCondition::Dirichlet ? CellRole::Wall : CellRole::Outside;
            const double q1 = p.x, q2 = p.y - para->vertex_distance;
            if (q2 > q1 * q1) return Classification{blocked, id};
            // Keep the parabola connected once it is thinner than a cell.
            const double r_in = rfaces[static_cast<std::size_t>(i)];
            const double lo = faces[static_cast<std::size_t>(j)], hi = faces[static_cast<std::size_t>(j) + 1];
            double up = kPi / 2;
            while (up < lo) up += kTwoPi;
            while (up >= hi) up -= kTwoPi;
            if (r_in >= para->vertex_distance && up >= lo && up < hi) return Classification{blocked, id};
          }
          return Classification{CellRole::Domain, id};
        };
        patches.push_back(b_.add_tensor(spec, classify, weight_fn()));
      }
      for (std::size_t bnd = 0; bnd + 1 < patches.size(); ++bnd) glue_polar_rings(b_, patches[bnd], patches[bnd + 1]);
      first_rings.push_back(patches.front());
    }

    if (nsheets == 2) {
      const auto& a = first_rings[0];
      const auto& c = first_rings[1];
      for (int j = 0; j < a.nb; ++j) {
        const double rc = a.ac(0);
        const double cond = dtheta / (2.0 * std::log(rc / r_glue));
        b_.add_link(a.id(0, j), c.id(0, j), cond, 2.0 * (rc - r_glue));
      }
    }
    core_center_ = grid_.locate({0, 0.0, -0.5 * (r_glue + R_)});
  }

  // ----- metadata ----------------------------------------------------------

  CellId nearest_of_end(const PlanePoint& p, int end) const {
    CellId best = kNoCell;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid_.size(); ++k) {
      const auto id = static_cast<CellId>(k);
      const auto& c = grid_.cell(id);
      if (c.end_id != end || c.center.sheet != p.sheet || !grid_.in_domain(id)) continue;
      const double d = euclid(c.center, p);
      if (d < best_d) {
        best_d = d;
        best = id;
      }
    }
    if (best == kNoCell) {
      throw Error(ErrorKind::ResolutionTooCoarse, "end " + std::to_string(end) + " has no domain cells");
    }
    return best;
  }

  void finish_meta() {
    GridBuilder::Meta meta;
    meta.spacing = dx_;
    meta.truncation_radius = r_max_;
    meta.core_radius = R_;
    meta.num_ends = static_cast<int>(m_.num_ends());
    meta.grading = grading_;
    meta.core_center = core_center_;
    for (int e = 1; e <= meta.num_ends; ++e) {
      meta.reference_cells.push_back(nearest_of_end(m_.reference_points()[static_cast<std::size_t>(e - 1)], e));
    }
    meta.manifold = std::make_shared<const ManifoldWithEnds>(m_);
    b_.set_meta(std::move(meta));
  }

  const ManifoldWithEnds& m_;
  double dx_, r_max_;
  Grading grading_;
  double R_;
  Grid grid_;
  GridBuilder b_;
  std::vector<double> base_;
  TensorPatch core_ring_;
  CellId core_center_ = kNoCell;
};

}  // namespace

Grid rasterize(const ManifoldWithEnds& manifold, double dx, double r_max, Grading grading) {
  if (!(dx > 0.0)) throw Error(ErrorKind::InvalidArgument, "grid spacing must be positive");
  if (!(r_max > manifold.core_radius())) {
    throw Error(ErrorKind::InvalidArgument, "truncation radius must exceed the core radius");
  }
  if (dx > manifold.core_radius()) {
    throw Error(ErrorKind::ResolutionTooCoarse, "grid spacing exceeds the core radius");
  }
  return Rasterizer(manifold, dx, r_max, grading).run();
}

}  // namespace hkends
