#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "grid_builder.hpp"
#include "hkends/error.hpp"

namespace hkends {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

const char* to_string(CellClass c) noexcept {
  switch (c) {
    case CellClass::Interior: return "Interior";
    case CellClass::NeumannBdry: return "NeumannBdry";
    case CellClass::DirichletBdry: return "DirichletBdry";
    case CellClass::Outside: return "Outside";
    case CellClass::Core: return "Core";
  }
  return "?";
}

double euclid(const PlanePoint& p, const PlanePoint& q) { return std::hypot(p.x - q.x, p.y - q.y); }

// ---------------------------------------------------------------------------
// Grid

std::span<const Link> Grid::links(CellId id) const {
  const auto k = static_cast<std::size_t>(id);
  return {link_data_.data() + link_offsets_[k], link_offsets_[k + 1] - link_offsets_[k]};
}

std::span<const Link> Grid::path_links(CellId id) const {
  const auto k = static_cast<std::size_t>(id);
  return {path_data_.data() + path_offsets_[k], path_offsets_[k + 1] - path_offsets_[k]};
}

CellId Grid::reference_cell(int end) const {
  if (end < 1 || end > num_ends_) throw Error(ErrorKind::InvalidArgument, "end index out of range");
  return reference_cells_[static_cast<std::size_t>(end - 1)];
}

CellId Grid::at(int i, int j) const {
  if (!is_lattice() || i < 0 || j < 0 || i >= lattice_nx_ || j >= lattice_ny_) return kNoCell;
  return patches_.front().ids[static_cast<std::size_t>(i) * static_cast<std::size_t>(lattice_ny_) + j];
}

CellId Grid::locate(const PlanePoint& p) const {
  for (const auto& patch : patches_) {
    if (patch.sheet != p.sheet) continue;
    const double dx = p.x - patch.cx, dy = p.y - patch.cy;
    if (patch.kind == PatchIndex::Kind::Disk) {
      if (std::hypot(dx, dy) < patch.fa.front()) return patch.ids.front();
      continue;
    }
    double a = 0.0, b = 0.0;
    if (patch.kind == PatchIndex::Kind::Polar) {
      a = std::hypot(dx, dy);
      b = patch.fb.front() + wrap_angle(std::atan2(dy, dx) - patch.fb.front());
    } else {
      const double ca = std::cos(patch.axis), sa = std::sin(patch.axis);
      a = dx * ca + dy * sa;
      b = -dx * sa + dy * ca;
    }
    if (a < patch.fa.front() || a >= patch.fa.back() || b < patch.fb.front() || b >= patch.fb.back()) continue;
    const auto i = static_cast<std::size_t>(std::upper_bound(patch.fa.begin(), patch.fa.end(), a) - patch.fa.begin() - 1);
    const auto j = static_cast<std::size_t>(std::upper_bound(patch.fb.begin(), patch.fb.end(), b) - patch.fb.begin() - 1);
    const CellId id = patch.ids[i * (patch.fb.size() - 1) + j];
    if (id != kNoCell) return id;
  }
  CellId best = kNoCell;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    if (cells_[k].center.sheet != p.sheet) continue;
    const double d = euclid(cells_[k].center, p);
    if (d < best_d) {
      best_d = d;
      best = static_cast<CellId>(k);
    }
  }
  return best;
}

CellId Grid::locate_domain(const PlanePoint& p) const {
  const CellId id = locate(p);
  if (id != kNoCell && in_domain(id)) return id;
  CellId best = kNoCell;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    const auto cid = static_cast<CellId>(k);
    if (cells_[k].center.sheet != p.sheet || !in_domain(cid)) continue;
    const double d = euclid(cells_[k].center, p);
    if (d < best_d) {
      best_d = d;
      best = cid;
    }
  }
  if (best == kNoCell) throw Error(ErrorKind::OutsideDomain, "no domain cell on the requested sheet");
  return best;
}

std::vector<CellId> Grid::domain_cells() const {
  std::vector<CellId> out;
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    if (in_domain(static_cast<CellId>(k))) out.push_back(static_cast<CellId>(k));
  }
  return out;
}

bool Grid::has_true_dirichlet() const {
  return std::any_of(cells_.begin(), cells_.end(),
                     [](const Cell& c) { return c.cls == CellClass::DirichletBdry && !c.far_ring; });
}

double Grid::max_rate() const {
  double best = 0.0;
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    const auto id = static_cast<CellId>(k);
    if (!in_domain(id)) continue;
    double s = 0.0;
    for (const auto& l : links(id)) s += l.conductance;
    best = std::max(best, s / measure(id));
  }
  return best;
}

// ---------------------------------------------------------------------------
// TensorPatch

double TensorPatch::ac(int i) const {
  const double lo = spec.fa[static_cast<std::size_t>(i)], hi = spec.fa[static_cast<std::size_t>(i) + 1];
  return spec.metric == Metric::Polar ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
}

double TensorPatch::bc(int j) const {
  return 0.5 * (spec.fb[static_cast<std::size_t>(j)] + spec.fb[static_cast<std::size_t>(j) + 1]);
}

PlanePoint TensorPatch::world(double a, double b) const {
  if (spec.metric == Metric::Polar) {
    return {spec.sheet, spec.cx + a * std::cos(b), spec.cy + a * std::sin(b)};
  }
  const double ca = std::cos(spec.axis), sa = std::sin(spec.axis);
  return {spec.sheet, spec.cx + a * ca - b * sa, spec.cy + a * sa + b * ca};
}

// ---------------------------------------------------------------------------
// GridBuilder

CellId GridBuilder::add_cell(const Cell& c) {
  grid_.cells_.push_back(c);
  reflecting_.push_back(false);
  roles_.push_back(CellRole::Outside);
  return static_cast<CellId>(grid_.cells_.size() - 1);
}

void GridBuilder::add_link(CellId a, CellId b, double conductance, double length) {
  links_.push_back({a, b, conductance, length});
  paths_.push_back({a, b, 0.0, length});
}

void GridBuilder::add_path(CellId a, CellId b, double length) { paths_.push_back({a, b, 0.0, length}); }

CellId GridBuilder::add_ghost(CellId owner, const PlanePoint& at, double conductance, double length, bool far) {
  Cell g;
  g.center = at;
  g.cls = CellClass::DirichletBdry;
  g.end_id = cell(owner).end_id;
  g.far_ring = far;
  g.weight = cell(owner).weight;
  const CellId id = add_cell(g);
  roles_.back() = CellRole::Wall;
  add_link(owner, id, conductance, length);
  return id;
}

void GridBuilder::set_meta(Meta meta) {
  grid_.spacing_ = meta.spacing;
  grid_.truncation_radius_ = meta.truncation_radius;
  grid_.core_radius_ = meta.core_radius;
  grid_.num_ends_ = meta.num_ends;
  grid_.grading_ = meta.grading;
  grid_.core_center_ = meta.core_center;
  grid_.reference_cells_ = std::move(meta.reference_cells);
  grid_.lattice_nx_ = meta.lattice_nx;
  grid_.lattice_ny_ = meta.lattice_ny;
  grid_.manifold_ = std::move(meta.manifold);
}

void GridBuilder::add_disk_index(int sheet, double radius, CellId id) {
  Grid::PatchIndex idx;
  idx.kind = Grid::PatchIndex::Kind::Disk;
  idx.sheet = sheet;
  idx.fa = {radius};
  idx.ids = {id};
  grid_.patches_.push_back(std::move(idx));
  roles_[static_cast<std::size_t>(id)] = CellRole::Domain;
}

TensorPatch GridBuilder::add_tensor(const TensorSpec& spec, const Classifier& classify,
                                    const std::function<double(const PlanePoint&)>& weight) {
  TensorPatch p;
  p.spec = spec;
  p.na = static_cast<int>(spec.fa.size()) - 1;
  p.nb = static_cast<int>(spec.fb.size()) - 1;
  if (p.na < 1 || p.nb < 1) throw Error(ErrorKind::InvalidArgument, "empty tensor patch");
  p.ids.resize(static_cast<std::size_t>(p.na) * p.nb);
  const bool polar = spec.metric == Metric::Polar;
  const bool periodic = spec.b_lo == SideKind::Periodic;

  auto da = [&](int i) { return spec.fa[static_cast<std::size_t>(i) + 1] - spec.fa[static_cast<std::size_t>(i)]; };
  auto db = [&](int j) { return spec.fb[static_cast<std::size_t>(j) + 1] - spec.fb[static_cast<std::size_t>(j)]; };
  auto log_da = [&](int i) {
    return std::log(spec.fa[static_cast<std::size_t>(i) + 1] / spec.fa[static_cast<std::size_t>(i)]);
  };

  for (int i = 0; i < p.na; ++i) {
    for (int j = 0; j < p.nb; ++j) {
      Cell c;
      c.center = p.world(p.ac(i), p.bc(j));
      const auto cls = classify(c.center, i, j);
      const double lo = spec.fa[static_cast<std::size_t>(i)], hi = spec.fa[static_cast<std::size_t>(i) + 1];
      c.area = polar ? 0.5 * (hi * hi - lo * lo) * db(j) : da(i) * db(j);
      c.weight = weight(c.center);
      c.end_id = cls.end_id;
      c.cls = CellClass::Outside;
      const CellId id = add_cell(c);
      roles_.back() = cls.role;
      p.ids[static_cast<std::size_t>(i) * p.nb + j] = id;
    }
  }

  auto role = [&](CellId id) { return roles_[static_cast<std::size_t>(id)]; };
  auto connect = [&](CellId a, CellId b, double cond) {
    const CellRole ra = role(a), rb = role(b);
    if (ra == CellRole::Domain && rb == CellRole::Domain) {
      add_link(a, b, cond, euclid(cell(a).center, cell(b).center));
    } else if (ra == CellRole::Domain && rb == CellRole::Wall) {
      add_link(a, b, cond, euclid(cell(a).center, cell(b).center));
      cell(b).cls = CellClass::DirichletBdry;
      cell(b).end_id = cell(a).end_id;
    } else if (rb == CellRole::Domain && ra == CellRole::Wall) {
      add_link(a, b, cond, euclid(cell(a).center, cell(b).center));
      cell(a).cls = CellClass::DirichletBdry;
      cell(a).end_id = cell(b).end_id;
    } else if (ra == CellRole::Domain && rb == CellRole::Outside) {
      reflecting_[static_cast<std::size_t>(a)] = true;
    } else if (rb == CellRole::Domain && ra == CellRole::Outside) {
      reflecting_[static_cast<std::size_t>(b)] = true;
    }
  };

  // a-direction faces
  for (int i = 0; i + 1 < p.na; ++i) {
    const double dist = polar ? std::log(p.ac(i + 1) / p.ac(i)) : p.ac(i + 1) - p.ac(i);
    for (int j = 0; j < p.nb; ++j) connect(p.id(i, j), p.id(i + 1, j), db(j) / dist);
  }
  // b-direction faces
  const int nbl = periodic ? p.nb : p.nb - 1;
  for (int j = 0; j < nbl; ++j) {
    const int jn = (j + 1) % p.nb;
    double dist = p.bc(jn) - p.bc(j);
    if (jn == 0) dist += spec.fb.back() - spec.fb.front();
    for (int i = 0; i < p.na; ++i) {
      const double cond = (polar ? log_da(i) : da(i)) / dist;
      connect(p.id(i, j), p.id(i, jn), cond);
    }
  }
  // diagonal path edges
  for (int i = 0; i + 1 < p.na; ++i) {
    for (int j = 0; j < nbl; ++j) {
      const int jn = (j + 1) % p.nb;
      const CellId a = p.id(i, j), b = p.id(i + 1, jn), c = p.id(i, jn), d = p.id(i + 1, j);
      if (role(a) == CellRole::Domain && role(b) == CellRole::Domain) add_path(a, b, euclid(cell(a).center, cell(b).center));
      if (role(c) == CellRole::Domain && role(d) == CellRole::Domain) add_path(c, d, euclid(cell(c).center, cell(d).center));
    }
  }

  // patch sides
  auto side = [&](SideKind kind, CellId owner, double face_a, double face_b, bool a_face, int i, int j) {
    if (role(owner) != CellRole::Domain) return;
    if (kind == SideKind::Neumann) {
      reflecting_[static_cast<std::size_t>(owner)] = true;
      return;
    }
    if (kind != SideKind::DirichletHalf && kind != SideKind::FarHalf) return;
    double cond = 0.0;
    PlanePoint at;
    if (a_face) {
      const double dist = polar ? std::abs(std::log(p.ac(i) / face_a)) : std::abs(p.ac(i) - face_a);
      cond = db(j) / dist;
      at = p.world(face_a, p.bc(j));
    } else {
      const double dist = std::abs(p.bc(j) - face_b);
      cond = (polar ? log_da(i) : da(i)) / dist;
      at = p.world(p.ac(i), face_b);
    }
    add_ghost(owner, at, cond, euclid(cell(owner).center, at), kind == SideKind::FarHalf);
  };
  for (int j = 0; j < p.nb; ++j) {
    side(spec.a_lo, p.id(0, j), spec.fa.front(), 0.0, true, 0, j);
    side(spec.a_hi, p.id(p.na - 1, j), spec.fa.back(), 0.0, true, p.na - 1, j);
  }
  if (!periodic) {
    for (int i = 0; i < p.na; ++i) {
      side(spec.b_lo, p.id(i, 0), 0.0, spec.fb.front(), false, i, 0);
      side(spec.b_hi, p.id(i, p.nb - 1), 0.0, spec.fb.back(), false, i, p.nb - 1);
    }
  }

  Grid::PatchIndex idx;
  idx.kind = polar ? Grid::PatchIndex::Kind::Polar : Grid::PatchIndex::Kind::Cartesian;
  idx.sheet = spec.sheet;
  idx.cx = spec.cx;
  idx.cy = spec.cy;
  idx.axis = spec.axis;
  idx.fa = spec.fa;
  idx.fb = spec.fb;
  idx.ids = p.ids;
  grid_.patches_.push_back(std::move(idx));
  return p;
}

void GridBuilder::finish() {
  auto& cells = grid_.cells_;
  const std::size_t n = cells.size();
  for (std::size_t k = 0; k < n; ++k) {
    auto& c = cells[k];
    if (roles_[k] == CellRole::Domain) {
      if (c.end_id == 0) {
        c.cls = CellClass::Core;
      } else {
        c.cls = reflecting_[k] ? CellClass::NeumannBdry : CellClass::Interior;
      }
    } else if (c.cls != CellClass::DirichletBdry) {
      c.cls = CellClass::Outside;
    }
  }

  // Face weight: harmonic mean of the two cell weights.
  for (auto& l : links_) {
    const double wa = cells[static_cast<std::size_t>(l.a)].weight, wb = cells[static_cast<std::size_t>(l.b)].weight;
    if (wa != 1.0 || wb != 1.0) l.conductance *= 2.0 * wa * wb / (wa + wb);
  }

  // Merge duplicate links (conductances add, path lengths take the minimum).
  auto compress = [n](std::vector<RawLink>& raw, bool sum, std::vector<std::size_t>& offsets,
                      std::vector<Link>& data) {
    std::vector<std::map<CellId, Link>> adj(n);
    for (const auto& l : raw) {
      if (l.a == l.b) continue;
      for (int dir = 0; dir < 2; ++dir) {
        const CellId from = dir == 0 ? l.a : l.b;
        const CellId to = dir == 0 ? l.b : l.a;
        auto [it, inserted] = adj[static_cast<std::size_t>(from)].try_emplace(to, Link{to, l.conductance, l.length});
        if (!inserted) {
          if (sum) it->second.conductance += l.conductance;
          it->second.length = std::min(it->second.length, l.length);
        }
      }
    }
    offsets.assign(n + 1, 0);
    data.clear();
    for (std::size_t k = 0; k < n; ++k) {
      offsets[k] = data.size();
      for (const auto& [to, link] : adj[k]) data.push_back(link);
    }
    offsets[n] = data.size();
    raw.clear();
    raw.shrink_to_fit();
  };
  compress(links_, true, grid_.link_offsets_, grid_.link_data_);
  compress(paths_, false, grid_.path_offsets_, grid_.path_data_);
}

std::vector<double> glue_polar_rings(GridBuilder& b, const TensorPatch& inner, const TensorPatch& outer) {
  const int ii = inner.na - 1;
  std::vector<double> covered(static_cast<std::size_t>(inner.nb), 0.0);
  for (int j = 0; j < inner.nb; ++j) {
    const CellId a = inner.id(ii, j);
    if (!b.is_domain(a)) continue;
    const double a_lo = inner.spec.fb[static_cast<std::size_t>(j)];
    const double a_hi = inner.spec.fb[static_cast<std::size_t>(j) + 1];
    for (int k = 0; k < outer.nb; ++k) {
      const CellId c = outer.id(0, k);
      if (!b.is_domain(c)) continue;
      double lo = outer.spec.fb[static_cast<std::size_t>(k)];
      double hi = outer.spec.fb[static_cast<std::size_t>(k) + 1];
      // Bring [lo, hi] next to [a_lo, a_hi] modulo 2pi.
      const double shift = kTwoPi * std::round(((a_lo + a_hi) - (lo + hi)) / (2.0 * kTwoPi));
      lo += shift;
      hi += shift;
      const double overlap = std::min(a_hi, hi) - std::max(a_lo, lo);
      if (overlap <= 1e-12) continue;
      const double dist = std::log(outer.ac(0) / inner.ac(ii));
      b.add_link(a, c, overlap / dist, euclid(b.cell(a).center, b.cell(c).center));
      covered[static_cast<std::size_t>(j)] += overlap;
      const bool conforming = std::abs(lo - a_lo) < 1e-9 && std::abs(hi - a_hi) < 1e-9;
      if (!conforming) {
        b.cell(a).singular = true;
        b.cell(c).singular = true;
      }
    }
  }
  return covered;
}

// ---------------------------------------------------------------------------
// Lattice grids

namespace {

Grid lattice_from(int nx, int ny, double dx, double x0, double y0, const std::function<std::uint8_t(int, int)>& value,
                  BoxBoundary bc) {
  if (nx < 1 || ny < 1 || !(dx > 0.0)) throw Error(ErrorKind::InvalidArgument, "lattice needs positive size");
  Grid g;
  GridBuilder b(g);
  TensorSpec spec;
  spec.metric = Metric::Cartesian;
  spec.cx = x0;
  spec.cy = y0;
  for (int i = 0; i <= nx; ++i) spec.fa.push_back(i * dx);
  for (int j = 0; j <= ny; ++j) spec.fb.push_back(j * dx);
  spec.a_lo = spec.a_hi = spec.b_lo = spec.b_hi = SideKind::External;  // handled below
  auto patch = b.add_tensor(
      spec,
      [&](const PlanePoint&, int i, int j) {
        switch (value(i, j)) {
          case 1: return Classification{CellRole::Domain, 1};
          case 2: return Classification{CellRole::Wall, 1};
          case 3: return Classification{CellRole::Domain, 0};
          default: return Classification{CellRole::Outside, 0};
        }
      },
      [](const PlanePoint&) { return 1.0; });

  auto edge = [&](BoundaryCondition kind, bool far, int i, int j, double gx, double gy) {
    const CellId owner = patch.id(i, j);
    if (value(i, j) != 1 && value(i, j) != 3) return;
    if (kind == BoundaryCondition::Neumann) {
      b.mark_reflecting(owner);
    } else {
      b.add_ghost(owner, {0, gx, gy}, 1.0, dx, far);
    }
  };
  for (int j = 0; j < ny; ++j) {
    const double y = y0 + (j + 0.5) * dx;
    edge(bc.left, bc.far_left, 0, j, x0 - 0.5 * dx, y);
    edge(bc.right, bc.far_right, nx - 1, j, x0 + (nx + 0.5) * dx, y);
  }
  for (int i = 0; i < nx; ++i) {
    const double x = x0 + (i + 0.5) * dx;
    edge(bc.bottom, bc.far_bottom, i, 0, x, y0 - 0.5 * dx);
    edge(bc.top, bc.far_top, i, ny - 1, x, y0 + (ny + 0.5) * dx);
  }
  b.finish();

  GridBuilder::Meta meta;
  meta.spacing = dx;
  meta.truncation_radius = std::numeric_limits<double>::infinity();
  meta.grading = Grading::Uniform;
  meta.lattice_nx = nx;
  meta.lattice_ny = ny;
  bool any_end = false;
  double cxs = 0, cys = 0;
  int ncore = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto& c = g.cell(static_cast<CellId>(k));
    if (c.cls == CellClass::Core) {
      cxs += c.center.x;
      cys += c.center.y;
      ++ncore;
    }
    if (c.cls == CellClass::Interior || c.cls == CellClass::NeumannBdry) any_end = true;
  }
  meta.num_ends = any_end ? 1 : 0;
  if (ncore > 0) {
    // core cell nearest to the core centroid
    double best = std::numeric_limits<double>::infinity();
    const PlanePoint centroid{0, cxs / ncore, cys / ncore};
    for (std::size_t k = 0; k < g.size(); ++k) {
      const auto& c = g.cell(static_cast<CellId>(k));
      if (c.cls != CellClass::Core) continue;
      const double d = euclid(c.center, centroid);
      if (d < best) {
        best = d;
        meta.core_center = static_cast<CellId>(k);
      }
    }
  }
  if (any_end) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      const auto id = static_cast<CellId>(k);
      if (g.in_domain(id) && g.end_id(id) == 1) {
        meta.reference_cells.push_back(id);
        break;
      }
    }
  }
  b.set_meta(std::move(meta));
  return g;
}

}  // namespace

Grid make_box(int nx, int ny, double dx, BoxBoundary bc, double x0, double y0) {
  return lattice_from(nx, ny, dx, x0, y0, [](int, int) -> std::uint8_t { return 1; }, bc);
}

Grid make_mask_grid(const UserGridEnd& mask) {
  if (mask.mask.size() != static_cast<std::size_t>(mask.nx) * static_cast<std::size_t>(mask.ny)) {
    throw Error(ErrorKind::InvalidArgument, "mask size does not match nx * ny");
  }
  return lattice_from(
      mask.nx, mask.ny, mask.spacing, mask.x0, mask.y0,
      [&](int i, int j) { return mask.mask[static_cast<std::size_t>(j) * mask.nx + i]; }, BoxBoundary{});
}

}  // namespace hkends
