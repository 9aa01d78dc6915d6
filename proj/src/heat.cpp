#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "heat_operator.hpp"
#include "hkends/error.hpp"
#include "hkends/solver.hpp"

namespace hkends {

HeatOperator::HeatOperator(const Grid& grid) {
  const std::size_t n = grid.size();
  index.assign(n, -1);
  for (CellId id = 0; id < static_cast<CellId>(n); ++id) {
    if (grid.in_domain(id)) {
      index[static_cast<std::size_t>(id)] = static_cast<int>(cells.size());
      cells.push_back(id);
    }
  }
  offsets.push_back(0);
  for (CellId id : cells) {
    double d = 0.0;
    for (const auto& l : grid.links(id)) {
      d += l.conductance;
      const int j = index[static_cast<std::size_t>(l.to)];
      if (j >= 0) {
        nbr.push_back(j);
        cond.push_back(l.conductance);
      }
    }
    diag.push_back(d);
    mass.push_back(grid.measure(id));
    offsets.push_back(nbr.size());
  }
}

double HeatOperator::max_rate() const {
  double best = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) best = std::max(best, diag[i] / mass[i]);
  return best;
}

void HeatOperator::explicit_step(const std::vector<double>& u, std::vector<double>& out, double dt) const {
  out.resize(u.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    double flux = -diag[i] * u[i];
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) flux += cond[k] * u[static_cast<std::size_t>(nbr[k])];
    out[i] = u[i] + dt * flux / mass[i];
  }
}

Eigen::SparseMatrix<double> HeatOperator::shifted(double dt) const {
  const auto m = static_cast<Eigen::Index>(cells.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(nbr.size() + cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    trip.emplace_back(r, r, mass[i] + dt * diag[i]);
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) trip.emplace_back(r, nbr[k], -dt * cond[k]);
  }
  Eigen::SparseMatrix<double> A(m, m);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

std::vector<double> HeatOperator::gather(const std::vector<double>& full) const {
  std::vector<double> u(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) u[i] = full[static_cast<std::size_t>(cells[i])];
  return u;
}

void HeatOperator::scatter(const std::vector<double>& u, std::vector<double>& full) const {
  for (std::size_t i = 0; i < cells.size(); ++i) full[static_cast<std::size_t>(cells[i])] = u[i];
}

double HeatOperator::mass_of(const std::vector<double>& u) const {
  double s = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) s += mass[i] * u[i];
  return s;
}

// ---------------------------------------------------------------------------

double total_mass(const Grid& grid, const std::vector<double>& values) {
  double s = 0.0;
  for (CellId id = 0; id < static_cast<CellId>(grid.size()); ++id) {
    if (grid.in_domain(id)) s += grid.measure(id) * values[static_cast<std::size_t>(id)];
  }
  return s;
}

HeatField point_source(const Grid& grid, CellId x) {
  if (x < 0 || static_cast<std::size_t>(x) >= grid.size() || !grid.in_domain(x)) {
    throw Error(ErrorKind::OutsideDomain, "heat source must be a domain cell");
  }
  HeatField f;
  f.values.assign(grid.size(), 0.0);
  f.values[static_cast<std::size_t>(x)] = 1.0 / grid.measure(x);
  f.total_mass = 1.0;
  return f;
}

HeatField step_heat(const HeatField& field, const Grid& grid, double dt) {
  const HeatOperator op(grid);
  if (!(dt > 0.0) || dt * op.max_rate() > 1.0 + 1e-12) {
    throw Error(ErrorKind::UnstableStep, "explicit step exceeds the stability bound 1/max_rate = " +
                                             std::to_string(1.0 / op.max_rate()));
  }
  std::vector<double> u = op.gather(field.values), next;
  op.explicit_step(u, next, dt);
  HeatField out;
  out.values.assign(grid.size(), 0.0);
  op.scatter(next, out.values);
  out.t = field.t + dt;
  out.total_mass = op.mass_of(next);
  return out;
}

HeatField step_heat_implicit(const HeatField& field, const Grid& grid, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "time step must be positive");
  const HeatOperator op(grid);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(op.shifted(dt));
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "implicit heat step factorisation failed");
  const auto u = op.gather(field.values);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(u.size()));
  for (std::size_t i = 0; i < u.size(); ++i) rhs[static_cast<Eigen::Index>(i)] = op.mass[i] * u[i];
  const Eigen::VectorXd x = ldlt.solve(rhs);
  std::vector<double> next(x.data(), x.data() + x.size());
  HeatField out;
  out.values.assign(grid.size(), 0.0);
  op.scatter(next, out.values);
  out.t = field.t + dt;
  out.total_mass = op.mass_of(next);
  return out;
}

double min_reliable_time(const Grid& grid) { return 25.0 * grid.spacing() * grid.spacing(); }

// ---------------------------------------------------------------------------

struct HeatEvolver::Impl {
  explicit Impl(const Grid& g) : op(g) {}
  HeatOperator op;
  std::map<double, std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>> factors;
  std::vector<double> u, scratch;

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& factor(double dt) {
    auto& slot = factors[dt];
    if (!slot) {
      slot = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(op.shifted(dt));
      if (slot->info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "implicit heat step factorisation failed");
    }
    return *slot;
  }

  void implicit_step(double dt, bool keep) {
    auto& f = factor(dt);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(u.size()));
    for (std::size_t i = 0; i < u.size(); ++i) rhs[static_cast<Eigen::Index>(i)] = op.mass[i] * u[i];
    const Eigen::VectorXd x = f.solve(rhs);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = x[static_cast<Eigen::Index>(i)];
    if (!keep) factors.erase(dt);
  }
};

HeatEvolver::HeatEvolver(const Grid& grid, HeatOptions options)
    : grid_(&grid), options_(options), impl_(std::make_unique<Impl>(grid)) {
  const double bound = 1.0 / impl_->op.max_rate();
  const double dx = grid.spacing();
  if (options_.dt > 0.0) {
    if (!options_.implicit && options_.dt > bound * (1.0 + 1e-12)) {
      throw Error(ErrorKind::UnstableStep, "explicit step " + std::to_string(options_.dt) +
                                               " exceeds the stability bound " + std::to_string(bound));
    }
    dt_ = options_.dt;
  } else {
    dt_ = std::min(0.2 * dx * dx, 0.8 * bound);
  }
  if (options_.implicit && !(options_.epsilon > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "implicit step ratio must be positive");
  }
}

HeatEvolver::~HeatEvolver() = default;
HeatEvolver::HeatEvolver(HeatEvolver&&) noexcept = default;
HeatEvolver& HeatEvolver::operator=(HeatEvolver&&) noexcept = default;

void HeatEvolver::advance(HeatField& field, double t_target) {
  if (t_target < field.t) throw Error(ErrorKind::InvalidArgument, "cannot evolve backwards in time");
  auto& im = *impl_;
  im.u = im.op.gather(field.values);
  const double tol = 1e-12 * std::max(1.0, t_target);
  if (!options_.implicit) {
    while (field.t < t_target - tol) {
      const double step = std::min(dt_, t_target - field.t);
      im.op.explicit_step(im.u, im.scratch, step);
      std::swap(im.u, im.scratch);
      field.t += step;
    }
  } else {
    // dt doubles whenever t passes a block boundary t_floor * 2^k.
    const double t_floor = 50.0 * dt_;
    while (field.t < t_target - tol) {
      const int k = field.t < t_floor ? 0 : static_cast<int>(std::floor(std::log2(field.t / t_floor)));
      const double block_dt = options_.epsilon * t_floor * std::ldexp(1.0, k);
      const double dt_k = std::max(block_dt, dt_);
      if (t_target - field.t < dt_k * (1.0 - 1e-9)) {
        im.implicit_step(t_target - field.t, false);
        field.t = t_target;
      } else {
        im.implicit_step(dt_k, true);
        field.t += dt_k;
      }
    }
  }
  field.t = t_target;
  field.values.assign(grid_->size(), 0.0);
  im.op.scatter(im.u, field.values);
  field.total_mass = im.op.mass_of(im.u);
}

std::vector<HeatField> HeatEvolver::snapshots(CellId x, const std::vector<double>& times) {
  if (!std::is_sorted(times.begin(), times.end())) throw Error(ErrorKind::InvalidArgument, "times must increase");
  HeatField f = point_source(*grid_, x);
  std::vector<HeatField> out;
  out.reserve(times.size());
  for (double t : times) {
    advance(f, t);
    out.push_back(f);
  }
  return out;
}

std::vector<std::vector<double>> heat_kernel_probes(const Grid& grid, CellId x, const std::vector<CellId>& ys,
                                                    const std::vector<double>& times, HeatOptions options) {
  if (!std::is_sorted(times.begin(), times.end())) throw Error(ErrorKind::InvalidArgument, "times must increase");
  for (CellId y : ys) {
    if (y < 0 || static_cast<std::size_t>(y) >= grid.size()) throw Error(ErrorKind::InvalidArgument, "probe out of range");
  }
  HeatEvolver ev(grid, options);
  HeatField f = point_source(grid, x);
  const double t_ok = min_reliable_time(grid);
  std::vector<std::vector<double>> out;
  for (double t : times) {
    ev.advance(f, t);
    std::vector<double> row;
    for (CellId y : ys) {
      row.push_back(t < t_ok * (1.0 - 1e-12) ? std::numeric_limits<double>::quiet_NaN()
                                             : f.values[static_cast<std::size_t>(y)]);
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<double> heat_kernel_numeric(const Grid& grid, CellId x, CellId y, const std::vector<double>& times,
                                        HeatOptions options) {
  const auto rows = heat_kernel_probes(grid, x, {y}, times, options);
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r.front());
  return out;
}

}  // namespace hkends
