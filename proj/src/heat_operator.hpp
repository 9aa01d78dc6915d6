#pragma once

// Domain-restricted heat operator in CSR form: (K u)_i = diag_i u_i -
// sum_j cond_ij u_j over domain neighbours; absorbing cells only add to diag.

#include <Eigen/SparseCore>
#include <vector>

#include "hkends/grid.hpp"

namespace hkends {

struct HeatOperator {
  explicit HeatOperator(const Grid& grid);

  std::vector<int> index;     // cell -> unknown, -1 off the domain
  std::vector<CellId> cells;  // unknown -> cell
  std::vector<std::size_t> offsets;
  std::vector<int> nbr;
  std::vector<double> cond, diag, mass;

  double max_rate() const;
  void explicit_step(const std::vector<double>& u, std::vector<double>& out, double dt) const;
  /// M + dt K
  Eigen::SparseMatrix<double> shifted(double dt) const;
  std::vector<double> gather(const std::vector<double>& full) const;
  void scatter(const std::vector<double>& u, std::vector<double>& full) const;
  double mass_of(const std::vector<double>& u) const;
};

}  // namespace hkends
