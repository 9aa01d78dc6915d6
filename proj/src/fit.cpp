#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "hkends/error.hpp"
#include "hkends/solver.hpp"

namespace hkends {

const char* to_string(DecayModel m) noexcept {
  switch (m) {
    case DecayModel::Power: return "power";
    case DecayModel::PowerLog: return "power-log";
    case DecayModel::LogClass: return "log-class";
    case DecayModel::Auto: return "auto";
  }
  return "?";
}

namespace {

struct Sample {
  double lt, lp;
};

// Fits lp = c - a lt - b log(lt); `fixed_a`/`fixed_b` pin a coefficient
// when finite.
DecayFit least_squares(const std::vector<Sample>& s, double fixed_a, double fixed_b) {
  const bool free_a = !std::isfinite(fixed_a), free_b = !std::isfinite(fixed_b);
  const int k = 1 + (free_a ? 1 : 0) + (free_b ? 1 : 0);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(s.size()), k);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double ll = std::log(s[i].lt);
    int c = 0;
    A(r, c++) = 1.0;
    if (free_a) A(r, c++) = -s[i].lt;
    if (free_b) A(r, c++) = -ll;
    rhs[r] = s[i].lp + (free_a ? 0.0 : fixed_a * s[i].lt) + (free_b ? 0.0 : fixed_b * ll);
  }
  const Eigen::VectorXd x = A.colPivHouseholderQr().solve(rhs);
  DecayFit f;
  int c = 0;
  f.log_c = x[c++];
  f.a = free_a ? x[c++] : fixed_a;
  f.b = free_b ? x[c++] : fixed_b;
  f.residual = std::sqrt((A * x - rhs).squaredNorm() / static_cast<double>(s.size()));
  return f;
}

double rms_on(const std::vector<Sample>& s, const DecayFit& f, double lt_from) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& q : s) {
    if (q.lt < lt_from) continue;
    const double pred = f.log_c - f.a * q.lt - (f.b != 0.0 ? f.b * std::log(q.lt) : 0.0);
    sum += (q.lp - pred) * (q.lp - pred);
    ++n;
  }
  return n ? std::sqrt(sum / static_cast<double>(n)) : 0.0;
}

}  // namespace

DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& p, DecayModel model) {
  if (t.size() != p.size()) throw Error(ErrorKind::InvalidArgument, "t and p differ in length");
  const bool uses_log = model != DecayModel::Power;
  std::vector<Sample> s;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]) || !std::isfinite(p[i]) || !(t[i] > 0.0) || !(p[i] > 0.0)) continue;
    if (uses_log && !(t[i] > 1.0)) continue;
    s.push_back({std::log(t[i]), std::log(p[i])});
  }
  if (s.size() < 10) throw Error(ErrorKind::InsufficientRange, "fewer than 10 usable samples");
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end(), [](const Sample& a, const Sample& b) { return a.lt < b.lt; });
  const double t_min = std::exp(lo->lt), t_max = std::exp(hi->lt);
  if (std::log10(t_max / t_min) < 1.5) throw Error(ErrorKind::InsufficientRange, "time window shorter than 1.5 decades");

  constexpr double kFree = std::numeric_limits<double>::quiet_NaN();
  DecayFit f;
  switch (model) {
    case DecayModel::Power: f = least_squares(s, kFree, 0.0); break;
    case DecayModel::PowerLog: f = least_squares(s, kFree, kFree); break;
    case DecayModel::LogClass: f = least_squares(s, 1.0, kFree); break;
    case DecayModel::Auto: {
      const DecayFit pw = least_squares(s, kFree, 0.0);
      const DecayFit lg = least_squares(s, kFree, 2.0);
      const double last = hi->lt - std::log(10.0);
      const double rp = rms_on(s, pw, last), rl = rms_on(s, lg, last);
      f = rl < rp ? lg : pw;
      f.power_residual = rp;
      f.log_residual = rl;
      break;
    }
  }
  f.model = model;
  f.t_min = t_min;
  f.t_max = t_max;
  f.samples = s.size();
  return f;
}

}  // namespace hkends
