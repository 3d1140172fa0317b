#include "mvmc/actions.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mvmc/errors.hpp"

namespace mvmc {

namespace {

double weighted_sq_norm_of(const VectorXd& coeffs, double R) {
  double acc = 0.0;
  double rpow = 1.0;
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    rpow *= R;
    acc += (rpow * coeffs[i]) * (rpow * coeffs[i]);
  }
  return acc;
}

}  // namespace

ActionVec::ActionVec(VectorXd coeffs, double R, double K)
    : coeffs_(std::move(coeffs)), R_(R), K_(K) {
  if (coeffs_.size() < 1) throw std::invalid_argument("ActionVec: truncation order must be >= 1");
  if (!(R_ > 0.0)) throw std::invalid_argument("ActionVec: R must be positive");
  if (!(K_ > 0.0)) throw std::invalid_argument("ActionVec: K must be positive");
  const double norm = weighted_sq_norm_of(coeffs_, R_);
  if (norm > K_ + kFeasibilityTol)
    throw std::invalid_argument("ActionVec: coefficients violate the ellipsoid budget");
}

double ActionVec::weighted_sq_norm() const { return weighted_sq_norm_of(coeffs_, R_); }

bool ActionVec::is_linear() const {
  for (Eigen::Index i = 1; i < coeffs_.size(); ++i)
    if (coeffs_[i] != 0.0) return false;
  return true;
}

double eval_h(const ActionVec& v, double x) {
  if (std::abs(x) > v.R())
    throw std::domain_error("eval_h: |x| exceeds the support radius R");
  // Horner on sum v_i x^i = x * (v_1 + x * (v_2 + ...))
  const VectorXd& c = v.coeffs();
  double acc = 0.0;
  for (Eigen::Index i = c.size() - 1; i >= 0; --i) acc = c[i] + x * acc;
  return x * acc;
}

VectorXd eval_h(const ActionVec& v, const VectorXd& xs) {
  VectorXd out(xs.size());
  for (Eigen::Index i = 0; i < xs.size(); ++i) out[i] = eval_h(v, xs[i]);
  return out;
}

double tail_bound(double R, double K, double kappa, int n) {
  if (!(R > 0.0)) throw std::domain_error("tail_bound: R must be positive");
  if (kappa < 0.0 || kappa >= R) throw std::domain_error("tail_bound: requires 0 <= kappa < R");
  if (n < 1) throw std::domain_error("tail_bound: n must be >= 1");
  const double q = kappa / R;
  return std::sqrt(K) * std::pow(q, n) / std::sqrt(1.0 - q * q);
}

ActionVec project_action(const VectorXd& raw, double R, double K) {
  const double norm = weighted_sq_norm_of(raw, R);
  if (norm <= K + kFeasibilityTol) return ActionVec(raw, R, K);
  return ActionVec(raw * std::sqrt(K / norm), R, K);
}

ActionGrid::ActionGrid(std::vector<ActionVec> candidates, double R, double K, int d, std::string id)
    : candidates_(std::move(candidates)), R_(R), K_(K), d_(d), id_(std::move(id)) {
  if (candidates_.empty()) throw ConfigError("ActionGrid: candidate list is empty");
}

ActionGrid make_action_grid(const ActionGridSpec& spec) {
  if (spec.d < 1) throw ConfigError("action grid: truncation order d must be >= 1");
  if (!(spec.R > 0.0) || !(spec.K > 0.0)) throw ConfigError("action grid: R and K must be positive");
  if (spec.levels.empty()) throw ConfigError("action grid: no levels given");
  for (const auto& l : spec.levels)
    if (l.empty()) throw ConfigError("action grid: empty level list");
  if (spec.levels.size() != 1 && static_cast<int>(spec.levels.size()) != spec.d)
    throw ConfigError("action grid: need one level list, or one per coordinate");

  std::vector<double> scales = spec.scales.empty() ? std::vector<double>{1.0} : spec.scales;

  const auto& level_list = [&](int coord) -> const std::vector<double>& {
    return spec.levels.size() == 1 ? spec.levels[0] : spec.levels[coord];
  };

  std::vector<ActionVec> out;
  std::set<std::vector<double>> seen;
  std::vector<std::size_t> idx(spec.d, 0);
  for (;;) {
    VectorXd base(spec.d);
    for (int c = 0; c < spec.d; ++c) base[c] = level_list(c)[idx[c]];
    for (double s : scales) {
      ActionVec cand = project_action(base * s, spec.R, spec.K);
      std::vector<double> key(cand.coeffs().data(), cand.coeffs().data() + spec.d);
      if (seen.insert(key).second) out.push_back(std::move(cand));
    }
    // odometer over level indices, last coordinate fastest
    int c = spec.d - 1;
    for (; c >= 0; --c) {
      if (++idx[c] < level_list(c).size()) break;
      idx[c] = 0;
    }
    if (c < 0) break;
  }

  std::ostringstream id;
  id << "d" << spec.d << "-R" << spec.R << "-K" << spec.K << "-n" << out.size();
  return ActionGrid(std::move(out), spec.R, spec.K, spec.d, id.str());
}

MatrixXd action_h_table(const ActionGrid& grid, const VectorXd& atoms) {
  MatrixXd table(static_cast<Eigen::Index>(grid.size()), atoms.size());
  for (std::size_t a = 0; a < grid.size(); ++a) table.row(a) = eval_h(grid[a], atoms).transpose();
  return table;
}

}  // namespace mvmc
