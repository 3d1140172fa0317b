#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mvmc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kFeasibilityTol = 1e-12;

// Truncated polynomial action. The drift shape it induces on the signal is
//   h(v, x) = sum_{i=1..d} coeffs[i-1] * x^i,
// and feasibility means sum_i (R^i v_i)^2 <= K. Note h(v, 0) == 0 always.
class ActionVec {
 public:
  ActionVec(VectorXd coeffs, double R, double K);

  const VectorXd& coeffs() const { return coeffs_; }
  double R() const { return R_; }
  double K() const { return K_; }
  int order() const { return static_cast<int>(coeffs_.size()); }

  // sum_i (R^i v_i)^2, the ellipsoid norm used by the budget constraint
  double weighted_sq_norm() const;

  bool is_linear() const;  // only the degree-1 coefficient may be nonzero

 private:
  VectorXd coeffs_;
  double R_;
  double K_;
};

double eval_h(const ActionVec& v, double x);
VectorXd eval_h(const ActionVec& v, const VectorXd& xs);

// Uniform bound on |sum_{i>=n} v_i x^i| over all feasible v and |x| <= kappa,
// obtained by closing the geometric series: sqrt(K) (kappa/R)^n / sqrt(1-(kappa/R)^2).
double tail_bound(double R, double K, double kappa, int n);

// Returns raw unchanged when feasible, otherwise scales it onto the
// ellipsoid boundary. The zero vector is always feasible.
ActionVec project_action(const VectorXd& raw, double R, double K);

struct ActionGridSpec {
  int d = 1;
  double R = 1.0;
  double K = 1.0;
  // One level list per coordinate; a single list is broadcast to all d
  // coordinates.
  std::vector<std::vector<double>> levels;
  // Optional global scalings applied to every base candidate.
  std::vector<double> scales;
};

// Finite candidate set standing in for the minimization over the full
// ellipsoid. Generation is the cartesian product of per-coordinate levels
// times the scale list; infeasible products are projected onto the boundary
// and exact duplicates dropped. Order is deterministic.
class ActionGrid {
 public:
  ActionGrid() = default;
  ActionGrid(std::vector<ActionVec> candidates, double R, double K, int d, std::string id);

  const std::vector<ActionVec>& candidates() const { return candidates_; }
  const ActionVec& operator[](std::size_t i) const { return candidates_[i]; }
  std::size_t size() const { return candidates_.size(); }
  double R() const { return R_; }
  double K() const { return K_; }
  int order() const { return d_; }
  const std::string& id() const { return id_; }

 private:
  std::vector<ActionVec> candidates_;
  double R_ = 1.0;
  double K_ = 1.0;
  int d_ = 1;
  std::string id_;
};

ActionGrid make_action_grid(const ActionGridSpec& spec);

// h values of every candidate on a fixed atom set; row a = candidate a.
MatrixXd action_h_table(const ActionGrid& grid, const VectorXd& atoms);

}  // namespace mvmc
