#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "mvmc/actions.hpp"

namespace mvmc {

inline constexpr double kMassTol = 1e-12;
inline constexpr double kWeightFloor = 1e-15;

// Probability measure on a fixed, strictly increasing atom set. The atom
// vector is shared by identity across every measure of an experiment, which
// is what makes the support partial order and the decreasing-support
// property exact statements about weight vectors.
class AtomicMeasure {
 public:
  AtomicMeasure(std::shared_ptr<const VectorXd> atoms, VectorXd weights);

  static AtomicMeasure dirac(std::shared_ptr<const VectorXd> atoms, Eigen::Index which);

  const VectorXd& atoms() const { return *atoms_; }
  const std::shared_ptr<const VectorXd>& atoms_ptr() const { return atoms_; }
  const VectorXd& weights() const { return weights_; }
  Eigen::Index size() const { return weights_.size(); }

  double integrate(const VectorXd& f_values) const { return weights_.dot(f_values); }
  double mean() const { return weights_.dot(*atoms_); }
  double variance() const;

  bool is_dirac(Eigen::Index* which = nullptr) const;

  // Skips invariant checks; callers must hand over a valid simplex vector.
  static AtomicMeasure unchecked(std::shared_ptr<const VectorXd> atoms, VectorXd weights);

 private:
  struct unchecked_t {};
  AtomicMeasure(unchecked_t, std::shared_ptr<const VectorXd> atoms, VectorXd weights);

  std::shared_ptr<const VectorXd> atoms_;
  VectorXd weights_;
};

double integrate(const AtomicMeasure& mu, const std::function<double(double)>& f);

// W1 distance via the closed-form CDF difference on the sorted union of the
// two atom sets.
double wasserstein1(const AtomicMeasure& mu, const AtomicMeasure& nu);

// supp(mu) subset of supp(nu); requires the shared atom universe.
bool support_leq(const AtomicMeasure& mu, const AtomicMeasure& nu);

// Renormalizes theta in place, snapping weights below kWeightFloor to zero
// first so the support of a filter path never flickers back on.
void normalize_weights(VectorXd& theta);

// Posterior reweighting under the Gaussian observation likelihood
// exp(h_i y - h_i^2 t / 2), computed with a log-sum-exp shift. Zero weights
// stay zero.
void bayes_reweight(VectorXd& theta, const VectorXd& h, double y, double t);
AtomicMeasure bayes_update(const AtomicMeasure& mu, const ActionVec& v, double y, double t);
AtomicMeasure bayes_update(const AtomicMeasure& mu, const VectorXd& h_values, double y, double t);

// All weight vectors with entries k_i/m, sum k_i = m, in lexicographic order
// of the integer compositions. Node count is C(m+N-1, N-1).
class SimplexGrid {
 public:
  const VectorXd& atoms() const { return *atoms_; }
  const std::shared_ptr<const VectorXd>& atoms_ptr() const { return atoms_; }
  int resolution() const { return m_; }
  Eigen::Index node_count() const { return nodes_.rows(); }
  const Eigen::MatrixXd& nodes() const { return nodes_; }
  VectorXd node_weights(Eigen::Index i) const { return nodes_.row(i).transpose(); }
  AtomicMeasure node_measure(Eigen::Index i) const;
  const std::vector<int>& composition(Eigen::Index i) const { return compositions_[i]; }

  bool is_vertex(Eigen::Index i, Eigen::Index* atom = nullptr) const;

  // Index of an integer composition, or -1 when it is not a grid node.
  Eigen::Index index_of(const std::vector<int>& composition) const;

  // Grid node closest in W1; ties resolve to the lowest node index.
  Eigen::Index nearest_node_w1(const VectorXd& weights) const;

  // Largest W1 distance between nodes that differ by one (e_i - e_j)/m move,
  // i.e. the edge length of the interpolation cells.
  double cell_diameter_w1() const;

 private:
  friend SimplexGrid make_simplex_grid(std::shared_ptr<const VectorXd>, int, std::int64_t);

  std::shared_ptr<const VectorXd> atoms_;
  int m_ = 1;
  Eigen::MatrixXd nodes_;
  std::vector<std::vector<int>> compositions_;
  std::unordered_map<std::uint64_t, Eigen::Index> index_;
  Eigen::MatrixXd node_cdf_gaps_;  // per node: cumulative weights times atom gaps
  std::uint64_t encode(const std::vector<int>& composition) const;
};

SimplexGrid make_simplex_grid(std::shared_ptr<const VectorXd> atoms, int m,
                              std::int64_t node_cap = (std::int64_t{1} << 21));

enum class PriorPlacement { kQuantile, kUniform };

// Places n_atoms atoms for a continuous prior given through its CDF on
// [lo, hi]: quantile placement uses equal-mass quantiles with equal weights,
// uniform placement uses equispaced bin midpoints with binned mass.
AtomicMeasure discretize_prior(const std::function<double(double)>& cdf, double lo, double hi,
                               int n_atoms, PriorPlacement placement);

}  // namespace mvmc
