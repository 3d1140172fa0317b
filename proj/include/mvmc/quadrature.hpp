#pragma once

#include <Eigen/Dense>

namespace mvmc {

// Gauss-Hermite rule for integrals against the standard normal density:
//   E[f(Z)] ~= sum_q weight(q) * f(point(q)),   Z ~ N(0,1).
// Nodes and weights come from the Golub-Welsch eigendecomposition of the
// Jacobi matrix; the physicists' weights are folded into normal form here,
// so weights() sums to 1 and points() are already scaled by sqrt(2).
class GaussHermite {
 public:
  explicit GaussHermite(int order);

  int order() const { return static_cast<int>(points_.size()); }
  const Eigen::VectorXd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  template <class F>
  double expect(F&& f) const {
    double acc = 0.0;
    for (Eigen::Index q = 0; q < points_.size(); ++q) acc += weights_[q] * f(points_[q]);
    return acc;
  }

 private:
  Eigen::VectorXd points_;
  Eigen::VectorXd weights_;
};

}  // namespace mvmc
