#include "mvmc/quadrature.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace mvmc {

GaussHermite::GaussHermite(int order) {
  if (order < 1) throw std::invalid_argument("GaussHermite: order must be >= 1");
  if (order == 1) {
    points_ = Eigen::VectorXd::Zero(1);
    weights_ = Eigen::VectorXd::Ones(1);
    return;
  }
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int i = 1; i < order; ++i) {
    const double b = std::sqrt(i / 2.0);
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  points_ = std::sqrt(2.0) * solver.eigenvalues();  // hermite nodes -> normal scale
  weights_.resize(order);
  for (int q = 0; q < order; ++q) {
    const double v0 = solver.eigenvectors()(0, q);
    weights_[q] = v0 * v0;  // physicists' weight / sqrt(pi)
  }
  weights_ /= weights_.sum();  // exact normalization of E[1]
}

}  // namespace mvmc
