#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mvmc/actions.hpp"
#include "mvmc/dp.hpp"
#include "mvmc/measures.hpp"
#include "mvmc/objective.hpp"

namespace mvmc {

// Product-of-moments test functional phi(mu) = prod_j mu(p_j) with the p_j
// given as monomial coefficient vectors (constant term first). This class is
// closed under the linear-functional-derivative calculus used below.
struct PolyFunctional {
  std::vector<VectorXd> factors;
};

double poly_eval(const VectorXd& coeffs, double x);

double eval(const PolyFunctional& phi, const AtomicMeasure& mu);

// d phi / d mu at x:  sum_j p_j(x) prod_{l != j} mu(p_l)
double first_derivative(const PolyFunctional& phi, const AtomicMeasure& mu, double x);

// d^2 phi / d mu^2 at (x, y):  sum_{j != l} p_j(x) p_l(y) prod_{m != j,l} mu(p_m)
double second_derivative(const PolyFunctional& phi, const AtomicMeasure& mu, double x, double y);

// Signed measure sigma(v, mu) = (h(v,x) - mu(h)) mu(dx) as weights per atom;
// total mass is zero.
VectorXd sigma_measure(const ActionVec& v, const AtomicMeasure& mu);

// Drift of phi(xi_t) under the filter SDE:
//   L phi = 1/2 sum_{i,j} d2phi(x_i, x_j) s_i s_j.
double generator(const PolyFunctional& phi, const AtomicMeasure& mu, const ActionVec& v);

// H(mu, r, d2) = beta r + max_v { -k(mu, v) - 1/2 sum d2(x_i, x_j) s_i(v) s_j(v) }
double hamiltonian(const AtomicMeasure& mu, double r,
                   const std::function<double(double, double)>& d2, const ActionGrid& actions,
                   const CostModel& cm);

struct SlopeReport {
  std::vector<double> h;
  std::vector<double> slope;
  std::vector<double> stderr_;
  std::vector<double> deviation;  // |slope - generator_value|
  double generator_value = 0.0;
};

// Finite-difference Dynkin slopes (E[phi(xi_h)] - phi(mu))/h estimated from
// exact transitions; deviations from the generator shrink linearly in h.
SlopeReport generator_consistency_check(const PolyFunctional& phi, const AtomicMeasure& mu,
                                        const ActionVec& v, const std::vector<double>& h_list,
                                        int samples, std::uint64_t seed);

struct HjbResidualReport {
  std::vector<Eigen::Index> interior_nodes;
  VectorXd residuals;          // |H| per interior node
  double median_abs = 0.0;
  double p90_abs = 0.0;
  double vertex_max_abs = 0.0;
  bool low_resolution = false;  // no interior node admits a full stencil
};

// Residual of the stationary equation evaluated on the value table. Second
// derivatives along mass-conserving directions come from the edge stencil
//   G_ij = m^2 (V(theta + (e_i-e_j)/m) - 2 V(theta) + V(theta - (e_i-e_j)/m)),
// and zero-total-mass of sigma turns the quadratic form into
//   sum_{ij} d2 s_i s_j = -1/2 sum_{ij} G_ij s_i s_j,
// which is exactly the gauge-invariant content of the second derivative.
HjbResidualReport hjb_residual_diagnostic(const ValueFunction& V, const ActionGrid& actions,
                                          const CostModel& cm, bool interior_only = true);

}  // namespace mvmc
