#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "mvmc/filter.hpp"

namespace mvmc {

// Running cost k(mu, v) with its uniform bound and the discount rate.
struct CostModel {
  std::string kind;
  double beta = 1.0;
  double k_max = 0.0;
  std::function<double(const AtomicMeasure&, const ActionVec&)> k;

  double operator()(const AtomicMeasure& mu, const ActionVec& v) const { return k(mu, v); }
};

CostModel make_constant_cost(double c, double beta);

// k(mu, v) = mu(q) + effort_weight * sum_i (R^i v_i)^2 with q a polynomial.
// Linear in mu, so it realizes costs of the pointwise form mu(k~(.,v)).
CostModel make_expected_pointwise_cost(const VectorXd& poly_coeffs, double effort_weight,
                                       double beta, const VectorXd& atoms, double R, double K);

// k(mu, v) = Var_mu(id) + effort_weight * sum_i (R^i v_i)^2, the genuinely
// measure-nonlinear exploration/effort trade-off.
CostModel make_variance_plus_effort_cost(double effort_weight, double beta, const VectorXd& atoms,
                                         double R, double K);

// Discounted running cost along a simulated path, with the filter state
// frozen at the left endpoint of each step and the discount factor
// integrated exactly over the step. T may cut the final step short.
double discounted_cost(const PathSample& path, const CostModel& cm, double T);

// Bound on the omitted tail of the infinite-horizon objective.
double truncation_error(const CostModel& cm, double T);

struct EstimateResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  int paths = 0;
  double horizon = 0.0;
  double truncation_bound = 0.0;
};

// Monte Carlo estimate of the discounted objective over independent
// strong-formulation episodes. Each path owns the substream keyed by
// (seed, path index) and the aggregation is a fixed-order pairwise sum, so
// the result does not depend on the worker count.
EstimateResult estimate_J(const ControlSchedule& policy, const AtomicMeasure& mu0,
                          const CostModel& cm, const ActionGrid& actions, int paths,
                          double horizon, double dt, std::uint64_t seed, int workers = 1);

}  // namespace mvmc
