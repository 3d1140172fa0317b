#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mvmc/control.hpp"
#include "mvmc/measures.hpp"
#include "mvmc/objective.hpp"

namespace mvmc {

// Value table on a simplex grid together with the solve metadata needed to
// reproduce and budget it.
struct ValueFunction {
  std::shared_ptr<const SimplexGrid> grid;
  VectorXd values;
  std::vector<int> policy;  // argmin action index per node; may be empty

  int level = 0;  // dyadic level n, step 2^-n
  int quad = 0;
  int substeps = 0;
  double tol = 0.0;
  double final_residual = 0.0;
  int sweeps = 0;
  std::vector<double> residual_history;
  std::string action_grid_id;

  double delta() const { return std::ldexp(1.0, -level); }
};

// Barycentric interpolation over the Freudenthal-style triangulation of the
// weight simplex: exact at nodes, linear along grid edges, convex weights.
double interpolate(const SimplexGrid& grid, const VectorXd& values, const VectorXd& weights);
double interpolate(const ValueFunction& V, const AtomicMeasure& mu);

// One application of the dynamic-programming operator at mu:
//   min_v E[ int_0^delta e^{-beta t} k(xi_t, v) dt + e^{-beta delta} V(xi_delta) ],
// expectation by the atom-mixture x Gauss-Hermite scheme, running integral on
// L substeps with sequential Bayes states, discount integrated exactly per
// substep. Ties resolve to the lowest action index.
std::pair<double, int> bellman_apply(const ValueFunction& V, const AtomicMeasure& mu, double delta,
                                     const ActionGrid& actions, const CostModel& cm, int quad,
                                     int L);

// Fixed point of the Bellman operator from V0 = 0, Jacobi sweeps, certified
// stopping rule: sup-residual <= tol (1-gamma)/gamma with gamma = e^{-beta
// delta} leaves the table within tol of the discrete fixed point.
ValueFunction value_iteration(std::shared_ptr<const SimplexGrid> grid, double delta,
                              const ActionGrid& actions, const CostModel& cm, int quad, int L,
                              double tol, int max_sweeps, int workers = 1);

// Greedy feedback table recomputed on the converged values; off-grid states
// map to the nearest node in W1 at lookup time.
ControlSchedule extract_policy(const ValueFunction& V, double delta, const ActionGrid& actions,
                               const CostModel& cm, int quad, int L, int workers = 1);

struct RefineRow {
  int level = 0;
  double delta = 0.0;
  double value_at_mu0 = 0.0;
  int sweeps = 0;
  double residual = 0.0;
};

// Converged values at mu0 across dyadic levels; values are nonincreasing in
// the level up to the solver tolerances.
std::vector<RefineRow> refine_study(const AtomicMeasure& mu0, const CostModel& cm,
                                    const ActionGrid& actions, const std::vector<int>& levels,
                                    std::shared_ptr<const SimplexGrid> grid, int quad, int L,
                                    double tol, int max_sweeps, int workers = 1);

// max |V_i - V_j| / W1(node_i, node_j) over grid edges
double empirical_lipschitz(const ValueFunction& V);

struct EpsilonBudget {
  double iteration_tol = 0.0;
  double interpolation = 0.0;
  double mc = 0.0;
  double truncation = 0.0;
  double total() const { return iteration_tol + interpolation + mc + truncation; }
};

EpsilonBudget make_epsilon_budget(const ValueFunction& V, double mc_stderr, double truncation);

}  // namespace mvmc
