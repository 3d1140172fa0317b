#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "mvmc/actions.hpp"
#include "mvmc/control.hpp"
#include "mvmc/measures.hpp"
#include "mvmc/rng.hpp"

namespace mvmc {

// One simulated trajectory on a uniform time grid. For strong-formulation
// runs the observation follows dY = h(u,X)dt + dW for the drawn signal X;
// weak runs have no hidden draw (hidden_x is NaN) and Y is reconstructed in
// innovations form dY = xi(h)dt + dW.
struct PathSample {
  double dt = 0.0;
  double hidden_x = std::numeric_limits<double>::quiet_NaN();
  VectorXd times;                      // M+1 grid points
  VectorXd y;                          // observation path, y[0] = 0
  VectorXd dw;                         // Brownian increments, length M
  VectorXd predicted_drift;            // xi_k(h(u_k,.)) per step, length M
  Eigen::MatrixXd filter_weights;      // (M+1) x N
  std::vector<int> step_segment;       // step -> segment id, length M
  std::vector<int> segment_action;     // segment -> index into the action grid
  std::vector<ActionVec> segment_actions;
  std::shared_ptr<const VectorXd> atoms;

  Eigen::Index steps() const { return dw.size(); }
  AtomicMeasure filter_at(Eigen::Index k) const {
    return AtomicMeasure::unchecked(atoms, filter_weights.row(k).transpose());
  }
  const ActionVec& action_at_step(Eigen::Index k) const {
    return segment_actions[step_segment[k]];
  }
  // Innovations I_k = y_k - sum_{l<k} xi_l(h) dt; a Brownian motion in the
  // observation filtration.
  VectorXd innovations() const;
};

// Diffusion coefficient of the weight-vector SDE:
//   sigma_k = theta_k (h_k - sum_n theta_n h_n); components sum to zero.
VectorXd diffusion_coeff(const VectorXd& theta, const VectorXd& h);
VectorXd diffusion_coeff(const AtomicMeasure& mu, const ActionVec& v);

// theta += sigma(theta) dW, clipped at zero and renormalized.
void euler_step_inplace(VectorXd& theta, const VectorXd& h, double dw);
AtomicMeasure euler_step(const AtomicMeasure& mu, const ActionVec& v, double dw, double dt);

// One draw from the exact one-step transition law under a constant action:
// sample X* from mu, observe y = h(v,X*) delta + sqrt(delta) G, apply Bayes.
// No time-discretization bias.
AtomicMeasure exact_transition_sample(const AtomicMeasure& mu, const VectorXd& h, double delta,
                                      RngStream& rng);
AtomicMeasure exact_transition_sample(const AtomicMeasure& mu, const ActionVec& v, double delta,
                                      RngStream& rng);

// E[g(xi_delta)] for the same transition law, computed as the mixture over
// conditioning atoms times Gauss-Hermite quadrature in the observation noise.
double transition_expectation(const AtomicMeasure& mu, const ActionVec& v, double delta,
                              const std::function<double(const AtomicMeasure&)>& g, int quad);

// Euler path of the filter SDE driven by W under a piecewise-constant
// schedule; dt must divide the dyadic step.
PathSample simulate_weak_path(const AtomicMeasure& mu0, const ControlSchedule& schedule,
                              const ActionGrid& actions, double horizon, double dt, RngStream& rng);

// Strong-formulation episode: draws X from mu0, integrates the observation,
// applies the scheduled (or feedback) action at each dyadic time and updates
// the posterior by sequential Bayes on the observed increments.
PathSample simulate_closed_loop(const AtomicMeasure& mu0, const ControlSchedule& policy,
                                const ActionGrid& actions, double horizon, double dt,
                                RngStream& rng);

// Closed-form posterior for linear-in-signal actions h(v,x) = b x; must agree
// with bayes_update exactly.
AtomicMeasure linear_reduction_filter(const AtomicMeasure& mu0, double b, double y, double t);
AtomicMeasure linear_reduction_filter(const AtomicMeasure& mu0, const ActionVec& v, double y,
                                      double t);

}  // namespace mvmc
