#include "mvmc/objective.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mvmc/errors.hpp"
#include "mvmc/parallel.hpp"

namespace mvmc {

namespace {

double poly_value(const VectorXd& coeffs, double x) {
  double acc = 0.0;
  for (Eigen::Index i = coeffs.size() - 1; i >= 0; --i) acc = coeffs[i] + x * acc;
  return acc;
}

void require_beta(double beta) {
  if (!(beta > 0.0)) throw ConfigError("cost model: discount rate beta must be positive");
}

}  // namespace

CostModel make_constant_cost(double c, double beta) {
  require_beta(beta);
  CostModel cm;
  cm.kind = "constant";
  cm.beta = beta;
  cm.k_max = std::abs(c);
  cm.k = [c](const AtomicMeasure&, const ActionVec&) { return c; };
  return cm;
}

CostModel make_expected_pointwise_cost(const VectorXd& poly_coeffs, double effort_weight,
                                       double beta, const VectorXd& atoms, double R, double K) {
  require_beta(beta);
  if (poly_coeffs.size() == 0) throw ConfigError("expected_pointwise cost: empty polynomial");
  if (effort_weight < 0.0) throw ConfigError("cost model: effort weight must be >= 0");
  CostModel cm;
  cm.kind = "expected_pointwise";
  cm.beta = beta;
  double poly_max = 0.0;
  for (Eigen::Index i = 0; i < atoms.size(); ++i)
    poly_max = std::max(poly_max, std::abs(poly_value(poly_coeffs, atoms[i])));
  cm.k_max = poly_max + effort_weight * K;
  (void)R;
  VectorXd coeffs = poly_coeffs;
  cm.k = [coeffs, effort_weight](const AtomicMeasure& mu, const ActionVec& v) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i)
      acc += mu.weights()[i] * poly_value(coeffs, mu.atoms()[i]);
    return acc + effort_weight * v.weighted_sq_norm();
  };
  return cm;
}

CostModel make_variance_plus_effort_cost(double effort_weight, double beta, const VectorXd& atoms,
                                         double R, double K) {
  require_beta(beta);
  if (effort_weight < 0.0) throw ConfigError("cost model: effort weight must be >= 0");
  CostModel cm;
  cm.kind = "variance_plus_effort";
  cm.beta = beta;
  const double span = atoms[atoms.size() - 1] - atoms[0];
  cm.k_max = 0.25 * span * span + effort_weight * K;
  (void)R;
  cm.k = [effort_weight](const AtomicMeasure& mu, const ActionVec& v) {
    return mu.variance() + effort_weight * v.weighted_sq_norm();
  };
  return cm;
}

double discounted_cost(const PathSample& path, const CostModel& cm, double T) {
  if (T < 0.0) throw std::invalid_argument("discounted_cost: negative horizon");
  if (path.times.size() == 0 || T > path.times[path.times.size() - 1] + 1e-12)
    throw std::invalid_argument("discounted_cost: path does not cover [0, T]");
  const double beta = cm.beta;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < path.steps(); ++k) {
    const double t0 = path.times[k];
    if (t0 >= T) break;
    const double t1 = std::min(path.times[k + 1], T);
    const double w = (std::exp(-beta * t0) - std::exp(-beta * t1)) / beta;
    acc += w * cm(path.filter_at(k), path.action_at_step(k));
  }
  return acc;
}

double truncation_error(const CostModel& cm, double T) {
  if (T < 0.0) throw std::invalid_argument("truncation_error: negative horizon");
  return cm.k_max * std::exp(-cm.beta * T) / cm.beta;
}

EstimateResult estimate_J(const ControlSchedule& policy, const AtomicMeasure& mu0,
                          const CostModel& cm, const ActionGrid& actions, int paths,
                          double horizon, double dt, std::uint64_t seed, int workers) {
  if (paths < 2) throw ConfigError("estimate_J: need at least two paths");
  VectorXd costs(paths);
  parallel_for(paths, workers, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t p = lo; p < hi; ++p) {
      RngStream rng(seed, static_cast<std::uint64_t>(p));
      const PathSample path = simulate_closed_loop(mu0, policy, actions, horizon, dt, rng);
      costs[p] = discounted_cost(path, cm, horizon);
    }
  });
  EstimateResult out;
  out.paths = paths;
  out.horizon = horizon;
  out.truncation_bound = truncation_error(cm, horizon);
  out.mean = pairwise_sum(costs) / paths;
  VectorXd sq = (costs.array() - out.mean).square();
  out.stderr_ = std::sqrt(pairwise_sum(sq) / (static_cast<double>(paths) * (paths - 1)));
  return out;
}

}  // namespace mvmc
