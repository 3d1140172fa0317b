#include "mvmc/filter.hpp"

#include <cmath>
#include <stdexcept>

#include "mvmc/errors.hpp"
#include "mvmc/quadrature.hpp"

namespace mvmc {

namespace {

Eigen::Index draw_atom(const VectorXd& weights, RngStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  Eigen::Index last_positive = -1;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    acc += weights[i];
    if (u <= acc) return i;
  }
  if (last_positive < 0) throw NumericError("draw_atom: no positive weights");
  return last_positive;
}

struct SegmentLayout {
  int steps_per_segment = 0;
  int segments = 0;
  Eigen::Index total_steps() const {
    return static_cast<Eigen::Index>(steps_per_segment) * segments;
  }
};

SegmentLayout segment_layout(double delta, double horizon, double dt) {
  if (!(dt > 0.0)) throw ConfigError("simulation: dt must be positive");
  if (!(horizon > 0.0)) throw ConfigError("simulation: horizon must be positive");
  const double steps = delta / dt;
  const double segs = horizon / delta;
  SegmentLayout out;
  out.steps_per_segment = static_cast<int>(std::llround(steps));
  out.segments = static_cast<int>(std::llround(segs));
  if (out.steps_per_segment < 1 || std::abs(steps - out.steps_per_segment) > 1e-9 * steps)
    throw ConfigError("simulation: dt must divide the dyadic step");
  if (out.segments < 1 || std::abs(segs - out.segments) > 1e-9 * segs)
    throw ConfigError("simulation: horizon must be a whole number of dyadic steps");
  return out;
}

int schedule_action(const ControlSchedule& schedule, const ActionGrid& actions, int segment,
                    const VectorXd& theta) {
  int idx;
  if (schedule.mode == ControlSchedule::Mode::kOpenLoop) {
    if (segment >= static_cast<int>(schedule.open_loop.size()))
      throw ConfigError("schedule: open-loop action list shorter than the horizon");
    idx = schedule.open_loop[segment];
  } else {
    if (!schedule.grid) throw ConfigError("schedule: feedback mode without a simplex grid");
    if (schedule.feedback.size() != static_cast<std::size_t>(schedule.grid->node_count()))
      throw ConfigError("schedule: feedback table does not cover the grid");
    if (theta.size() != schedule.grid->atoms().size())
      throw ConfigError("schedule: filter state does not match the feedback grid");
    idx = schedule.feedback[schedule.grid->nearest_node_w1(theta)];
  }
  if (idx < 0 || idx >= static_cast<int>(actions.size()))
    throw ConfigError("schedule: action index out of range");
  return idx;
}

}  // namespace

VectorXd PathSample::innovations() const {
  VectorXd out(times.size());
  out[0] = 0.0;
  double drift_acc = 0.0;
  for (Eigen::Index k = 0; k < dw.size(); ++k) {
    drift_acc += predicted_drift[k] * dt;
    out[k + 1] = y[k + 1] - drift_acc;
  }
  return out;
}

VectorXd diffusion_coeff(const VectorXd& theta, const VectorXd& h) {
  const double mean_h = theta.dot(h);
  return theta.array() * (h.array() - mean_h);
}

VectorXd diffusion_coeff(const AtomicMeasure& mu, const ActionVec& v) {
  return diffusion_coeff(mu.weights(), eval_h(v, mu.atoms()));
}

void euler_step_inplace(VectorXd& theta, const VectorXd& h, double dw) {
  theta += dw * diffusion_coeff(theta, h);
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    if (theta[i] < 0.0) theta[i] = 0.0;
  normalize_weights(theta);
}

AtomicMeasure euler_step(const AtomicMeasure& mu, const ActionVec& v, double dw, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("euler_step: dt must be positive");
  VectorXd theta = mu.weights();
  euler_step_inplace(theta, eval_h(v, mu.atoms()), dw);
  return AtomicMeasure::unchecked(mu.atoms_ptr(), std::move(theta));
}

AtomicMeasure exact_transition_sample(const AtomicMeasure& mu, const VectorXd& h, double delta,
                                      RngStream& rng) {
  if (!(delta > 0.0)) throw std::invalid_argument("exact_transition_sample: delta must be positive");
  const Eigen::Index j = draw_atom(mu.weights(), rng);
  const double y = h[j] * delta + std::sqrt(delta) * rng.normal();
  return bayes_update(mu, h, y, delta);
}

AtomicMeasure exact_transition_sample(const AtomicMeasure& mu, const ActionVec& v, double delta,
                                      RngStream& rng) {
  return exact_transition_sample(mu, eval_h(v, mu.atoms()), delta, rng);
}

double transition_expectation(const AtomicMeasure& mu, const ActionVec& v, double delta,
                              const std::function<double(const AtomicMeasure&)>& g, int quad) {
  if (!(delta > 0.0)) throw std::invalid_argument("transition_expectation: delta must be positive");
  if (quad < 1) throw std::invalid_argument("transition_expectation: quad must be >= 1");
  const VectorXd h = eval_h(v, mu.atoms());
  const GaussHermite gh(quad);
  const double sqrt_delta = std::sqrt(delta);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    const double theta_j = mu.weights()[j];
    if (theta_j <= 0.0) continue;
    double inner = 0.0;
    for (int q = 0; q < gh.order(); ++q) {
      const double y = h[j] * delta + sqrt_delta * gh.points()[q];
      inner += gh.weights()[q] * g(bayes_update(mu, h, y, delta));
    }
    acc += theta_j * inner;
  }
  return acc;
}

PathSample simulate_weak_path(const AtomicMeasure& mu0, const ControlSchedule& schedule,
                              const ActionGrid& actions, double horizon, double dt, RngStream& rng) {
  const SegmentLayout layout = segment_layout(schedule.delta(), horizon, dt);
  const Eigen::Index m = layout.total_steps();
  const Eigen::Index n = mu0.size();
  const double sqrt_dt = std::sqrt(dt);

  PathSample path;
  path.dt = dt;
  path.atoms = mu0.atoms_ptr();
  path.times = VectorXd::LinSpaced(m + 1, 0.0, m * dt);
  path.y = VectorXd::Zero(m + 1);
  path.dw.resize(m);
  path.predicted_drift.resize(m);
  path.filter_weights.resize(m + 1, n);
  path.step_segment.resize(m);
  path.segment_action.reserve(layout.segments);
  path.segment_actions.reserve(layout.segments);

  VectorXd theta = mu0.weights();
  path.filter_weights.row(0) = theta.transpose();
  Eigen::Index k = 0;
  for (int seg = 0; seg < layout.segments; ++seg) {
    const int a = schedule_action(schedule, actions, seg, theta);
    path.segment_action.push_back(a);
    path.segment_actions.push_back(actions[a]);
    const VectorXd h = eval_h(actions[a], mu0.atoms());
    for (int s = 0; s < layout.steps_per_segment; ++s, ++k) {
      const double dw = sqrt_dt * rng.normal();
      path.dw[k] = dw;
      path.predicted_drift[k] = theta.dot(h);
      path.y[k + 1] = path.y[k] + path.predicted_drift[k] * dt + dw;
      euler_step_inplace(theta, h, dw);
      path.filter_weights.row(k + 1) = theta.transpose();
      path.step_segment[k] = seg;
    }
  }
  return path;
}

PathSample simulate_closed_loop(const AtomicMeasure& mu0, const ControlSchedule& policy,
                                const ActionGrid& actions, double horizon, double dt,
                                RngStream& rng) {
  const SegmentLayout layout = segment_layout(policy.delta(), horizon, dt);
  const Eigen::Index m = layout.total_steps();
  const Eigen::Index n = mu0.size();
  const double sqrt_dt = std::sqrt(dt);

  PathSample path;
  path.dt = dt;
  path.atoms = mu0.atoms_ptr();
  path.times = VectorXd::LinSpaced(m + 1, 0.0, m * dt);
  path.y = VectorXd::Zero(m + 1);
  path.dw.resize(m);
  path.predicted_drift.resize(m);
  path.filter_weights.resize(m + 1, n);
  path.step_segment.resize(m);
  path.segment_action.reserve(layout.segments);
  path.segment_actions.reserve(layout.segments);

  const Eigen::Index signal_atom = draw_atom(mu0.weights(), rng);
  path.hidden_x = mu0.atoms()[signal_atom];

  VectorXd theta = mu0.weights();
  path.filter_weights.row(0) = theta.transpose();
  Eigen::Index k = 0;
  for (int seg = 0; seg < layout.segments; ++seg) {
    const int a = schedule_action(policy, actions, seg, theta);
    path.segment_action.push_back(a);
    path.segment_actions.push_back(actions[a]);
    const VectorXd h = eval_h(actions[a], mu0.atoms());
    const double drift = h[signal_atom];
    for (int s = 0; s < layout.steps_per_segment; ++s, ++k) {
      const double dw = sqrt_dt * rng.normal();
      path.dw[k] = dw;
      path.predicted_drift[k] = theta.dot(h);
      const double dy = drift * dt + dw;
      path.y[k + 1] = path.y[k] + dy;
      bayes_reweight(theta, h, dy, dt);
      path.filter_weights.row(k + 1) = theta.transpose();
      path.step_segment[k] = seg;
    }
  }
  return path;
}

AtomicMeasure linear_reduction_filter(const AtomicMeasure& mu0, double b, double y, double t) {
  if (t < 0.0) throw std::invalid_argument("linear_reduction_filter: negative elapsed time");
  // Posterior characterised by (upsilon, qv) = (b y, b^2 t): weights scale by
  // exp(x upsilon - x^2 qv / 2).
  const double upsilon = b * y;
  const double qv = b * b * t;
  VectorXd theta = mu0.weights();
  double max_ll = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (theta[i] > 0.0) {
      const double x = mu0.atoms()[i];
      max_ll = std::max(max_ll, x * upsilon - 0.5 * x * x * qv);
    }
  }
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (theta[i] > 0.0) {
      const double x = mu0.atoms()[i];
      theta[i] *= std::exp(x * upsilon - 0.5 * x * x * qv - max_ll);
    }
  }
  normalize_weights(theta);
  return AtomicMeasure::unchecked(mu0.atoms_ptr(), std::move(theta));
}

AtomicMeasure linear_reduction_filter(const AtomicMeasure& mu0, const ActionVec& v, double y,
                                      double t) {
  if (!v.is_linear())
    throw std::invalid_argument("linear_reduction_filter: action is not linear in the signal");
  return linear_reduction_filter(mu0, v.coeffs()[0], y, t);
}

}  // namespace mvmc
