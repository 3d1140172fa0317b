#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mvmc/dp.hpp"
#include "mvmc/errors.hpp"
#include "mvmc/filter.hpp"
#include "mvmc/hjb.hpp"
#include "mvmc/objective.hpp"
#include "mvmc/rng.hpp"

namespace mvmc {

namespace {

VectorXd random_simplex_weights(Eigen::Index n, RngStream& rng) {
  VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = -std::log(1.0 - rng.uniform());
  w /= w.sum();
  return w;
}

ActionVec random_feasible_action(int d, double R, double K, RngStream& rng) {
  VectorXd w(d);
  for (int i = 0; i < d; ++i) w[i] = rng.normal();
  w *= std::sqrt(K) * std::pow(rng.uniform(), 1.0 / d) / w.norm();
  VectorXd v(d);
  double rpow = 1.0;
  for (int i = 0; i < d; ++i) {
    rpow *= R;
    v[i] = w[i] / rpow;
  }
  return ActionVec(v, R, K);
}

VectorXd poly_multiply(const VectorXd& a, const VectorXd& b) {
  VectorXd out = VectorXd::Zero(a.size() + b.size() - 1);
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

// Closed-form L(L phi) for phi = mu(f)^2: L phi = Cov(f,h)^2 expands into
// three moment products, and L is linear across them.
double second_generator_sup(const VectorXd& f, const VectorXd& h_poly, const AtomicMeasure& mu_ref,
                            const ActionVec& v, int samples, RngStream& rng) {
  const VectorXd fh = poly_multiply(f, h_poly);
  PolyFunctional p1{{fh, fh}};
  PolyFunctional p2{{fh, f, h_poly}};
  PolyFunctional p3{{f, f, h_poly, h_poly}};
  double sup = 0.0;
  for (int s = 0; s < samples; ++s) {
    const AtomicMeasure nu = AtomicMeasure::unchecked(
        mu_ref.atoms_ptr(), random_simplex_weights(mu_ref.size(), rng));
    const double val = generator(p1, nu, v) - 2.0 * generator(p2, nu, v) + generator(p3, nu, v);
    sup = std::max(sup, std::abs(val));
  }
  return sup;
}

struct Battery {
  std::vector<InvariantResult>* out;

  void record(const std::string& name, bool pass, double stat, double thr,
              const std::string& note = {}) {
    out->push_back({name, pass, stat, thr, note});
  }

  void guarded(const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      record(name, false, std::nan(""), 0.0, e.what());
    }
  }
};

}  // namespace

std::vector<InvariantResult> run_invariant_checks(const ExperimentConfig& cfg, int workers) {
  std::vector<InvariantResult> results;
  Battery b{&results};
  const std::uint64_t seed = cfg.simulation().seed;

  // --- prior ---------------------------------------------------------------
  b.guarded("prior.mass_normalized", [&] {
    const double err = std::abs(cfg.raw_prior_weights().sum() - 1.0);
    b.record("prior.mass_normalized", err <= kMassTol, err, kMassTol);
  });
  b.guarded("prior.weights_nonnegative", [&] {
    const double mn = cfg.raw_prior_weights().minCoeff();
    b.record("prior.weights_nonnegative", mn >= 0.0, mn, 0.0);
  });
  b.guarded("prior.atoms_inside_radius", [&] {
    const double worst = cfg.atoms()->cwiseAbs().maxCoeff();
    const double R = cfg.action_spec().R;
    b.record("prior.atoms_inside_radius", worst < R, worst, R);
  });

  const bool prior_ok =
      std::all_of(results.begin(), results.end(), [](const auto& r) { return r.pass; });
  if (!prior_ok) return results;  // everything below builds on a valid prior

  const AtomicMeasure mu0 = cfg.prior();
  const ActionGrid actions = cfg.action_grid();
  const CostModel cm = cfg.cost_model();
  const double R = actions.R(), K = actions.K();
  const double kappa = cfg.atoms()->cwiseAbs().maxCoeff();

  // --- actions ---------------------------------------------------------------
  b.guarded("actions.grid_feasible", [&] {
    double worst = 0.0;
    for (const auto& v : actions.candidates()) worst = std::max(worst, v.weighted_sq_norm());
    b.record("actions.grid_feasible", worst <= K + kFeasibilityTol, worst, K + kFeasibilityTol);
  });
  b.guarded("actions.tail_bound_sampled", [&] {
    RngStream rng(seed, 1001);
    const int d = 12;
    double worst = -1.0;
    for (int n : {1, 2, 4, 8}) {
      const double bound = tail_bound(R, K, kappa, n);
      for (int s = 0; s < 20000; ++s) {
        const ActionVec v = random_feasible_action(d, R, K, rng);
        const double x = (2.0 * rng.uniform() - 1.0) * kappa;
        double tail = 0.0, xp = std::pow(x, n);
        for (int i = n; i <= d; ++i, xp *= x) tail += v.coeffs()[i - 1] * xp;
        worst = std::max(worst, std::abs(tail) - bound);
      }
    }
    b.record("actions.tail_bound_sampled", worst <= 0.0, worst, 0.0);
  });
  b.guarded("actions.h_uniform_bound", [&] {
    RngStream rng(seed, 1002);
    const double bound = tail_bound(R, K, kappa, 1);
    double worst = 0.0;
    for (int s = 0; s < 20000; ++s) {
      const ActionVec v = random_feasible_action(6, R, K, rng);
      const double x = (2.0 * rng.uniform() - 1.0) * kappa;
      worst = std::max(worst, std::abs(eval_h(v, x)));
    }
    b.record("actions.h_uniform_bound", worst <= bound, worst, bound);
  });

  // --- measures ---------------------------------------------------------------
  b.guarded("measures.bayes_mass", [&] {
    RngStream rng(seed, 1003);
    double worst = 0.0;
    for (int s = 0; s < 200; ++s) {
      AtomicMeasure mu = AtomicMeasure::unchecked(mu0.atoms_ptr(),
                                                  random_simplex_weights(mu0.size(), rng));
      const ActionVec v = random_feasible_action(3, R, K, rng);
      const AtomicMeasure post = bayes_update(mu, v, rng.normal(), 0.5 + rng.uniform());
      worst = std::max(worst, std::abs(post.weights().sum() - 1.0));
    }
    b.record("measures.bayes_mass", worst <= kMassTol, worst, kMassTol);
  });
  b.guarded("measures.bayes_sequential", [&] {
    RngStream rng(seed, 1004);
    double worst = 0.0;
    for (int s = 0; s < 200; ++s) {
      const ActionVec v = random_feasible_action(3, R, K, rng);
      const double y1 = rng.normal(), y2 = rng.normal();
      const double t1 = rng.uniform(), t2 = rng.uniform();
      const AtomicMeasure two_steps = bayes_update(bayes_update(mu0, v, y1, t1), v, y2, t2);
      const AtomicMeasure one_step = bayes_update(mu0, v, y1 + y2, t1 + t2);
      worst = std::max(worst,
                       (two_steps.weights() - one_step.weights()).cwiseAbs().maxCoeff());
    }
    b.record("measures.bayes_sequential", worst <= 1e-10, worst, 1e-10);
  });
  b.guarded("measures.w1_metric", [&] {
    RngStream rng(seed, 1005);
    double worst = 0.0;
    for (int s = 0; s < 200; ++s) {
      const auto mk = [&] {
        return AtomicMeasure::unchecked(mu0.atoms_ptr(),
                                        random_simplex_weights(mu0.size(), rng));
      };
      const AtomicMeasure a = mk(), bb = mk(), c = mk();
      worst = std::max(worst, std::abs(wasserstein1(a, bb) - wasserstein1(bb, a)));
      worst = std::max(worst, wasserstein1(a, a));
      worst = std::max(worst, wasserstein1(a, c) - wasserstein1(a, bb) - wasserstein1(bb, c));
    }
    b.record("measures.w1_metric", worst <= 1e-12, worst, 1e-12);
  });
  b.guarded("measures.support_preserved_by_bayes", [&] {
    RngStream rng(seed, 1006);
    int violations = 0;
    for (int s = 0; s < 100; ++s) {
      VectorXd w = random_simplex_weights(mu0.size(), rng);
      w[s % mu0.size()] = 0.0;
      normalize_weights(w);
      const AtomicMeasure mu = AtomicMeasure::unchecked(mu0.atoms_ptr(), w);
      const ActionVec v = random_feasible_action(2, R, K, rng);
      const AtomicMeasure post = bayes_update(mu, v, rng.normal(), 1.0);
      if (!support_leq(post, mu)) ++violations;
    }
    b.record("measures.support_preserved_by_bayes", violations == 0, violations, 0.0);
  });

  // --- filter_dynamics ---------------------------------------------------------
  const ActionVec probe = [&] {
    for (const auto& v : actions.candidates()) {
      const VectorXd h = eval_h(v, mu0.atoms());
      if ((h.array() - h[0]).abs().maxCoeff() > 1e-12) return v;
    }
    return actions[0];
  }();

  b.guarded("filter.martingale_identity", [&] {
    RngStream rng(seed, 1007);
    const int m = 20000;
    const double target = mu0.mean();
    double sum = 0.0, sum_sq = 0.0;
    for (int s = 0; s < m; ++s) {
      const double val = exact_transition_sample(mu0, probe, 0.25, rng).mean();
      sum += val;
      sum_sq += val * val;
    }
    const double mean = sum / m;
    const double se = std::sqrt(std::max(0.0, (sum_sq - m * mean * mean) / (m - 1)) / m);
    b.record("filter.martingale_identity", std::abs(mean - target) <= 4.0 * se,
             std::abs(mean - target), 4.0 * se);
  });
  b.guarded("filter.euler_matches_exact", [&] {
    RngStream rng(seed, 1008);
    const double delta = 0.1, dt = 1e-3;
    const int m = 4000, steps = static_cast<int>(std::lround(delta / dt));
    const VectorXd h = eval_h(probe, mu0.atoms());
    VectorXd m1(2), m2(2), se1(2), se2(2);
    for (int variant = 0; variant < 2; ++variant) {
      double s1 = 0, s1q = 0, s2 = 0, s2q = 0;
      for (int s = 0; s < m; ++s) {
        double val;
        if (variant == 0) {
          VectorXd theta = mu0.weights();
          for (int k = 0; k < steps; ++k)
            euler_step_inplace(theta, h, std::sqrt(dt) * rng.normal());
          val = theta.dot(mu0.atoms());
        } else {
          val = exact_transition_sample(mu0, h, delta, rng).mean();
        }
        s1 += val;
        s1q += val * val;
        s2 += val * val;
        s2q += val * val * val * val;
      }
      m1[variant] = s1 / m;
      m2[variant] = s2 / m;
      se1[variant] = std::sqrt(std::max(0.0, (s1q - m * m1[variant] * m1[variant]) / (m - 1)) / m);
      se2[variant] = std::sqrt(std::max(0.0, (s2q - m * m2[variant] * m2[variant]) / (m - 1)) / m);
    }
    const double diff = std::max(std::abs(m1[0] - m1[1]), std::abs(m2[0] - m2[1]));
    const double tol = std::max(
        1e-2, 4.0 * std::max(std::hypot(se1[0], se1[1]), std::hypot(se2[0], se2[1])));
    b.record("filter.euler_matches_exact", diff <= tol, diff, tol);
  });
  b.guarded("filter.paths_mass_and_support", [&] {
    const SimulationParams sim = cfg.simulation();
    const int level = cfg.solver().level;
    ControlSchedule sched = ControlSchedule::constant(
        level, 0, static_cast<int>(std::lround(sim.horizon / std::ldexp(1.0, -level))));
    double worst = 0.0;
    int support_violations = 0;
    for (int p = 0; p < 5; ++p) {
      RngStream rng(seed, 2000 + p);
      const PathSample path =
          simulate_closed_loop(mu0, sched, actions, sim.horizon, sim.dt, rng);
      for (Eigen::Index k = 0; k < path.times.size(); ++k) {
        worst = std::max(worst, std::abs(path.filter_weights.row(k).sum() - 1.0));
        if (k > 0)
          for (Eigen::Index i = 0; i < mu0.size(); ++i)
            if (path.filter_weights(k, i) > 0.0 && path.filter_weights(k - 1, i) == 0.0)
              ++support_violations;
      }
    }
    b.record("filter.paths_mass_conservation", worst <= kMassTol, worst, kMassTol);
    b.record("filter.paths_support_monotone", support_violations == 0, support_violations, 0.0);
  });
  b.guarded("filter.linear_reduction_consistency", [&] {
    RngStream rng(seed, 1009);
    double worst = 0.0;
    for (int s = 0; s < 200; ++s) {
      const double bmax = std::sqrt(K) / R;
      const double bb = (2.0 * rng.uniform() - 1.0) * 0.99 * bmax;
      VectorXd coeffs = VectorXd::Zero(2);
      coeffs[0] = bb;
      const ActionVec v(coeffs, R, K);
      const double y = rng.normal(), t = rng.uniform();
      const AtomicMeasure a = linear_reduction_filter(mu0, bb, y, t);
      const AtomicMeasure b2 = bayes_update(mu0, v, y, t);
      worst = std::max(worst, (a.weights() - b2.weights()).cwiseAbs().maxCoeff());
    }
    b.record("filter.linear_reduction_consistency", worst <= 1e-12, worst, 1e-12);
  });

  // --- objective ---------------------------------------------------------------
  b.guarded("objective.cost_within_kmax", [&] {
    RngStream rng(seed, 1010);
    double worst = 0.0;
    for (int s = 0; s < 500; ++s) {
      const AtomicMeasure mu = AtomicMeasure::unchecked(
          mu0.atoms_ptr(), random_simplex_weights(mu0.size(), rng));
      for (const auto& v : actions.candidates()) worst = std::max(worst, std::abs(cm(mu, v)));
    }
    b.record("objective.cost_within_kmax", worst <= cm.k_max + 1e-12, worst, cm.k_max + 1e-12);
  });
  b.guarded("objective.bounded_estimate", [&] {
    const SimulationParams sim = cfg.simulation();
    const int level = cfg.solver().level;
    ControlSchedule sched = ControlSchedule::constant(
        level, 0, static_cast<int>(std::lround(sim.horizon / std::ldexp(1.0, -level))));
    const EstimateResult est =
        estimate_J(sched, mu0, cm, actions, 200, sim.horizon, sim.dt, seed + 7, workers);
    const double bound =
        cm.k_max * (1.0 - std::exp(-cm.beta * sim.horizon)) / cm.beta + 4.0 * est.stderr_;
    b.record("objective.bounded_estimate", std::abs(est.mean) <= bound, std::abs(est.mean), bound);
  });
  b.guarded("objective.truncation_monotone", [&] {
    const SimulationParams sim = cfg.simulation();
    const int level = cfg.solver().level;
    const double delta = std::ldexp(1.0, -level);
    const double t_short = sim.horizon, t_long = 2.0 * sim.horizon;
    ControlSchedule s1 = ControlSchedule::constant(
        level, 0, static_cast<int>(std::lround(t_short / delta)));
    ControlSchedule s2 = ControlSchedule::constant(
        level, 0, static_cast<int>(std::lround(t_long / delta)));
    const EstimateResult e1 = estimate_J(s1, mu0, cm, actions, 400, t_short, sim.dt, seed + 8, workers);
    const EstimateResult e2 = estimate_J(s2, mu0, cm, actions, 400, t_long, sim.dt, seed + 9, workers);
    const double diff = std::abs(e1.mean - e2.mean);
    const double tol = truncation_error(cm, t_short) + 4.0 * std::hypot(e1.stderr_, e2.stderr_);
    b.record("objective.truncation_monotone", diff <= tol, diff, tol);
  });
  if (cm.kind == "expected_pointwise") {
    b.guarded("objective.pointwise_continuity", [&] {
      RngStream rng(seed, 1011);
      const auto params = cfg.raw().at("cost").value("params", nlohmann::json::object());
      const auto poly = params.value("poly", std::vector<double>{0.0, 1.0});
      const VectorXd q = Eigen::Map<const VectorXd>(
          poly.data(), static_cast<Eigen::Index>(poly.size()));
      double lip = 0.0;
      const double lo = mu0.atoms()[0], hi = mu0.atoms()[mu0.size() - 1];
      for (int s = 0; s <= 2000; ++s) {
        const double x = lo + (hi - lo) * s / 2000.0;
        double deriv = 0.0, xp = 1.0;
        for (Eigen::Index i = 1; i < q.size(); ++i, xp *= x) deriv += i * q[i] * xp;
        lip = std::max(lip, std::abs(deriv));
      }
      double worst = 0.0;
      for (int s = 0; s < 200; ++s) {
        const AtomicMeasure a = AtomicMeasure::unchecked(
            mu0.atoms_ptr(), random_simplex_weights(mu0.size(), rng));
        const AtomicMeasure c = AtomicMeasure::unchecked(
            mu0.atoms_ptr(), random_simplex_weights(mu0.size(), rng));
        const double dk = std::abs(cm(a, actions[0]) - cm(c, actions[0]));
        worst = std::max(worst, dk - lip * wasserstein1(a, c));
      }
      b.record("objective.pointwise_continuity", worst <= 1e-10, worst, 1e-10);
    });
  }

  // --- dp_solver ----------------------------------------------------------------
  b.guarded("solver.small_solve_suite", [&] {
    const SolverParams sp = cfg.solver();
    const int m = std::min(sp.resolution, 16);
    auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(mu0.atoms_ptr(), m, sp.node_cap));
    const double delta = std::ldexp(1.0, -sp.level);
    const double tol = 1e-10;
    const ValueFunction V =
        value_iteration(grid, delta, actions, cm, 12, 4, tol, 20000, workers);
    const double gamma = std::exp(-cm.beta * delta);

    double worst_ratio = 0.0;
    for (std::size_t i = 1; i < V.residual_history.size(); ++i) {
      if (V.residual_history[i - 1] <= 1e-12) break;
      worst_ratio = std::max(worst_ratio, V.residual_history[i] / V.residual_history[i - 1]);
    }
    b.record("solver.contraction_ratio", worst_ratio <= gamma + 1e-3, worst_ratio, gamma + 1e-3);

    double vertex_err = 0.0;
    for (Eigen::Index node = 0; node < grid->node_count(); ++node) {
      Eigen::Index atom = -1;
      if (!grid->is_vertex(node, &atom)) continue;
      double mink = std::numeric_limits<double>::infinity();
      const AtomicMeasure dirac = grid->node_measure(node);
      for (const auto& v : actions.candidates()) mink = std::min(mink, cm(dirac, v));
      vertex_err = std::max(vertex_err, std::abs(V.values[node] - mink / cm.beta));
    }
    b.record("solver.dirac_boundary", vertex_err <= 1e-9, vertex_err, 1e-9);

    const double vbound = cm.k_max / cm.beta + 1e-9;
    b.record("solver.value_bounded", V.values.cwiseAbs().maxCoeff() <= vbound,
             V.values.cwiseAbs().maxCoeff(), vbound);

    RngStream rng(seed, 1012);
    const double lip = empirical_lipschitz(V);
    const double cell = grid->cell_diameter_w1();
    double worst = 0.0;
    for (int s = 0; s < 20; ++s) {
      const AtomicMeasure mu = AtomicMeasure::unchecked(
          mu0.atoms_ptr(), random_simplex_weights(mu0.size(), rng));
      const auto [val, arg] = bellman_apply(V, mu, delta, actions, cm, 12, 4);
      worst = std::max(worst, std::abs(val - interpolate(V, mu)));
    }
    const double thr = 2.0 * tol + 1.5 * lip * cell;
    b.record("solver.bellman_self_consistency", worst <= thr, worst, thr);
  });

  // --- hjb ---------------------------------------------------------------------
  b.guarded("hjb.gauge_invariance", [&] {
    RngStream rng(seed, 1013);
    double worst = 0.0;
    for (int s = 0; s < 50; ++s) {
      const AtomicMeasure mu = AtomicMeasure::unchecked(
          mu0.atoms_ptr(), random_simplex_weights(mu0.size(), rng));
      VectorXd f(3);
      f << 0.0, rng.normal(), 0.5 * rng.normal();
      PolyFunctional phi{{f, f}};
      const ActionVec v = random_feasible_action(2, R, K, rng);
      const VectorXd s_meas = sigma_measure(v, mu);
      const double a0 = rng.normal(), a1 = rng.normal();
      double shifted = 0.0;
      for (Eigen::Index i = 0; i < mu.size(); ++i)
        for (Eigen::Index j = 0; j < mu.size(); ++j) {
          const double gauge = (a0 + a1 * mu.atoms()[i]) + (a0 + a1 * mu.atoms()[j]);
          shifted += (second_derivative(phi, mu, mu.atoms()[i], mu.atoms()[j]) + gauge) *
                     s_meas[i] * s_meas[j];
        }
      worst = std::max(worst, std::abs(0.5 * shifted - generator(phi, mu, v)));
    }
    b.record("hjb.gauge_invariance", worst <= 1e-12, worst, 1e-12);
  });
  b.guarded("hjb.covariance_nonnegative", [&] {
    RngStream rng(seed, 1014);
    double worst = 0.0;
    for (int s = 0; s < 100; ++s) {
      const AtomicMeasure mu = AtomicMeasure::unchecked(
          mu0.atoms_ptr(), random_simplex_weights(mu0.size(), rng));
      VectorXd f(3);
      f << rng.normal(), rng.normal(), rng.normal();
      PolyFunctional phi{{f, f}};
      worst = std::min(worst, generator(phi, mu, random_feasible_action(3, R, K, rng)));
    }
    b.record("hjb.covariance_nonnegative", worst >= -1e-15, worst, -1e-15);
  });
  b.guarded("hjb.hamiltonian_affine_in_r", [&] {
    RngStream rng(seed, 1015);
    const auto d2 = [](double x, double y) { return 1.0 + x * y; };
    double worst = 0.0;
    for (int s = 0; s < 50; ++s) {
      const AtomicMeasure mu = AtomicMeasure::unchecked(
          mu0.atoms_ptr(), random_simplex_weights(mu0.size(), rng));
      const double r = rng.normal(), dr = rng.normal();
      const double lhs = hamiltonian(mu, r + dr, d2, actions, cm);
      const double rhs = hamiltonian(mu, r, d2, actions, cm) + cm.beta * dr;
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    b.record("hjb.hamiltonian_affine_in_r", worst <= 1e-12, worst, 1e-12);
  });
  b.guarded("hjb.dynkin_slope", [&] {
    RngStream rng(seed, 1016);
    VectorXd f(2);
    f << 0.0, 1.0;
    PolyFunctional phi{{f, f}};
    VectorXd h_poly = VectorXd::Zero(probe.order() + 1);
    h_poly.tail(probe.order()) = probe.coeffs();
    const double c2 = 0.5 * second_generator_sup(f, h_poly, mu0, probe, 400, rng);
    const double h = 0.05;
    const SlopeReport report = generator_consistency_check(phi, mu0, probe, {h}, 20000, seed + 21);
    const double thr = c2 * h + 4.0 * report.stderr_[0];
    b.record("hjb.dynkin_slope", report.deviation[0] <= thr, report.deviation[0], thr);
  });

  return results;
}

}  // namespace mvmc
