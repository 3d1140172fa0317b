#include <cmath>

#include <doctest.h>

#include "mvmc/dp.hpp"
#include "mvmc/errors.hpp"
#include "mvmc/rng.hpp"

using namespace mvmc;

namespace {

std::shared_ptr<const VectorXd> two_atoms() {
  auto atoms = std::make_shared<VectorXd>(2);
  *atoms << -1.0, 1.0;
  return atoms;
}

std::shared_ptr<const VectorXd> three_atoms() {
  auto atoms = std::make_shared<VectorXd>(3);
  *atoms << -1.0, 0.0, 1.0;
  return atoms;
}

ActionGrid benchmark_actions() {
  ActionGridSpec spec;
  spec.d = 1;
  spec.R = 1.0;
  spec.K = 1.0;
  spec.levels = {{0.0, 0.25, 0.5, 0.75, 1.0}};
  return make_action_grid(spec);
}

ValueFunction constant_table(std::shared_ptr<const SimplexGrid> grid, double value) {
  ValueFunction V;
  V.grid = std::move(grid);
  V.values = VectorXd::Constant(V.grid->node_count(), value);
  return V;
}

}  // namespace

TEST_CASE("interpolation basics") {
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(two_atoms(), 8));
  VectorXd values(grid->node_count());
  for (Eigen::Index i = 0; i < grid->node_count(); ++i) values[i] = std::sin(0.7 * i);

  for (Eigen::Index i = 0; i < grid->node_count(); ++i)
    CHECK(interpolate(*grid, values, grid->node_weights(i)) ==
          doctest::Approx(values[i]).epsilon(1e-15));

  // midpoint of adjacent nodes -> average
  const VectorXd mid = 0.5 * (grid->node_weights(2) + grid->node_weights(3));
  CHECK(interpolate(*grid, values, mid) ==
        doctest::Approx(0.5 * (values[2] + values[3])).epsilon(1e-13));

  const VectorXd constant = VectorXd::Constant(grid->node_count(), 3.25);
  VectorXd w(2);
  w << 0.371, 0.629;
  CHECK(interpolate(*grid, constant, w) == doctest::Approx(3.25).epsilon(1e-15));
}

TEST_CASE("interpolation on a three atom grid") {
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(three_atoms(), 6));
  VectorXd values(grid->node_count());
  RngStream rng(12, 0);
  for (Eigen::Index i = 0; i < grid->node_count(); ++i) values[i] = rng.normal();

  for (Eigen::Index i = 0; i < grid->node_count(); ++i)
    CHECK(interpolate(*grid, values, grid->node_weights(i)) ==
          doctest::Approx(values[i]).epsilon(1e-13));

  // convex combination stays within table bounds
  for (int s = 0; s < 200; ++s) {
    VectorXd w(3);
    for (int i = 0; i < 3; ++i) w[i] = -std::log(1.0 - rng.uniform());
    w /= w.sum();
    const double val = interpolate(*grid, values, w);
    CHECK(val <= values.maxCoeff() + 1e-12);
    CHECK(val >= values.minCoeff() - 1e-12);
  }

  // linear functions are reproduced exactly by barycentric interpolation
  VectorXd linear(grid->node_count());
  for (Eigen::Index i = 0; i < grid->node_count(); ++i) {
    const VectorXd node = grid->node_weights(i);
    linear[i] = 0.3 * node[0] - 1.1 * node[1] + 0.7 * node[2];
  }
  for (int s = 0; s < 100; ++s) {
    VectorXd w(3);
    for (int i = 0; i < 3; ++i) w[i] = -std::log(1.0 - rng.uniform());
    w /= w.sum();
    CHECK(interpolate(*grid, linear, w) ==
          doctest::Approx(0.3 * w[0] - 1.1 * w[1] + 0.7 * w[2]).epsilon(1e-12));
  }
}

TEST_CASE("bellman operator fixed point for constant cost") {
  const double c = 1.7, beta = 1.0, delta = 0.25;
  const CostModel cm = make_constant_cost(c, beta);
  const ActionGrid actions = benchmark_actions();
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(two_atoms(), 16));
  const ValueFunction V = constant_table(grid, c / beta);
  for (Eigen::Index i = 0; i < grid->node_count(); i += 3) {
    const auto [value, argmin] = bellman_apply(V, grid->node_measure(i), delta, actions, cm, 12, 4);
    CHECK(value == doctest::Approx(c / beta).epsilon(1e-12));
  }
}

TEST_CASE("exact ties resolve to the lowest action index") {
  // v = (t, 0, -t) keeps h(v, .) identically zero on atoms {-1, 1}, so the
  // two candidates are exact ties under any cost that ignores the action.
  VectorXd zero3 = VectorXd::Zero(3);
  VectorXd kernel(3);
  kernel << 0.3, 0.0, -0.3;
  const ActionGrid actions({ActionVec(zero3, 1.0, 1.0), ActionVec(kernel, 1.0, 1.0)}, 1.0, 1.0, 3,
                           "tie-pair");

  const CostModel cm = make_constant_cost(0.5, 1.0);
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(two_atoms(), 8));
  const ValueFunction V = constant_table(grid, 0.5);
  for (Eigen::Index i = 0; i < grid->node_count(); ++i) {
    const auto [value, argmin] =
        bellman_apply(V, grid->node_measure(i), 0.25, actions, cm, 8, 2);
    CHECK(argmin == 0);
  }
}

TEST_CASE("bellman at a dirac vertex is the absorbing closed form") {
  const double beta = 1.0, delta = 0.25;
  const AtomicMeasure dirac = AtomicMeasure::dirac(two_atoms(), 1);
  const CostModel cm = make_variance_plus_effort_cost(0.2, beta, *two_atoms(), 1.0, 1.0);
  const ActionGrid actions = benchmark_actions();
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(two_atoms(), 8));
  const ValueFunction V = constant_table(grid, 0.4);
  double min_k = std::numeric_limits<double>::infinity();
  for (const auto& v : actions.candidates()) min_k = std::min(min_k, cm(dirac, v));
  const double expected =
      min_k * (1.0 - std::exp(-beta * delta)) / beta + std::exp(-beta * delta) * 0.4;
  const auto [value, argmin] = bellman_apply(V, dirac, delta, actions, cm, 12, 4);
  CHECK(value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(argmin == 0);  // zero action minimizes variance + effort at a dirac
}

TEST_CASE("bellman quadrature agrees with a monte carlo oracle") {
  // one-step functional with the converged-looking table V(theta) = variance
  const double beta = 1.0, delta = 0.25;
  const int L = 8;
  const AtomicMeasure mu = AtomicMeasure(two_atoms(), VectorXd::Constant(2, 0.5));
  const CostModel cm = make_variance_plus_effort_cost(0.2, beta, *two_atoms(), 1.0, 1.0);
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(two_atoms(), 32));
  ValueFunction V;
  V.grid = grid;
  V.values.resize(grid->node_count());
  for (Eigen::Index i = 0; i < grid->node_count(); ++i)
    V.values[i] = grid->node_measure(i).variance();

  ActionGridSpec spec;
  spec.d = 1;
  spec.R = 1.0;
  spec.K = 1.0;
  spec.levels = {{1.0}};
  const ActionGrid single = make_action_grid(spec);
  const ActionVec v = single[0];

  const auto [quad_value, argmin] = bellman_apply(V, mu, delta, single, cm, 24, L);

  // Monte Carlo of the same functional: exact substep marginals via a real
  // Brownian path, rectangle rule in the state, exact discount weights.
  const double dt = delta / L;
  const VectorXd h = eval_h(v, mu.atoms());
  double sum = 0.0, sum_sq = 0.0;
  const int paths = 1000000;
  for (int p = 0; p < paths; ++p) {
    RngStream rng(4242, p);
    const Eigen::Index hidden = rng.uniform() < 0.5 ? 0 : 1;
    VectorXd theta = mu.weights();
    double cost = 0.0;
    for (int l = 0; l < L; ++l) {
      const double t0 = l * dt;
      const double w = (std::exp(-beta * t0) - std::exp(-beta * (t0 + dt))) / beta;
      cost += w * (AtomicMeasure::unchecked(mu.atoms_ptr(), theta).variance() +
                   0.2 * v.weighted_sq_norm());
      const double dy = h[hidden] * dt + std::sqrt(dt) * rng.normal();
      bayes_reweight(theta, h, dy, dt);
    }
    cost += std::exp(-beta * delta) * interpolate(*grid, V.values, theta);
    sum += cost;
    sum_sq += cost * cost;
  }
  const double mc_mean = sum / paths;
  const double mc_se =
      std::sqrt(std::max(0.0, (sum_sq - paths * mc_mean * mc_mean) / (paths - 1)) / paths);
  CHECK(std::abs(quad_value - mc_mean) <= 4.0 * mc_se);
}

TEST_CASE("value iteration on constant cost") {
  const double c = 0.9, beta = 1.0, delta = 0.5;
  const CostModel cm = make_constant_cost(c, beta);
  const ActionGrid actions = benchmark_actions();
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(two_atoms(), 8));
  const ValueFunction V = value_iteration(grid, delta, actions, cm, 8, 2, 1e-10, 200, 1);
  CHECK((V.values.array() - c / beta).abs().maxCoeff() <= 1e-9);
}

TEST_CASE("value iteration contraction and boundary on the benchmark") {
  const double beta = 1.0, delta = 0.25;
  const CostModel cm = make_variance_plus_effort_cost(0.2, beta, *two_atoms(), 1.0, 1.0);
  const ActionGrid actions = benchmark_actions();
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(two_atoms(), 24));
  const ValueFunction V = value_iteration(grid, delta, actions, cm, 16, 4, 1e-10, 500, 2);

  const double gamma = std::exp(-beta * delta);
  for (std::size_t i = 1; i < V.residual_history.size(); ++i) {
    if (V.residual_history[i - 1] <= 1e-12) break;
    CHECK(V.residual_history[i] / V.residual_history[i - 1] <= gamma + 1e-3);
  }

  for (Eigen::Index node = 0; node < grid->node_count(); ++node) {
    Eigen::Index atom;
    if (!grid->is_vertex(node, &atom)) continue;
    double min_k = std::numeric_limits<double>::infinity();
    const AtomicMeasure dirac = grid->node_measure(node);
    for (const auto& a : actions.candidates()) min_k = std::min(min_k, cm(dirac, a));
    CHECK(std::abs(V.values[node] - min_k / beta) <= 1e-9);
  }

  CHECK(V.values.cwiseAbs().maxCoeff() <= cm.k_max / beta + 1e-9);

  // bellman self-consistency at off-node states
  RngStream rng(8, 0);
  const double lip = empirical_lipschitz(V);
  const double cell = grid->cell_diameter_w1();
  for (int s = 0; s < 10; ++s) {
    VectorXd w(2);
    const double u = rng.uniform();
    w << u, 1.0 - u;
    const AtomicMeasure mu = AtomicMeasure::unchecked(two_atoms(), w);
    const auto [value, argmin] = bellman_apply(V, mu, delta, actions, cm, 16, 4);
    CHECK(std::abs(value - interpolate(V, mu)) <= 2e-10 + 1.5 * lip * cell);
  }
}

TEST_CASE("iteration cap raises a convergence error") {
  const CostModel cm = make_variance_plus_effort_cost(0.2, 1.0, *two_atoms(), 1.0, 1.0);
  const ActionGrid actions = benchmark_actions();
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(two_atoms(), 8));
  CHECK_THROWS_AS(value_iteration(grid, 0.25, actions, cm, 8, 2, 1e-12, 3, 1), ConvergenceError);
  CHECK_THROWS_AS(value_iteration(grid, 0.3, actions, cm, 8, 2, 1e-6, 100, 1), ConfigError);
}

TEST_CASE("extract_policy trivial cases") {
  const double delta = 0.25;
  const CostModel cm = make_variance_plus_effort_cost(0.2, 1.0, *two_atoms(), 1.0, 1.0);
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(two_atoms(), 8));

  ActionGridSpec one;
  one.d = 1;
  one.R = 1.0;
  one.K = 1.0;
  one.levels = {{0.5}};
  const ActionGrid singleton = make_action_grid(one);
  const ValueFunction V = value_iteration(grid, delta, singleton, cm, 8, 2, 1e-8, 500, 1);
  const ControlSchedule policy = extract_policy(V, delta, singleton, cm, 8, 2, 1);
  for (int a : policy.feedback) CHECK(a == 0);

  const ActionGrid actions = benchmark_actions();
  const ValueFunction Vb = value_iteration(grid, delta, actions, cm, 12, 4, 1e-9, 500, 1);
  const ControlSchedule greedy = extract_policy(Vb, delta, actions, cm, 12, 4, 1);
  for (Eigen::Index node = 0; node < grid->node_count(); ++node) {
    Eigen::Index atom;
    if (!grid->is_vertex(node, &atom)) continue;
    // at vertices the argmin is the cheapest action at the dirac
    double min_k = std::numeric_limits<double>::infinity();
    int arg = -1;
    const AtomicMeasure dirac = grid->node_measure(node);
    for (std::size_t a = 0; a < actions.size(); ++a) {
      if (cm(dirac, actions[a]) < min_k) {
        min_k = cm(dirac, actions[a]);
        arg = static_cast<int>(a);
      }
    }
    CHECK(greedy.feedback[node] == arg);
  }
}

TEST_CASE("refine study is flat for constant costs and monotone otherwise") {
  const CostModel constant = make_constant_cost(1.2, 1.0);
  const ActionGrid actions = benchmark_actions();
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(two_atoms(), 12));
  const AtomicMeasure mu0 = AtomicMeasure(two_atoms(), VectorXd::Constant(2, 0.5));

  const auto flat = refine_study(mu0, constant, actions, {0, 1, 2}, grid, 8, 2, 1e-9, 2000, 2);
  for (const auto& row : flat) CHECK(row.value_at_mu0 == doctest::Approx(1.2).epsilon(1e-8));

  const CostModel cm = make_variance_plus_effort_cost(0.2, 1.0, *two_atoms(), 1.0, 1.0);
  const auto rows = refine_study(mu0, cm, actions, {0, 1, 2}, grid, 12, 4, 1e-8, 2000, 2);
  const double eps = 2e-8 + grid->cell_diameter_w1();  // tolerance per level
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(rows[i].value_at_mu0 <= rows[i - 1].value_at_mu0 + eps);

  CHECK_THROWS_AS(refine_study(mu0, cm, actions, {2, 1}, grid, 8, 2, 1e-8, 100, 1), ConfigError);
}
