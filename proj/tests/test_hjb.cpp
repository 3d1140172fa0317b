#include <cmath>

#include <doctest.h>

#include "mvmc/hjb.hpp"
#include "mvmc/rng.hpp"

using namespace mvmc;

namespace {

std::shared_ptr<const VectorXd> two_atoms() {
  auto atoms = std::make_shared<VectorXd>(2);
  *atoms << -1.0, 1.0;
  return atoms;
}

AtomicMeasure half_half() { return AtomicMeasure(two_atoms(), VectorXd::Constant(2, 0.5)); }

// f with values (0, 1) on atoms (-1, 1): f(x) = (1 + x) / 2
VectorXd step_poly() {
  VectorXd f(2);
  f << 0.5, 0.5;
  return f;
}

// h(v, x) with values (0, 1) on atoms (-1, 1): v = (1/2, 1/2)
ActionVec step_action() {
  VectorXd c(2);
  c << 0.5, 0.5;
  return ActionVec(c, 1.0, 1.0);
}

ActionGrid benchmark_actions() {
  ActionGridSpec spec;
  spec.d = 1;
  spec.R = 1.0;
  spec.K = 1.0;
  spec.levels = {{0.0, 0.25, 0.5, 0.75, 1.0}};
  return make_action_grid(spec);
}

}  // namespace

TEST_CASE("functional derivatives") {
  const AtomicMeasure mu = half_half();
  VectorXd p(2);
  p << 0.0, 1.0;  // p(x) = x

  const PolyFunctional linear{{p}};
  CHECK(first_derivative(linear, mu, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(second_derivative(linear, mu, 0.5, -0.5) == 0.0);

  // mu(p)^2 with mu(p) = 0.5 on a tilted measure
  VectorXd tilted_w(2);
  tilted_w << 0.25, 0.75;
  const AtomicMeasure tilted = AtomicMeasure(two_atoms(), tilted_w);
  const PolyFunctional square{{p, p}};
  CHECK(first_derivative(square, tilted, 0.7) == doctest::Approx(2.0 * 0.5 * 0.7).epsilon(1e-14));
  CHECK(second_derivative(square, tilted, 0.3, -0.4) ==
        doctest::Approx(2.0 * 0.3 * -0.4).epsilon(1e-14));

  // constant factor p = 1: phi = mu(1) = 1, derivative identically one
  VectorXd one(1);
  one << 1.0;
  const PolyFunctional constant{{one}};
  CHECK(eval(constant, mu) == 1.0);
  CHECK(first_derivative(constant, mu, -1.0) == 1.0);

  VectorXd q(3);
  q << 0.2, 0.0, 1.0;  // q(x) = 0.2 + x^2
  const PolyFunctional product{{p, q}};
  const double mu_p = mu.mean();
  const double mu_q = 0.2 + 1.0;
  CHECK(second_derivative(product, mu, 0.5, -0.25) ==
        doctest::Approx(0.5 * (0.2 + 0.0625) + (0.2 + 0.25) * (-0.25)).epsilon(1e-13));
  CHECK(first_derivative(product, mu, 0.5) ==
        doctest::Approx(0.5 * mu_q + (0.2 + 0.25) * mu_p).epsilon(1e-13));
}

TEST_CASE("sigma measure") {
  const AtomicMeasure mu = half_half();
  const VectorXd s = sigma_measure(step_action(), mu);
  CHECK(s[0] == doctest::Approx(-0.25).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(s.sum() == doctest::Approx(0.0).epsilon(1e-16));

  CHECK(sigma_measure(step_action(), AtomicMeasure::dirac(two_atoms(), 0)).cwiseAbs().maxCoeff() ==
        0.0);

  // identical formula as the filter diffusion coefficient
  const VectorXd via_filter = diffusion_coeff(mu, step_action());
  CHECK((s - via_filter).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generator closed forms") {
  const AtomicMeasure mu = half_half();
  VectorXd p(2);
  p << 0.0, 1.0;

  // linear functionals are martingales: no drift
  CHECK(generator(PolyFunctional{{p}}, mu, step_action()) == 0.0);

  // phi = mu(f)^2 with f = (0,1), h = (0,1): L phi = Cov(f,h)^2 = 1/16
  const PolyFunctional square{{step_poly(), step_poly()}};
  CHECK(generator(square, mu, step_action()) == doctest::Approx(0.0625).epsilon(1e-14));

  CHECK(generator(square, AtomicMeasure::dirac(two_atoms(), 1), step_action()) == 0.0);
}

TEST_CASE("generator equals covariance squared on random instances") {
  RngStream rng(21, 0);
  auto atoms = std::make_shared<VectorXd>(3);
  *atoms << -0.8, 0.1, 0.9;
  for (int s = 0; s < 100; ++s) {
    VectorXd w(3);
    for (int i = 0; i < 3; ++i) w[i] = -std::log(1.0 - rng.uniform());
    w /= w.sum();
    const AtomicMeasure mu = AtomicMeasure::unchecked(atoms, w);
    VectorXd f(3), c(2);
    f << rng.normal(), rng.normal(), 0.4 * rng.normal();
    c << 0.5 * rng.normal(), 0.3 * rng.normal();
    const ActionVec v = project_action(c, 1.0, 1.0);
    const PolyFunctional phi{{f, f}};
    const VectorXd h = eval_h(v, *atoms);
    double cov = 0.0, mu_f = 0.0, mu_h = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double fx = poly_eval(f, (*atoms)[i]);
      mu_f += w[i] * fx;
      mu_h += w[i] * h[i];
    }
    for (int i = 0; i < 3; ++i) cov += w[i] * (poly_eval(f, (*atoms)[i]) - mu_f) * (h[i] - mu_h);
    CHECK(generator(phi, mu, v) == doctest::Approx(cov * cov).epsilon(1e-11));
    CHECK(generator(phi, mu, v) >= -1e-15);
  }
}

TEST_CASE("generator gauge invariance") {
  RngStream rng(22, 0);
  const AtomicMeasure mu = half_half();
  const PolyFunctional phi{{step_poly(), step_poly()}};
  const ActionVec v = step_action();
  const VectorXd s = sigma_measure(v, mu);
  const double reference = generator(phi, mu, v);
  for (int trial = 0; trial < 50; ++trial) {
    const double a0 = rng.normal(), a1 = rng.normal();
    double shifted = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i)
      for (Eigen::Index j = 0; j < mu.size(); ++j) {
        const double gauge =
            (a0 + a1 * mu.atoms()[i]) + (a0 + a1 * mu.atoms()[j]);
        shifted += (second_derivative(phi, mu, mu.atoms()[i], mu.atoms()[j]) + gauge) * s[i] * s[j];
      }
    CHECK(0.5 * shifted == doctest::Approx(reference).epsilon(1e-12));
  }
}

TEST_CASE("hamiltonian identities") {
  const ActionGrid actions = benchmark_actions();
  const CostModel cm = make_variance_plus_effort_cost(0.2, 1.0, *two_atoms(), 1.0, 1.0);

  // dirac boundary: H = 0 at r = min_v k / beta
  const AtomicMeasure dirac = AtomicMeasure::dirac(two_atoms(), 0);
  double min_k = std::numeric_limits<double>::infinity();
  for (const auto& v : actions.candidates()) min_k = std::min(min_k, cm(dirac, v));
  const auto d2 = [](double x, double y) { return 2.0 * x * y; };
  CHECK(hamiltonian(dirac, min_k / cm.beta, d2, actions, cm) ==
        doctest::Approx(0.0).epsilon(1e-14));

  // affine in r with slope beta
  const AtomicMeasure mu = half_half();
  const double base = hamiltonian(mu, 0.3, d2, actions, cm);
  CHECK(hamiltonian(mu, 0.3 + 0.9, d2, actions, cm) ==
        doctest::Approx(base + cm.beta * 0.9).epsilon(1e-13));

  // nonincreasing in the quadratic form: inflate d2 by a psd kernel
  const auto d2_big = [](double x, double y) { return 2.0 * x * y + 4.0 * (1.0 + x) * (1.0 + y); };
  CHECK(hamiltonian(mu, 0.3, d2_big, actions, cm) <= base + 1e-14);

  // with the zero action available and a constant cost, H >= 0 at r = c/beta
  const CostModel constant = make_constant_cost(0.8, 1.0);
  const double h_const = hamiltonian(mu, 0.8, d2, actions, constant);
  CHECK(h_const >= -1e-14);
}

TEST_CASE("dynkin slopes converge to the generator") {
  const AtomicMeasure mu = half_half();
  const PolyFunctional square{{step_poly(), step_poly()}};
  const ActionVec v = step_action();

  // exact slope bias bound: |slope(h) - L phi| <= h/2 sup |L(L phi)|, and on
  // this instance L phi(theta) = theta^2 (1-theta)^2 along the weight of the
  // +1 atom, so L(L phi) = s^2/2 (L phi)'' with s = theta(1-theta).
  double sup_llphi = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    const double theta = static_cast<double>(i) / 2000.0;
    const double s2 = theta * theta * (1.0 - theta) * (1.0 - theta);
    const double dd = 2.0 - 12.0 * theta + 12.0 * theta * theta;
    sup_llphi = std::max(sup_llphi, std::abs(0.5 * s2 * dd));
  }
  const double c_bias = 0.5 * sup_llphi;

  const SlopeReport report =
      generator_consistency_check(square, mu, v, {0.1, 0.05, 0.025}, 40000, 2026);
  CHECK(report.generator_value == doctest::Approx(0.0625).epsilon(1e-14));
  for (std::size_t i = 0; i < report.h.size(); ++i)
    CHECK(report.deviation[i] <= c_bias * report.h[i] + 4.0 * report.stderr_[i]);

  // linear functional: slopes vanish
  VectorXd p(2);
  p << 0.0, 1.0;
  const SlopeReport flat = generator_consistency_check(PolyFunctional{{p}}, mu, v, {0.1}, 20000, 7);
  CHECK(std::abs(flat.slope[0]) <= 4.0 * flat.stderr_[0]);
  CHECK(flat.generator_value == 0.0);

  // dirac start: transitions are frozen, slopes identically zero
  const SlopeReport frozen = generator_consistency_check(
      square, AtomicMeasure::dirac(two_atoms(), 0), v, {0.1, 0.05}, 200, 3);
  CHECK(frozen.slope[0] == 0.0);
  CHECK(frozen.slope[1] == 0.0);
}

TEST_CASE("hjb residual diagnostic on the constant-cost exact solution") {
  const double c = 1.1, beta = 1.0;
  const CostModel cm = make_constant_cost(c, beta);
  const ActionGrid actions = benchmark_actions();
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(two_atoms(), 32));
  ValueFunction V;
  V.grid = grid;
  V.values = VectorXd::Constant(grid->node_count(), c / beta);
  V.level = 2;

  const HjbResidualReport report = hjb_residual_diagnostic(V, actions, cm);
  CHECK_FALSE(report.low_resolution);
  CHECK(report.vertex_max_abs <= 1e-12);
  // constant table: all second differences vanish, optimal action is v = 0
  CHECK(report.median_abs <= 1e-12);
  CHECK(report.p90_abs <= 1e-12);
}

TEST_CASE("hjb residual flags insufficient resolution") {
  auto atoms = std::make_shared<VectorXd>(3);
  *atoms << -1.0, 0.0, 1.0;
  const CostModel cm = make_constant_cost(1.0, 1.0);
  const ActionGrid actions = benchmark_actions();
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(atoms, 2));
  ValueFunction V;
  V.grid = grid;
  V.values = VectorXd::Constant(grid->node_count(), 1.0);
  V.level = 2;
  // m = 2 on three atoms leaves no node with all coordinates >= 1/m... the
  // single interior candidate (1,1,0)-type nodes fail the full stencil
  const HjbResidualReport report = hjb_residual_diagnostic(V, actions, cm);
  CHECK(report.low_resolution);
}
