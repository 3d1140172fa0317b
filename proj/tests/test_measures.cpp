#include <cmath>
#include <random>

#include <doctest.h>

#include "mvmc/errors.hpp"
#include "mvmc/measures.hpp"

using namespace mvmc;

namespace {

std::shared_ptr<const VectorXd> make_atoms(std::initializer_list<double> xs) {
  auto atoms = std::make_shared<VectorXd>(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) (*atoms)[i++] = x;
  return atoms;
}

AtomicMeasure make_measure(std::shared_ptr<const VectorXd> atoms,
                           std::initializer_list<double> ws) {
  VectorXd w(static_cast<Eigen::Index>(ws.size()));
  Eigen::Index i = 0;
  for (double x : ws) w[i++] = x;
  return AtomicMeasure(std::move(atoms), std::move(w));
}

VectorXd random_simplex(Eigen::Index n, std::mt19937_64& eng) {
  std::uniform_real_distribution<double> uniform;
  VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = -std::log(1.0 - uniform(eng));
  w /= w.sum();
  return w;
}

}  // namespace

TEST_CASE("measure invariants") {
  auto atoms = make_atoms({-1.0, 1.0});
  CHECK_THROWS_AS(make_measure(atoms, {0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(make_measure(atoms, {-0.1, 1.1}), std::invalid_argument);
  CHECK_THROWS_AS(make_measure(make_atoms({1.0, -1.0}), {0.5, 0.5}), std::invalid_argument);
  const AtomicMeasure mu = make_measure(atoms, {0.25, 0.75});
  CHECK(mu.mean() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("integrate") {
  auto atoms = make_atoms({-1.0, 1.0});
  const AtomicMeasure mu = make_measure(atoms, {0.25, 0.75});
  CHECK(integrate(mu, [](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(integrate(mu, [](double x) { return x; }) == doctest::Approx(0.5).epsilon(1e-15));
  const AtomicMeasure dirac = AtomicMeasure::dirac(atoms, 0);
  CHECK(integrate(dirac, [](double x) { return x; }) == -1.0);
}

TEST_CASE("wasserstein1 closed form") {
  auto atoms = make_atoms({0.0, 1.0});
  const AtomicMeasure half = make_measure(atoms, {0.5, 0.5});
  const AtomicMeasure d0 = AtomicMeasure::dirac(atoms, 0);
  const AtomicMeasure d1 = AtomicMeasure::dirac(atoms, 1);
  CHECK(wasserstein1(half, half) == 0.0);
  CHECK(wasserstein1(d0, d1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(wasserstein1(half, d0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("wasserstein1 across different atom sets") {
  const AtomicMeasure a = make_measure(make_atoms({0.0}), {1.0});
  const AtomicMeasure b = make_measure(make_atoms({0.25, 0.75}), {0.5, 0.5});
  // transport 1/2 mass to 0.25 and 1/2 to 0.75
  CHECK(wasserstein1(a, b) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("wasserstein1 metric axioms on random triples") {
  std::mt19937_64 eng(5);
  auto atoms = make_atoms({-1.0, -0.2, 0.4, 1.0});
  for (int s = 0; s < 500; ++s) {
    const AtomicMeasure a = AtomicMeasure::unchecked(atoms, random_simplex(4, eng));
    const AtomicMeasure b = AtomicMeasure::unchecked(atoms, random_simplex(4, eng));
    const AtomicMeasure c = AtomicMeasure::unchecked(atoms, random_simplex(4, eng));
    CHECK(wasserstein1(a, b) == doctest::Approx(wasserstein1(b, a)).epsilon(1e-13));
    CHECK(wasserstein1(a, a) == 0.0);
    CHECK(wasserstein1(a, c) <= wasserstein1(a, b) + wasserstein1(b, c) + 1e-13);
  }
}

TEST_CASE("bayes_update documented values") {
  auto atoms = make_atoms({-1.0, 1.0});
  const AtomicMeasure mu = make_measure(atoms, {0.5, 0.5});
  const ActionVec id(VectorXd::Ones(1), 1.0, 1.0);

  // equal h values cancel in the likelihood
  const ActionVec zero(VectorXd::Zero(1), 1.0, 1.0);
  const AtomicMeasure unchanged = bayes_update(mu, zero, 3.7, 2.0);
  CHECK((unchanged.weights() - mu.weights()).cwiseAbs().maxCoeff() == 0.0);

  // symmetric observation keeps the symmetric prior
  const AtomicMeasure symmetric = bayes_update(mu, id, 0.0, 1.0);
  CHECK(symmetric.weights()[0] == doctest::Approx(0.5).epsilon(1e-15));

  // likelihood ratio e^{0.5} : e^{-1.5}
  const AtomicMeasure tilted = bayes_update(mu, id, 1.0, 1.0);
  CHECK(tilted.weights()[1] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-14));

  // t = 0, y = 0 leaves the measure untouched
  const AtomicMeasure still = bayes_update(mu, id, 0.0, 0.0);
  CHECK((still.weights() - mu.weights()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bayes_update overflow guard and mass") {
  auto atoms = make_atoms({-1.0, 1.0});
  const AtomicMeasure mu = make_measure(atoms, {0.5, 0.5});
  const ActionVec id(VectorXd::Ones(1), 1.0, 1.0);
  const AtomicMeasure extreme = bayes_update(mu, id, 800.0, 1.0);
  CHECK(std::abs(extreme.weights().sum() - 1.0) <= kMassTol);
  CHECK(extreme.weights()[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sequential bayes composition") {
  std::mt19937_64 eng(17);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  auto atoms = make_atoms({-0.9, -0.1, 0.4, 0.8});
  VectorXd coeffs(2);
  coeffs << 0.6, 0.3;
  const ActionVec v(coeffs, 1.0, 1.0);
  for (int s = 0; s < 300; ++s) {
    const AtomicMeasure mu = AtomicMeasure::unchecked(atoms, random_simplex(4, eng));
    const double y1 = normal(eng), y2 = normal(eng);
    const double t1 = uniform(eng), t2 = uniform(eng);
    const AtomicMeasure split = bayes_update(bayes_update(mu, v, y1, t1), v, y2, t2);
    const AtomicMeasure joint = bayes_update(mu, v, y1 + y2, t1 + t2);
    CHECK((split.weights() - joint.weights()).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("support order and preservation") {
  auto atoms = make_atoms({-1.0, 0.0, 1.0});
  const AtomicMeasure uniform_mu = make_measure(atoms, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  const AtomicMeasure dirac = AtomicMeasure::dirac(atoms, 0);
  CHECK(support_leq(uniform_mu, uniform_mu));
  CHECK(support_leq(dirac, uniform_mu));
  CHECK_FALSE(support_leq(uniform_mu, dirac));

  const AtomicMeasure partial = make_measure(atoms, {0.5, 0.0, 0.5});
  const ActionVec id(VectorXd::Ones(1), 1.0, 1.0);
  const AtomicMeasure post = bayes_update(partial, id, 2.5, 0.7);
  CHECK(support_leq(post, partial));
  CHECK(post.weights()[1] == 0.0);
}

TEST_CASE("simplex grid enumeration") {
  auto atoms2 = make_atoms({-1.0, 1.0});
  const SimplexGrid g2 = make_simplex_grid(atoms2, 2);
  REQUIRE(g2.node_count() == 3);
  CHECK(g2.node_weights(0)[0] == 0.0);
  CHECK(g2.node_weights(1)[0] == doctest::Approx(0.5));
  CHECK(g2.node_weights(2)[0] == 1.0);

  const SimplexGrid g1 = make_simplex_grid(make_atoms({0.3}), 5);
  CHECK(g1.node_count() == 1);
  CHECK(g1.node_weights(0)[0] == 1.0);

  const SimplexGrid g3 = make_simplex_grid(make_atoms({-1.0, 0.0, 1.0}), 1);
  CHECK(g3.node_count() == 3);
  int vertices = 0;
  for (Eigen::Index i = 0; i < g3.node_count(); ++i)
    if (g3.is_vertex(i)) ++vertices;
  CHECK(vertices == 3);

  // C(m+N-1, N-1) node count
  const SimplexGrid g4 = make_simplex_grid(make_atoms({-1.0, -0.5, 0.5, 1.0}), 6);
  CHECK(g4.node_count() == 84);

  CHECK_THROWS_AS(make_simplex_grid(atoms2, 1 << 24, 1000), ConfigError);
}

TEST_CASE("simplex grid lookup and nearest node") {
  auto atoms = make_atoms({-1.0, 0.0, 1.0});
  const SimplexGrid grid = make_simplex_grid(atoms, 4);
  for (Eigen::Index i = 0; i < grid.node_count(); ++i)
    CHECK(grid.index_of(grid.composition(i)) == i);
  CHECK(grid.index_of({1, 1, 1}) == -1);  // wrong total

  VectorXd w(3);
  w << 0.26, 0.5, 0.24;
  const Eigen::Index nearest = grid.nearest_node_w1(w);
  const std::vector<int> expected{1, 2, 1};
  CHECK(grid.composition(nearest) == expected);

  // exact node maps to itself
  for (Eigen::Index i = 0; i < grid.node_count(); ++i)
    CHECK(grid.nearest_node_w1(grid.node_weights(i)) == i);
}

TEST_CASE("discretize_prior placements") {
  const auto uniform_cdf = [](double x) { return std::clamp((x + 1.0) / 2.0, 0.0, 1.0); };
  const AtomicMeasure quant = discretize_prior(uniform_cdf, -1.0, 1.0, 4, PriorPlacement::kQuantile);
  CHECK(quant.size() == 4);
  CHECK(quant.weights()[0] == doctest::Approx(0.25));
  CHECK(quant.atoms()[0] == doctest::Approx(-0.75).epsilon(1e-9));
  CHECK(quant.atoms()[3] == doctest::Approx(0.75).epsilon(1e-9));

  const AtomicMeasure unif = discretize_prior(uniform_cdf, -1.0, 1.0, 4, PriorPlacement::kUniform);
  CHECK(unif.atoms()[0] == doctest::Approx(-0.75));
  CHECK(unif.weights()[2] == doctest::Approx(0.25).epsilon(1e-12));
}
