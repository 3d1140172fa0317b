#include "mvmc/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mvmc/filter.hpp"
#include "mvmc/rng.hpp"

namespace mvmc {

double poly_eval(const VectorXd& coeffs, double x) {
  double acc = 0.0;
  for (Eigen::Index i = coeffs.size() - 1; i >= 0; --i) acc = coeffs[i] + x * acc;
  return acc;
}

namespace {

void require_factors(const PolyFunctional& phi) {
  if (phi.factors.empty()) throw std::invalid_argument("PolyFunctional: needs at least one factor");
}

double factor_integral(const VectorXd& coeffs, const AtomicMeasure& mu) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    acc += mu.weights()[i] * poly_eval(coeffs, mu.atoms()[i]);
  return acc;
}

}  // namespace

double eval(const PolyFunctional& phi, const AtomicMeasure& mu) {
  require_factors(phi);
  double acc = 1.0;
  for (const auto& p : phi.factors) acc *= factor_integral(p, mu);
  return acc;
}

double first_derivative(const PolyFunctional& phi, const AtomicMeasure& mu, double x) {
  require_factors(phi);
  const std::size_t J = phi.factors.size();
  std::vector<double> integrals(J);
  for (std::size_t j = 0; j < J; ++j) integrals[j] = factor_integral(phi.factors[j], mu);
  double acc = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    double term = poly_eval(phi.factors[j], x);
    for (std::size_t l = 0; l < J; ++l)
      if (l != j) term *= integrals[l];
    acc += term;
  }
  return acc;
}

double second_derivative(const PolyFunctional& phi, const AtomicMeasure& mu, double x, double y) {
  require_factors(phi);
  const std::size_t J = phi.factors.size();
  std::vector<double> integrals(J);
  for (std::size_t j = 0; j < J; ++j) integrals[j] = factor_integral(phi.factors[j], mu);
  double acc = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t l = 0; l < J; ++l) {
      if (l == j) continue;
      double term = poly_eval(phi.factors[j], x) * poly_eval(phi.factors[l], y);
      for (std::size_t m = 0; m < J; ++m)
        if (m != j && m != l) term *= integrals[m];
      acc += term;
    }
  }
  return acc;
}

VectorXd sigma_measure(const ActionVec& v, const AtomicMeasure& mu) {
  const VectorXd h = eval_h(v, mu.atoms());
  const double mean_h = mu.weights().dot(h);
  return mu.weights().array() * (h.array() - mean_h);
}

double generator(const PolyFunctional& phi, const AtomicMeasure& mu, const ActionVec& v) {
  const VectorXd s = sigma_measure(v, mu);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (s[i] == 0.0) continue;
    for (Eigen::Index j = 0; j < mu.size(); ++j) {
      if (s[j] == 0.0) continue;
      acc += second_derivative(phi, mu, mu.atoms()[i], mu.atoms()[j]) * s[i] * s[j];
    }
  }
  return 0.5 * acc;
}

double hamiltonian(const AtomicMeasure& mu, double r,
                   const std::function<double(double, double)>& d2, const ActionGrid& actions,
                   const CostModel& cm) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < actions.size(); ++a) {
    const VectorXd s = sigma_measure(actions[a], mu);
    double quad_form = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      if (s[i] == 0.0) continue;
      for (Eigen::Index j = 0; j < mu.size(); ++j) {
        if (s[j] == 0.0) continue;
        quad_form += d2(mu.atoms()[i], mu.atoms()[j]) * s[i] * s[j];
      }
    }
    best = std::max(best, -cm(mu, actions[a]) - 0.5 * quad_form);
  }
  return cm.beta * r + best;
}

SlopeReport generator_consistency_check(const PolyFunctional& phi, const AtomicMeasure& mu,
                                        const ActionVec& v, const std::vector<double>& h_list,
                                        int samples, std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("generator_consistency_check: need samples >= 2");
  for (std::size_t i = 1; i < h_list.size(); ++i)
    if (!(h_list[i] < h_list[i - 1]))
      throw std::invalid_argument("generator_consistency_check: h_list must decrease");

  SlopeReport report;
  report.generator_value = generator(phi, mu, v);
  const double phi_mu = eval(phi, mu);
  const VectorXd h_values = eval_h(v, mu.atoms());
  std::uint64_t stream = 0;
  for (double h : h_list) {
    double sum = 0.0, sum_sq = 0.0;
    for (int s = 0; s < samples; ++s) {
      RngStream rng(seed, stream++);
      const double val = eval(phi, exact_transition_sample(mu, h_values, h, rng));
      sum += val;
      sum_sq += val * val;
    }
    const double mean = sum / samples;
    const double var = std::max(0.0, (sum_sq - samples * mean * mean) / (samples - 1));
    const double slope = (mean - phi_mu) / h;
    report.h.push_back(h);
    report.slope.push_back(slope);
    report.stderr_.push_back(std::sqrt(var / samples) / h);
    report.deviation.push_back(std::abs(slope - report.generator_value));
  }
  return report;
}

HjbResidualReport hjb_residual_diagnostic(const ValueFunction& V, const ActionGrid& actions,
                                          const CostModel& cm, bool interior_only) {
  const SimplexGrid& grid = *V.grid;
  const Eigen::Index n = grid.atoms().size();
  const int m = grid.resolution();
  const MatrixXd h_table = action_h_table(actions, grid.atoms());

  HjbResidualReport report;
  std::vector<double> interior_res;
  double vertex_max = 0.0;

  for (Eigen::Index node = 0; node < grid.node_count(); ++node) {
    const auto& comp = grid.composition(node);
    const VectorXd theta = grid.node_weights(node);

    Eigen::Index vertex_atom = -1;
    if (grid.is_vertex(node, &vertex_atom)) {
      // sigma vanishes at Dirac nodes; the residual reduces to
      // beta V - min_v k.
      double min_k = std::numeric_limits<double>::infinity();
      const AtomicMeasure mu = grid.node_measure(node);
      for (std::size_t a = 0; a < actions.size(); ++a)
        min_k = std::min(min_k, cm(mu, actions[a]));
      vertex_max = std::max(vertex_max, std::abs(cm.beta * V.values[node] - min_k));
      continue;
    }

    // full stencil: every pair move theta +- (e_i - e_j)/m must stay on grid
    bool interior = true;
    for (Eigen::Index i = 0; i < n && interior; ++i)
      if (comp[i] < 1) interior = false;
    if (!interior && interior_only) continue;

    MatrixXd edge_d2 = MatrixXd::Zero(n, n);
    bool stencil_ok = true;
    for (Eigen::Index i = 0; i < n && stencil_ok; ++i) {
      for (Eigen::Index j = i + 1; j < n && stencil_ok; ++j) {
        std::vector<int> up(comp), down(comp);
        ++up[i];
        --up[j];
        --down[i];
        ++down[j];
        const Eigen::Index iu = grid.index_of(up);
        const Eigen::Index id = grid.index_of(down);
        if (iu < 0 || id < 0) {
          stencil_ok = false;
          break;
        }
        const double g =
            (V.values[iu] - 2.0 * V.values[node] + V.values[id]) * static_cast<double>(m) * m;
        edge_d2(i, j) = g;
        edge_d2(j, i) = g;
      }
    }
    if (!stencil_ok) continue;

    const AtomicMeasure mu = grid.node_measure(node);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < actions.size(); ++a) {
      const VectorXd s = diffusion_coeff(theta, h_table.row(a).transpose());
      // sum_ij d2 s_i s_j = -1/2 sum_ij G_ij s_i s_j for zero-sum s
      double quad_form = -0.5 * s.dot(edge_d2 * s);
      best = std::max(best, -cm(mu, actions[a]) - 0.5 * quad_form);
    }
    interior_res.push_back(std::abs(cm.beta * V.values[node] + best));
    report.interior_nodes.push_back(node);
  }

  report.vertex_max_abs = vertex_max;
  report.low_resolution = interior_res.empty();
  report.residuals = Eigen::Map<VectorXd>(interior_res.data(), interior_res.size());
  if (!interior_res.empty()) {
    std::vector<double> sorted(interior_res);
    std::sort(sorted.begin(), sorted.end());
    const auto q = [&sorted](double p) {
      const double pos = p * (sorted.size() - 1);
      const std::size_t lo = static_cast<std::size_t>(pos);
      const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
      return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
    };
    report.median_abs = q(0.5);
    report.p90_abs = q(0.9);
  }
  return report;
}

}  // namespace mvmc
