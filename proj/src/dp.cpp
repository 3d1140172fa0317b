#include "mvmc/dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "mvmc/errors.hpp"
#include "mvmc/parallel.hpp"
#include "mvmc/quadrature.hpp"

namespace mvmc {

namespace {

int level_from_delta(double delta) {
  if (!(delta > 0.0)) throw ConfigError("solver: delta must be positive");
  const int level = static_cast<int>(std::lround(-std::log2(delta)));
  if (std::ldexp(1.0, -level) != delta)
    throw ConfigError("solver: delta must be an exact dyadic step 2^-n");
  return level;
}

}  // namespace

double interpolate(const SimplexGrid& grid, const VectorXd& values, const VectorXd& weights) {
  const Eigen::Index n = grid.atoms().size();
  const int m = grid.resolution();
  if (values.size() != grid.node_count())
    throw std::invalid_argument("interpolate: value table does not match the grid");
  if (weights.size() != n) throw std::invalid_argument("interpolate: weight dimension mismatch");
  if (n == 1) return values[0];

  // Cumulative coordinates v_i = m * sum_{j >= i} theta_j; v_0 is pinned to m
  // and the rest clamped monotone to absorb floating fuzz.
  std::vector<double> v(n);
  double suffix = 0.0;
  for (Eigen::Index i = n - 1; i >= 1; --i) {
    suffix += weights[i];
    v[i] = std::clamp(suffix * m, 0.0, static_cast<double>(m));
  }
  v[0] = static_cast<double>(m);
  for (Eigen::Index i = 1; i < n; ++i) v[i] = std::min(v[i], v[i - 1]);

  std::vector<int> base(n);
  std::vector<double> frac(n);
  base[0] = m;
  frac[0] = 0.0;
  for (Eigen::Index i = 1; i < n; ++i) {
    base[i] = static_cast<int>(std::floor(v[i]));
    if (base[i] >= m) base[i] = m;
    frac[i] = v[i] - base[i];
  }

  // Sort the fractional coordinates descending; ties keep the lower index
  // first, which keeps every vertex of the walk inside the triangulation.
  std::vector<int> order(n - 1);
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(),
                   [&frac](int a, int b) { return frac[a] > frac[b]; });

  std::vector<int> z(base);
  const auto node_value = [&](const std::vector<int>& cum) {
    std::vector<int> comp(n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) comp[i] = cum[i] - cum[i + 1];
    comp[n - 1] = cum[n - 1];
    const Eigen::Index idx = grid.index_of(comp);
    if (idx < 0) throw NumericError("interpolate: point escaped the simplex grid");
    return values[idx];
  };

  double lambda0 = 1.0 - frac[order[0]];
  double acc = lambda0 > 0.0 ? lambda0 * node_value(z) : 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double lambda =
        (k + 1 < order.size()) ? frac[order[k]] - frac[order[k + 1]] : frac[order[k]];
    ++z[order[k]];
    if (lambda > 0.0) acc += lambda * node_value(z);
  }
  return acc;
}

double interpolate(const ValueFunction& V, const AtomicMeasure& mu) {
  return interpolate(*V.grid, V.values, mu.weights());
}

namespace {

// Shared per-solve state: the h table of the action grid on the atom set,
// actions grouped by identical h rows (those share every Bayes state), the
// quadrature rule and the exact per-substep discount weights.
struct BellmanContext {
  const SimplexGrid* grid = nullptr;
  const ActionGrid* actions = nullptr;
  const CostModel* cm = nullptr;
  double delta = 0.0;
  int substeps = 1;
  GaussHermite gh;
  MatrixXd h_table;
  std::vector<std::vector<int>> groups;
  VectorXd discount_w;   // (e^{-beta t_l} - e^{-beta t_{l+1}})/beta
  VectorXd times;        // substep left endpoints
  double terminal_discount = 1.0;

  BellmanContext(const SimplexGrid& g, const ActionGrid& a, const CostModel& c, double d, int quad,
                 int L)
      : grid(&g), actions(&a), cm(&c), delta(d), substeps(L), gh(quad) {
    if (L < 1) throw ConfigError("solver: substep count must be >= 1");
    h_table = action_h_table(a, g.atoms());
    std::map<std::vector<double>, int> seen;
    for (Eigen::Index r = 0; r < h_table.rows(); ++r) {
      std::vector<double> key(h_table.row(r).begin(), h_table.row(r).end());
      auto [it, fresh] = seen.emplace(std::move(key), static_cast<int>(groups.size()));
      if (fresh) groups.emplace_back();
      groups[it->second].push_back(static_cast<int>(r));
    }
    const double beta = c.beta;
    const double dt = d / L;
    discount_w.resize(L);
    times.resize(L);
    for (int l = 0; l < L; ++l) {
      times[l] = l * dt;
      discount_w[l] = (std::exp(-beta * times[l]) - std::exp(-beta * (times[l] + dt))) / beta;
    }
    terminal_discount = std::exp(-beta * d);
  }
};

std::pair<double, int> bellman_at(const BellmanContext& ctx, const VectorXd& theta,
                                  const VectorXd& table,
                                  const std::shared_ptr<const VectorXd>& atoms_ptr) {
  const Eigen::Index n_actions = static_cast<Eigen::Index>(ctx.actions->size());
  VectorXd action_values = VectorXd::Zero(n_actions);
  const int L = ctx.substeps;
  const double sqrt_delta = std::sqrt(ctx.delta);

  VectorXd state(theta.size());
  for (const auto& group : ctx.groups) {
    const VectorXd h = ctx.h_table.row(group.front()).transpose();
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      if (theta[j] <= 0.0) continue;
      for (int q = 0; q < ctx.gh.order(); ++q) {
        const double z = ctx.gh.points()[q];
        const double w = theta[j] * ctx.gh.weights()[q];
        state = theta;
        double y_prev = 0.0, t_prev = 0.0;
        for (int l = 0; l < L; ++l) {
          if (l > 0) {
            const double t = ctx.times[l];
            const double y = h[j] * t + std::sqrt(t) * z;
            bayes_reweight(state, h, y - y_prev, t - t_prev);
            y_prev = y;
            t_prev = t;
          }
          const AtomicMeasure xi = AtomicMeasure::unchecked(atoms_ptr, state);
          const double dw = w * ctx.discount_w[l];
          for (int a : group) action_values[a] += dw * (*ctx.cm)(xi, (*ctx.actions)[a]);
        }
        const double y_end = h[j] * ctx.delta + sqrt_delta * z;
        bayes_reweight(state, h, y_end - y_prev, ctx.delta - t_prev);
        const double tail = w * ctx.terminal_discount * interpolate(*ctx.grid, table, state);
        for (int a : group) action_values[a] += tail;
      }
    }
  }

  Eigen::Index best = 0;
  double best_value = action_values[0];
  for (Eigen::Index a = 1; a < n_actions; ++a) {
    if (action_values[a] < best_value) {
      best_value = action_values[a];
      best = a;
    }
  }
  return {best_value, static_cast<int>(best)};
}

}  // namespace

std::pair<double, int> bellman_apply(const ValueFunction& V, const AtomicMeasure& mu, double delta,
                                     const ActionGrid& actions, const CostModel& cm, int quad,
                                     int L) {
  if (mu.atoms_ptr() != V.grid->atoms_ptr() && mu.atoms() != V.grid->atoms())
    throw ArtifactMismatchError("bellman_apply: measure and grid atom sets differ");
  BellmanContext ctx(*V.grid, actions, cm, delta, quad, L);
  return bellman_at(ctx, mu.weights(), V.values, V.grid->atoms_ptr());
}

ValueFunction value_iteration(std::shared_ptr<const SimplexGrid> grid, double delta,
                              const ActionGrid& actions, const CostModel& cm, int quad, int L,
                              double tol, int max_sweeps, int workers) {
  if (!(tol > 0.0)) throw ConfigError("solver: tolerance must be positive");
  if (max_sweeps < 1) throw ConfigError("solver: sweep cap must be >= 1");
  const int level = level_from_delta(delta);
  BellmanContext ctx(*grid, actions, cm, delta, quad, L);

  const Eigen::Index nodes = grid->node_count();
  const double gamma = std::exp(-cm.beta * delta);
  const double stop = tol * (1.0 - gamma) / gamma;

  ValueFunction out;
  out.grid = grid;
  out.values = VectorXd::Zero(nodes);
  out.policy.assign(nodes, 0);
  out.level = level;
  out.quad = quad;
  out.substeps = L;
  out.tol = tol;
  out.action_grid_id = actions.id();

  VectorXd next(nodes);
  bool converged = false;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    parallel_for(nodes, workers, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t i = lo; i < hi; ++i) {
        const VectorXd theta = grid->node_weights(i);
        auto [value, argmin] = bellman_at(ctx, theta, out.values, grid->atoms_ptr());
        next[i] = value;
        out.policy[i] = argmin;
      }
    });
    const double residual = (next - out.values).cwiseAbs().maxCoeff();
    out.values.swap(next);
    out.residual_history.push_back(residual);
    out.sweeps = sweep;
    out.final_residual = residual;
    if (residual <= stop) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw ConvergenceError("value_iteration: sweep cap reached before the residual target",
                           out.final_residual);
  return out;
}

ControlSchedule extract_policy(const ValueFunction& V, double delta, const ActionGrid& actions,
                               const CostModel& cm, int quad, int L, int workers) {
  const int level = level_from_delta(delta);
  BellmanContext ctx(*V.grid, actions, cm, delta, quad, L);
  ControlSchedule schedule;
  schedule.level = level;
  schedule.mode = ControlSchedule::Mode::kFeedback;
  schedule.grid = V.grid;
  schedule.feedback.assign(V.grid->node_count(), 0);
  parallel_for(V.grid->node_count(), workers, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      const VectorXd theta = V.grid->node_weights(i);
      schedule.feedback[i] = bellman_at(ctx, theta, V.values, V.grid->atoms_ptr()).second;
    }
  });
  return schedule;
}

std::vector<RefineRow> refine_study(const AtomicMeasure& mu0, const CostModel& cm,
                                    const ActionGrid& actions, const std::vector<int>& levels,
                                    std::shared_ptr<const SimplexGrid> grid, int quad, int L,
                                    double tol, int max_sweeps, int workers) {
  if (levels.empty()) throw ConfigError("refine_study: empty level list");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (levels[i] <= levels[i - 1]) throw ConfigError("refine_study: levels must increase");
  std::vector<RefineRow> rows;
  rows.reserve(levels.size());
  for (int n : levels) {
    const double delta = std::ldexp(1.0, -n);
    ValueFunction V = value_iteration(grid, delta, actions, cm, quad, L, tol, max_sweeps, workers);
    RefineRow row;
    row.level = n;
    row.delta = delta;
    row.value_at_mu0 = interpolate(V, mu0);
    row.sweeps = V.sweeps;
    row.residual = V.final_residual;
    rows.push_back(row);
  }
  return rows;
}

double empirical_lipschitz(const ValueFunction& V) {
  const SimplexGrid& grid = *V.grid;
  const Eigen::Index n = grid.atoms().size();
  const int m = grid.resolution();
  double lip = 0.0;
  for (Eigen::Index node = 0; node < grid.node_count(); ++node) {
    const auto& comp = grid.composition(node);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (comp[i] == 0) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        std::vector<int> other(comp);
        --other[i];
        ++other[j];
        const Eigen::Index idx = grid.index_of(other);
        if (idx < 0) continue;
        const double dist = std::abs(grid.atoms()[j] - grid.atoms()[i]) / m;
        lip = std::max(lip, std::abs(V.values[node] - V.values[idx]) / dist);
      }
    }
  }
  return lip;
}

EpsilonBudget make_epsilon_budget(const ValueFunction& V, double mc_stderr, double truncation) {
  EpsilonBudget budget;
  budget.iteration_tol = V.tol;
  budget.interpolation = V.grid->cell_diameter_w1() * empirical_lipschitz(V);
  budget.mc = 4.0 * mc_stderr;
  budget.truncation = truncation;
  return budget;
}

}  // namespace mvmc
