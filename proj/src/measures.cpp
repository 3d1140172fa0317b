#include "mvmc/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mvmc/errors.hpp"

namespace mvmc {

AtomicMeasure::AtomicMeasure(std::shared_ptr<const VectorXd> atoms, VectorXd weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
  if (!atoms_ || atoms_->size() == 0) throw std::invalid_argument("AtomicMeasure: empty atom set");
  if (weights_.size() != atoms_->size())
    throw std::invalid_argument("AtomicMeasure: atom/weight length mismatch");
  for (Eigen::Index i = 1; i < atoms_->size(); ++i)
    if (!((*atoms_)[i] > (*atoms_)[i - 1]))
      throw std::invalid_argument("AtomicMeasure: atoms must be strictly increasing");
  if ((weights_.array() < 0.0).any())
    throw std::invalid_argument("AtomicMeasure: negative weight");
  if (std::abs(weights_.sum() - 1.0) > kMassTol)
    throw std::invalid_argument("AtomicMeasure: weights do not sum to one");
}

AtomicMeasure::AtomicMeasure(unchecked_t, std::shared_ptr<const VectorXd> atoms, VectorXd weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {}

AtomicMeasure AtomicMeasure::unchecked(std::shared_ptr<const VectorXd> atoms, VectorXd weights) {
  return AtomicMeasure(unchecked_t{}, std::move(atoms), std::move(weights));
}

AtomicMeasure AtomicMeasure::dirac(std::shared_ptr<const VectorXd> atoms, Eigen::Index which) {
  if (!atoms || which < 0 || which >= atoms->size())
    throw std::invalid_argument("AtomicMeasure::dirac: atom index out of range");
  VectorXd w = VectorXd::Zero(atoms->size());
  w[which] = 1.0;
  return AtomicMeasure(unchecked_t{}, std::move(atoms), std::move(w));
}

double AtomicMeasure::variance() const {
  const double m = mean();
  return weights_.dot((atoms_->array() - m).square().matrix());
}

bool AtomicMeasure::is_dirac(Eigen::Index* which) const {
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    if (weights_[i] == 1.0) {
      if (which) *which = i;
      return true;
    }
  }
  return false;
}

double integrate(const AtomicMeasure& mu, const std::function<double(double)>& f) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) acc += mu.weights()[i] * f(mu.atoms()[i]);
  return acc;
}

double wasserstein1(const AtomicMeasure& mu, const AtomicMeasure& nu) {
  const VectorXd& xa = mu.atoms();
  const VectorXd& xb = nu.atoms();
  // Walk the sorted union; between consecutive union atoms the CDFs are flat.
  double dist = 0.0;
  double cdf_a = 0.0, cdf_b = 0.0;
  Eigen::Index ia = 0, ib = 0;
  double prev = std::numeric_limits<double>::quiet_NaN();
  while (ia < xa.size() || ib < xb.size()) {
    double x;
    if (ib >= xb.size() || (ia < xa.size() && xa[ia] <= xb[ib]))
      x = xa[ia];
    else
      x = xb[ib];
    if (!std::isnan(prev)) dist += std::abs(cdf_a - cdf_b) * (x - prev);
    while (ia < xa.size() && xa[ia] == x) cdf_a += mu.weights()[ia++];
    while (ib < xb.size() && xb[ib] == x) cdf_b += nu.weights()[ib++];
    prev = x;
  }
  return dist;
}

bool support_leq(const AtomicMeasure& mu, const AtomicMeasure& nu) {
  if (mu.atoms_ptr() != nu.atoms_ptr())
    throw std::invalid_argument("support_leq: measures must share the atom universe");
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    if (mu.weights()[i] > 0.0 && !(nu.weights()[i] > 0.0)) return false;
  return true;
}

void normalize_weights(VectorXd& theta) {
  double s = theta.sum();
  if (!(s > 0.0) || !std::isfinite(s))
    throw NumericError("normalize_weights: total mass vanished");
  theta /= s;
  bool snapped = false;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (theta[i] != 0.0 && theta[i] < kWeightFloor) {
      theta[i] = 0.0;
      snapped = true;
    }
  }
  if (snapped) {
    s = theta.sum();
    if (!(s > 0.0)) throw NumericError("normalize_weights: total mass vanished");
    theta /= s;
  }
}

void bayes_reweight(VectorXd& theta, const VectorXd& h, double y, double t) {
  if (t < 0.0) throw std::invalid_argument("bayes_reweight: negative elapsed time");
  double max_ll = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (theta[i] > 0.0) max_ll = std::max(max_ll, h[i] * y - 0.5 * h[i] * h[i] * t);
  }
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (theta[i] > 0.0)
      theta[i] *= std::exp(h[i] * y - 0.5 * h[i] * h[i] * t - max_ll);
  }
  normalize_weights(theta);
}

AtomicMeasure bayes_update(const AtomicMeasure& mu, const VectorXd& h_values, double y, double t) {
  VectorXd theta = mu.weights();
  bayes_reweight(theta, h_values, y, t);
  return AtomicMeasure::unchecked(mu.atoms_ptr(), std::move(theta));
}

AtomicMeasure bayes_update(const AtomicMeasure& mu, const ActionVec& v, double y, double t) {
  return bayes_update(mu, eval_h(v, mu.atoms()), y, t);
}

AtomicMeasure SimplexGrid::node_measure(Eigen::Index i) const {
  return AtomicMeasure::unchecked(atoms_, node_weights(i));
}

bool SimplexGrid::is_vertex(Eigen::Index i, Eigen::Index* atom) const {
  const auto& comp = compositions_[i];
  for (std::size_t a = 0; a < comp.size(); ++a) {
    if (comp[a] == m_) {
      if (atom) *atom = static_cast<Eigen::Index>(a);
      return true;
    }
  }
  return false;
}

std::uint64_t SimplexGrid::encode(const std::vector<int>& comp) const {
  std::uint64_t key = 0;
  for (int k : comp) key = key * static_cast<std::uint64_t>(m_ + 1) + static_cast<std::uint64_t>(k);
  return key;
}

Eigen::Index SimplexGrid::index_of(const std::vector<int>& comp) const {
  if (static_cast<Eigen::Index>(comp.size()) != atoms_->size()) return -1;
  int sum = 0;
  for (int k : comp) {
    if (k < 0 || k > m_) return -1;
    sum += k;
  }
  if (sum != m_) return -1;
  auto it = index_.find(encode(comp));
  return it == index_.end() ? -1 : it->second;
}

Eigen::Index SimplexGrid::nearest_node_w1(const VectorXd& weights) const {
  const Eigen::Index gaps = atoms_->size() - 1;
  if (gaps == 0) return 0;
  Eigen::RowVectorXd q(gaps);
  double cum = 0.0;
  for (Eigen::Index i = 0; i < gaps; ++i) {
    cum += weights[i];
    q[i] = cum * ((*atoms_)[i + 1] - (*atoms_)[i]);
  }
  Eigen::Index best = 0;
  (node_cdf_gaps_.rowwise() - q).cwiseAbs().rowwise().sum().minCoeff(&best);
  return best;
}

double SimplexGrid::cell_diameter_w1() const {
  // Adjacent nodes differ by one unit of mass moved across one CDF segment;
  // the longest move spans the whole atom range.
  return ((*atoms_)[atoms_->size() - 1] - (*atoms_)[0]) / m_;
}

SimplexGrid make_simplex_grid(std::shared_ptr<const VectorXd> atoms, int m, std::int64_t node_cap) {
  if (!atoms || atoms->size() == 0) throw ConfigError("simplex grid: empty atom set");
  if (m < 1) throw ConfigError("simplex grid: resolution must be >= 1");
  const Eigen::Index n = atoms->size();
  for (Eigen::Index i = 1; i < n; ++i)
    if (!((*atoms)[i] > (*atoms)[i - 1]))
      throw ConfigError("simplex grid: atoms must be strictly increasing");

  // count C(m+N-1, N-1) with overflow care
  long double count = 1.0L;
  for (Eigen::Index i = 1; i < n; ++i) count = count * (m + i) / i;
  if (count > static_cast<long double>(node_cap))
    throw ConfigError("simplex grid: node count exceeds the configured cap");
  if (n * std::log2(m + 1.0) > 63.0)
    throw ConfigError("simplex grid: composition key overflows; reduce atoms or resolution");
  const Eigen::Index total = static_cast<Eigen::Index>(std::llround(count));

  SimplexGrid grid;
  grid.atoms_ = atoms;
  grid.m_ = m;
  grid.nodes_.resize(total, n);
  grid.compositions_.reserve(total);

  std::vector<int> comp(n, 0);
  comp[n - 1] = m;
  Eigen::Index row = 0;
  for (;;) {
    grid.compositions_.push_back(comp);
    for (Eigen::Index i = 0; i < n; ++i) grid.nodes_(row, i) = static_cast<double>(comp[i]) / m;
    grid.index_.emplace(grid.encode(comp), row);
    ++row;
    // next composition in lexicographic order
    Eigen::Index i = n - 2;
    while (i >= 0) {
      int tail = 0;
      for (Eigen::Index j = i + 1; j < n; ++j) tail += comp[j];
      if (tail > 0) break;
      --i;
    }
    if (i < 0) break;
    ++comp[i];
    int remaining = 0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      remaining += comp[j];
      comp[j] = 0;
    }
    comp[n - 1] = remaining - 1;
  }
  if (row != total) throw NumericError("simplex grid: enumeration mismatch");

  const Eigen::Index gaps = n - 1;
  grid.node_cdf_gaps_.resize(total, std::max<Eigen::Index>(gaps, 1));
  if (gaps == 0) {
    grid.node_cdf_gaps_.setZero();
  } else {
    for (Eigen::Index r = 0; r < total; ++r) {
      double cum = 0.0;
      for (Eigen::Index i = 0; i < gaps; ++i) {
        cum += grid.nodes_(r, i);
        grid.node_cdf_gaps_(r, i) = cum * ((*atoms)[i + 1] - (*atoms)[i]);
      }
    }
  }
  return grid;
}

AtomicMeasure discretize_prior(const std::function<double(double)>& cdf, double lo, double hi,
                               int n_atoms, PriorPlacement placement) {
  if (!(hi > lo)) throw std::invalid_argument("discretize_prior: empty interval");
  if (n_atoms < 1) throw std::invalid_argument("discretize_prior: need at least one atom");
  auto atoms = std::make_shared<VectorXd>(n_atoms);
  VectorXd weights(n_atoms);
  if (placement == PriorPlacement::kQuantile) {
    const double f_lo = cdf(lo), f_hi = cdf(hi);
    for (int i = 0; i < n_atoms; ++i) {
      const double target = f_lo + (f_hi - f_lo) * (i + 0.5) / n_atoms;
      double a = lo, b = hi;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        (cdf(mid) < target ? a : b) = mid;
      }
      (*atoms)[i] = 0.5 * (a + b);
      weights[i] = 1.0 / n_atoms;
    }
  } else {
    const double bin = (hi - lo) / n_atoms;
    for (int i = 0; i < n_atoms; ++i) {
      (*atoms)[i] = lo + (i + 0.5) * bin;
      weights[i] = cdf(lo + (i + 1) * bin) - cdf(lo + i * bin);
    }
    normalize_weights(weights);
  }
  for (int i = 1; i < n_atoms; ++i)
    if (!((*atoms)[i] > (*atoms)[i - 1]))
      throw NumericError("discretize_prior: quantiles collapsed; use fewer atoms");
  return AtomicMeasure(std::move(atoms), std::move(weights));
}

}  // namespace mvmc
