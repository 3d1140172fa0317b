#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace mvmc {

// Splits [0, n) into one contiguous chunk per worker. Bodies must write to
// disjoint slots; the result is then independent of the worker count.
inline void parallel_for(std::int64_t n, int workers,
                         const std::function<void(std::int64_t, std::int64_t)>& body) {
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    body(0, n);
    return;
  }
  const int used = static_cast<int>(std::min<std::int64_t>(workers, n));
  std::vector<std::thread> pool;
  pool.reserve(used);
  const std::int64_t chunk = (n + used - 1) / used;
  for (int w = 0; w < used; ++w) {
    const std::int64_t lo = w * chunk;
    const std::int64_t hi = std::min<std::int64_t>(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

// Pairwise (binary tree) summation. The reduction order is fixed by the
// element order, so parallel producers feeding a preallocated buffer still
// yield bit-identical totals.
inline double pairwise_sum(const double* data, std::int64_t n) {
  if (n <= 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  const std::int64_t half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

inline double pairwise_sum(const Eigen::VectorXd& v) { return pairwise_sum(v.data(), v.size()); }

}  // namespace mvmc
