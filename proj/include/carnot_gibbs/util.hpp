#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace carnot_gibbs {

inline constexpr const char* kVersion = "0.1.0";

/// Thrown when an operand leaves the domain an operation is defined on
/// (non-finite field values, bad dilation factor, missing boundary site, ...).
class EvaluationError : public std::runtime_error {
 public:
  explicit EvaluationError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when a numerical routine cannot meet its accuracy contract
/// (truncation mass too large, solver residual too big, tensor too large).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// splitmix64: seed derivation for per-chain / per-task generators.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

inline int worker_pool_size() {
  if (const char* env = std::getenv("CARNOT_GIBBS_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

/// Parallel map over [0, n). Each item's result lands in a preallocated slot,
/// so downstream reductions run in index order and results do not depend on
/// the pool size.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, int pool = 0) {
  if (pool <= 0) pool = worker_pool_size();
  if (pool == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t nthreads = std::min<std::size_t>(pool, n);
  std::vector<std::thread> threads;
  threads.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += nthreads) fn(i);
    });
  }
  for (auto& th : threads) th.join();
}

/// Map i -> f(i) into a vector, in parallel, then let the caller reduce
/// serially in index order (deterministic independent of thread count).
template <typename Fn>
std::vector<double> parallel_map(std::size_t n, Fn&& fn, int pool = 0) {
  std::vector<double> out(n);
  parallel_for(
      n, [&](std::size_t i) { out[i] = fn(i); }, pool);
  return out;
}

inline double sum_ordered(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace carnot_gibbs
