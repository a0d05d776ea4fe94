#include "divdiv/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace divdiv {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnsupportedDimension: return "unsupported-dimension";
    case ErrorKind::DegenerateCell: return "degenerate-cell";
    case ErrorKind::OutOfRange: return "out-of-range";
    case ErrorKind::UnsupportedDegree: return "unsupported-degree";
    case ErrorKind::UnsupportedSpace: return "unsupported-space";
    case ErrorKind::ShapeMismatch: return "shape-mismatch";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::MissingDerivative: return "missing-derivative";
    case ErrorKind::Incompatibility: return "incompatibility";
    case ErrorKind::SolverFailure: return "solver-failure";
    case ErrorKind::QuadratureShortfall: return "quadrature-shortfall";
    case ErrorKind::TooLarge: return "use-smaller-mesh";
    case ErrorKind::ConfigError: return "config-error";
    case ErrorKind::ParseError: return "parse-error";
  }
  return "error";
}

int thread_count() {
  static const int count = [] {
    const char* env = std::getenv("DIVDIV_THREADS");
    if (!env) return 1;
    int v = std::atoi(env);
    return v >= 1 ? v : 1;
  }();
  return count;
}

void parallel_for(int n, const std::function<void(int)>& body) {
  const int workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

long long binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace divdiv
