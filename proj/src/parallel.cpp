#include "vism/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#ifdef VISM_HAVE_OPENMP
#include <omp.h>
#endif

namespace vism::parallel {

namespace {
constexpr std::size_t kBlock = 4096;

template <class Term>
double blocked_sum(std::size_t n, Term term) {
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks, 0.0);
  const auto nb = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += term(i);
    partial[static_cast<std::size_t>(b)] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}
}  // namespace

void set_threads(int n) {
#ifdef VISM_HAVE_OPENMP
  if (n < 1) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int threads() {
#ifdef VISM_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int threads_from_env() {
  const char* env = std::getenv("VISM_THREADS");
  if (!env) return 0;
  try {
    const int n = std::stoi(env);
    return n > 0 ? n : 0;
  } catch (...) {
    return 0;
  }
}

double sum(std::span<const double> v) {
  return blocked_sum(v.size(), [&](std::size_t i) { return v[i]; });
}

double dot(std::span<const double> a, std::span<const double> b) {
  return blocked_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

}  // namespace vism::parallel
