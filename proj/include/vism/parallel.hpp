#pragma once

#include <cstddef>
#include <span>

namespace vism::parallel {

/// Sets the worker count for node-parallel loops; values < 1 select the
/// number of available cores.
void set_threads(int n);
int threads();

/// Thread count from the VISM_THREADS environment variable, or 0 if unset
/// or malformed.
int threads_from_env();

/// Sum with a fixed, thread-count independent association order (fixed-size
/// blocks summed left to right). Results are bit-reproducible.
double sum(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace vism::parallel
