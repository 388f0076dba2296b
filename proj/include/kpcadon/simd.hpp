#pragma once

// Vectorization helpers for the training hot loops. Everything here is
// optional: without KPCADON_OPENMP_SIMD (set by the build when the compiler
// accepts -fopenmp-simd) the macros expand to nothing and the element-wise
// tanh falls back to a plain scalar loop, with identical semantics.

#include <cmath>
#include <cstddef>

#if !defined(KPCADON_OPENMP_SIMD) && defined(_OPENMP)
#define KPCADON_OPENMP_SIMD 1
#endif

#ifdef KPCADON_OPENMP_SIMD
#define KPCADON_PRAGMA(text) _Pragma(#text)
/// Permits vector execution of the following loop (no semantic change for
/// independent iterations).
#define KPCADON_SIMD KPCADON_PRAGMA(omp simd)
/// Permits a reordered (vectorized) sum reduction into `var`. The summation
/// order changes, so results may differ from the scalar loop in the last few
/// ulps, but stay deterministic for a given build.
#define KPCADON_SIMD_REDUCTION(var) KPCADON_PRAGMA(omp simd reduction(+ : var))
#else
#define KPCADON_SIMD
#define KPCADON_SIMD_REDUCTION(var)
#endif

// glibc 2.35+ ships vector implementations of tanh in libmvec. Declaring the
// scalar function with the GCC "simd" attribute lets the vectorizer call them
// from the loop below; they are within a few ulps of the scalar results.
#if defined(KPCADON_OPENMP_SIMD) && defined(__x86_64__) &&     \
    defined(__GNUC__) && !defined(__clang__) &&                \
    defined(__GLIBC_PREREQ)
#if __GLIBC_PREREQ(2, 35)
#define KPCADON_VECTOR_TANH 1
extern "C" double tanh(double) __attribute__((simd("notinbranch")));
#endif
#endif

namespace kpcadon {
namespace detail {

/// Applies tanh to every element of the buffer in place.
inline void tanh_inplace(double* data, std::size_t count) {
#ifdef KPCADON_VECTOR_TANH
  KPCADON_SIMD
  for (std::size_t i = 0; i < count; ++i) data[i] = tanh(data[i]);
#else
  for (std::size_t i = 0; i < count; ++i) data[i] = std::tanh(data[i]);
#endif
}

}  // namespace detail
}  // namespace kpcadon
