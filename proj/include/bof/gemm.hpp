#pragma once

#include <cstddef>
#include <vector>

namespace bof {

// Row-major matrix kernels. The i-k-j ordering keeps the inner loop over
// contiguous rows of B and C so the compiler vectorizes it.

// C(m,n) = A(m,k) * B(k,n), or += when accumulate is set.
template <class S>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c,
             bool accumulate = false) {
  for (std::size_t i = 0; i < m; ++i) {
    S* ci = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) ci[j] = S(0);
    const S* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const S av = ai[p];
      const S* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C(m,n) = A(m,k) * B(n,k)^T. Short reductions run as direct dot products;
// long ones go through a transposed copy of B so the inner loop streams
// contiguous rows instead of thrashing the cache.
template <class S>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c,
             bool accumulate = false) {
  if (k >= 128 && m * n >= 256) {
    std::vector<S> bt(k * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    gemm_nn(m, n, k, a, bt.data(), c, accumulate);
    return;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const S* ai = a + i * k;
    S* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const S* bj = b + j * k;
      S acc = S(0);
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = accumulate ? ci[j] + acc : acc;
    }
  }
}

// C(m,n) = A(k,m)^T * B(k,n).
template <class S>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c,
             bool accumulate = false) {
  if (!accumulate)
    for (std::size_t i = 0; i < m * n; ++i) c[i] = S(0);
  for (std::size_t p = 0; p < k; ++p) {
    const S* ap = a + p * m;
    const S* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const S av = ap[i];
      S* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

}  // namespace bof
