#pragma once

#include <cstdint>

namespace dgadet::nn {

// All kernels are row-major and deterministic: every output element is a
// serial reduction owned by exactly one thread, so results do not depend on
// scheduling (the accumulation order is fixed by the loop structure).

// C[M,N] (+)= A[M,K] * B[K,N]
void gemm(float* C, const float* A, const float* B, int64_t M, int64_t K, int64_t N,
          bool accumulate);

// C[M,K] (+)= A[M,N] * B[K,N]^T   (dot products of contiguous rows)
void gemm_abt(float* C, const float* A, const float* B, int64_t M, int64_t N, int64_t K,
              bool accumulate);

// C[K,N] (+)= A[M,K]^T * B[M,N]
void gemm_atb(float* C, const float* A, const float* B, int64_t M, int64_t K, int64_t N,
              bool accumulate);

// In-place row-wise softmax with max subtraction.
void softmax_rows(float* x, int64_t rows, int64_t cols);

}  // namespace dgadet::nn
