#include "dgadet/nn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace dgadet::nn {

void gemm(float* C, const float* A, const float* B, int64_t M, int64_t K, int64_t N,
          bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < M; ++i) {
        float* c = C + i * N;
        if (!accumulate) std::memset(c, 0, static_cast<size_t>(N) * sizeof(float));
        const float* a = A + i * K;
        for (int64_t k = 0; k < K; ++k) {
            const float ak = a[k];
            const float* b = B + k * N;
#pragma omp simd
            for (int64_t j = 0; j < N; ++j) c[j] += ak * b[j];
        }
    }
}

void gemm_abt(float* C, const float* A, const float* B, int64_t M, int64_t N, int64_t K,
              bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < M; ++i) {
        const float* a = A + i * N;
        float* c = C + i * K;
        int64_t k = 0;
        for (; k + 4 <= K; k += 4) {
            const float* b0 = B + k * N;
            const float* b1 = b0 + N;
            const float* b2 = b1 + N;
            const float* b3 = b2 + N;
            float s0 = 0.0f, s1 = 0.0f, s2 = 0.0f, s3 = 0.0f;
#pragma omp simd reduction(+ : s0, s1, s2, s3)
            for (int64_t j = 0; j < N; ++j) {
                const float aj = a[j];
                s0 += aj * b0[j];
                s1 += aj * b1[j];
                s2 += aj * b2[j];
                s3 += aj * b3[j];
            }
            if (accumulate) {
                c[k] += s0;
                c[k + 1] += s1;
                c[k + 2] += s2;
                c[k + 3] += s3;
            } else {
                c[k] = s0;
                c[k + 1] = s1;
                c[k + 2] = s2;
                c[k + 3] = s3;
            }
        }
        for (; k < K; ++k) {
            const float* b = B + k * N;
            float s = 0.0f;
#pragma omp simd reduction(+ : s)
            for (int64_t j = 0; j < N; ++j) s += a[j] * b[j];
            if (accumulate) {
                c[k] += s;
            } else {
                c[k] = s;
            }
        }
    }
}

void gemm_atb(float* C, const float* A, const float* B, int64_t M, int64_t K, int64_t N,
              bool accumulate) {
    if (!accumulate) std::memset(C, 0, static_cast<size_t>(K * N) * sizeof(float));
    // Block over input rows so the B block stays cache-resident across the
    // k sweep; each k row of C is owned by one thread, ascending i order.
    constexpr int64_t kRowBlock = 256;
#pragma omp parallel
    {
        for (int64_t i0 = 0; i0 < M; i0 += kRowBlock) {
            const int64_t i1 = std::min(M, i0 + kRowBlock);
#pragma omp for schedule(static)
            for (int64_t k = 0; k < K; ++k) {
                float* c = C + k * N;
                for (int64_t i = i0; i < i1; ++i) {
                    const float aik = A[i * K + k];
                    if (aik == 0.0f) continue;
                    const float* b = B + i * N;
#pragma omp simd
                    for (int64_t j = 0; j < N; ++j) c[j] += aik * b[j];
                }
            }
        }
    }
}

void softmax_rows(float* x, int64_t rows, int64_t cols) {
    for (int64_t r = 0; r < rows; ++r) {
        float* p = x + r * cols;
        float mx = p[0];
        for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, p[j]);
        float sum = 0.0f;
        for (int64_t j = 0; j < cols; ++j) {
            p[j] = std::exp(p[j] - mx);
            sum += p[j];
        }
        const float inv = 1.0f / sum;
        for (int64_t j = 0; j < cols; ++j) p[j] *= inv;
    }
}

}  // namespace dgadet::nn
