#pragma once

#include <vector>

// Data-parallel float kernels behind the autodiff tape. Each kernel has a
// serial twin in nscope::kernels::serial with the same per-element summation
// order (always ascending k / ascending column), so the OpenMP versions must
// match the serial ones bit for bit. tests/test_kernels.cpp asserts this and
// tools/bench_kernels.cpp compares their throughput.

namespace nscope::kernels {

// c[m x n] = a[m x k] * b[k x n]
void matmul(const float* a, const float* b, float* c, int m, int k, int n);
// c[m x n] = a[m x k] * b[n x k]^T  (dC * B^T in backward passes)
void matmul_nt(const float* a, const float* b, float* c, int m, int k, int n);
// c[m x n] = a[k x m]^T * b[k x n]  (A^T * dC in backward passes)
void matmul_tn(const float* a, const float* b, float* c, int m, int k, int n);

void softmax_rows(const float* x, float* y, int rows, int cols);
// y = (x - mean) / sqrt(var + eps) * gain + bias, per row of length cols.
void layer_norm_rows(const float* x, const float* gain, const float* bias,
                     float* y, int rows, int cols, float eps);

namespace serial {
void matmul(const float* a, const float* b, float* c, int m, int k, int n);
void matmul_nt(const float* a, const float* b, float* c, int m, int k, int n);
void matmul_tn(const float* a, const float* b, float* c, int m, int k, int n);
void softmax_rows(const float* x, float* y, int rows, int cols);
void layer_norm_rows(const float* x, const float* gain, const float* bias,
                     float* y, int rows, int cols, float eps);
}  // namespace serial

}  // namespace nscope::kernels
