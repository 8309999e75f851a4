#include "nscope/kernels.hpp"

#include <cmath>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nscope::kernels {

// The i/k/j loop keeps b row-contiguous in the inner loop so the compiler can
// vectorize over j, while each c[i][j] still accumulates in ascending-k order.
// The OpenMP versions split work over output rows only, which cannot change
// any per-element summation order.

namespace serial {

void matmul(const float* a, const float* b, float* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        float* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = 0.0f;
        const float* ai = a + static_cast<size_t>(i) * k;
        for (int t = 0; t < k; ++t) {
            const float av = ai[t];
            const float* bt = b + static_cast<size_t>(t) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
}

// Materializes b^T so the inner loop stays contiguous and vectorizable; the
// per-element summation order (ascending t) is unchanged.
void matmul_nt(const float* a, const float* b, float* c, int m, int k, int n) {
    thread_local std::vector<float> bt;
    bt.resize(static_cast<size_t>(k) * n);
    for (int j = 0; j < n; ++j)
        for (int t = 0; t < k; ++t) bt[static_cast<size_t>(t) * n + j] = b[static_cast<size_t>(j) * k + t];
    matmul(a, bt.data(), c, m, k, n);
}

void matmul_tn(const float* a, const float* b, float* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        float* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = 0.0f;
        for (int t = 0; t < k; ++t) {
            const float av = a[static_cast<size_t>(t) * m + i];
            const float* bt = b + static_cast<size_t>(t) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
}

void softmax_rows(const float* x, float* y, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        const float* xi = x + static_cast<size_t>(i) * cols;
        float* yi = y + static_cast<size_t>(i) * cols;
        float mx = xi[0];
        for (int j = 1; j < cols; ++j) mx = xi[j] > mx ? xi[j] : mx;
        float sum = 0.0f;
        for (int j = 0; j < cols; ++j) {
            yi[j] = std::exp(xi[j] - mx);
            sum += yi[j];
        }
        const float inv = 1.0f / sum;
        for (int j = 0; j < cols; ++j) yi[j] *= inv;
    }
}

void layer_norm_rows(const float* x, const float* gain, const float* bias,
                     float* y, int rows, int cols, float eps) {
    for (int i = 0; i < rows; ++i) {
        const float* xi = x + static_cast<size_t>(i) * cols;
        float* yi = y + static_cast<size_t>(i) * cols;
        float mean = 0.0f;
        for (int j = 0; j < cols; ++j) mean += xi[j];
        mean /= static_cast<float>(cols);
        float var = 0.0f;
        for (int j = 0; j < cols; ++j) {
            const float d = xi[j] - mean;
            var += d * d;
        }
        var /= static_cast<float>(cols);
        const float inv = 1.0f / std::sqrt(var + eps);
        for (int j = 0; j < cols; ++j) yi[j] = (xi[j] - mean) * inv * gain[j] + bias[j];
    }
}

}  // namespace serial

void matmul(const float* a, const float* b, float* c, int m, int k, int n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        float* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = 0.0f;
        const float* ai = a + static_cast<size_t>(i) * k;
        for (int t = 0; t < k; ++t) {
            const float av = ai[t];
            const float* bt = b + static_cast<size_t>(t) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
#else
    serial::matmul(a, b, c, m, k, n);
#endif
}

void matmul_nt(const float* a, const float* b, float* c, int m, int k, int n) {
    thread_local std::vector<float> bt;
    bt.resize(static_cast<size_t>(k) * n);
    for (int j = 0; j < n; ++j)
        for (int t = 0; t < k; ++t) bt[static_cast<size_t>(t) * n + j] = b[static_cast<size_t>(j) * k + t];
    matmul(a, bt.data(), c, m, k, n);
}

void matmul_tn(const float* a, const float* b, float* c, int m, int k, int n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        float* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = 0.0f;
        for (int t = 0; t < k; ++t) {
            const float av = a[static_cast<size_t>(t) * m + i];
            const float* bt = b + static_cast<size_t>(t) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
#else
    serial::matmul_tn(a, b, c, m, k, n);
#endif
}

void softmax_rows(const float* x, float* y, int rows, int cols) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (int i = 0; i < rows; ++i)
        serial::softmax_rows(x + static_cast<size_t>(i) * cols, y + static_cast<size_t>(i) * cols, 1, cols);
#else
    serial::softmax_rows(x, y, rows, cols);
#endif
}

void layer_norm_rows(const float* x, const float* gain, const float* bias,
                     float* y, int rows, int cols, float eps) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (int i = 0; i < rows; ++i)
        serial::layer_norm_rows(x + static_cast<size_t>(i) * cols, gain, bias,
                                y + static_cast<size_t>(i) * cols, 1, cols, eps);
#else
    serial::layer_norm_rows(x, gain, bias, y, rows, cols, eps);
#endif
}

}  // namespace nscope::kernels
