#include <doctest.h>

#include <cstring>
#include <vector>

#include "nscope/kernels.hpp"
#include "nscope/rng.hpp"

using namespace nscope;

namespace {

std::vector<float> random_vec(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.next_gauss());
    return v;
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("omp kernels match serial reference bit for bit") {
    // Odd sizes on purpose so row splits never line up with vector widths.
    const int m = 37, k = 53, n = 29;
    auto a = random_vec(static_cast<size_t>(m) * k, 1);
    auto b = random_vec(static_cast<size_t>(k) * n, 2);
    std::vector<float> cs(static_cast<size_t>(m) * n), cp(cs.size());

    kernels::serial::matmul(a.data(), b.data(), cs.data(), m, k, n);
    kernels::matmul(a.data(), b.data(), cp.data(), m, k, n);
    CHECK(bit_equal(cs, cp));

    auto bt = random_vec(static_cast<size_t>(n) * k, 3);
    kernels::serial::matmul_nt(a.data(), bt.data(), cs.data(), m, k, n);
    kernels::matmul_nt(a.data(), bt.data(), cp.data(), m, k, n);
    CHECK(bit_equal(cs, cp));

    auto at = random_vec(static_cast<size_t>(k) * m, 4);
    std::vector<float> ds(static_cast<size_t>(m) * n), dp(ds.size());
    kernels::serial::matmul_tn(at.data(), b.data(), ds.data(), m, k, n);
    kernels::matmul_tn(at.data(), b.data(), dp.data(), m, k, n);
    CHECK(bit_equal(ds, dp));

    auto x = random_vec(static_cast<size_t>(m) * k, 5);
    std::vector<float> ys(x.size()), yp(x.size());
    kernels::serial::softmax_rows(x.data(), ys.data(), m, k);
    kernels::softmax_rows(x.data(), yp.data(), m, k);
    CHECK(bit_equal(ys, yp));

    auto gain = random_vec(k, 6);
    auto bias = random_vec(k, 7);
    kernels::serial::layer_norm_rows(x.data(), gain.data(), bias.data(), ys.data(), m, k, 1e-5f);
    kernels::layer_norm_rows(x.data(), gain.data(), bias.data(), yp.data(), m, k, 1e-5f);
    CHECK(bit_equal(ys, yp));
}

TEST_CASE("matmul fixed summation order is reproducible across repeats") {
    const int m = 11, k = 64, n = 13;
    auto a = random_vec(static_cast<size_t>(m) * k, 8);
    auto b = random_vec(static_cast<size_t>(k) * n, 9);
    std::vector<float> c1(static_cast<size_t>(m) * n), c2(c1.size());
    kernels::matmul(a.data(), b.data(), c1.data(), m, k, n);
    kernels::matmul(a.data(), b.data(), c2.data(), m, k, n);
    CHECK(bit_equal(c1, c2));
}

TEST_CASE("matmul against a plain double-accumulator loop") {
    const int m = 7, k = 19, n = 5;
    auto a = random_vec(static_cast<size_t>(m) * k, 10);
    auto b = random_vec(static_cast<size_t>(k) * n, 11);
    std::vector<float> c(static_cast<size_t>(m) * n);
    kernels::matmul(a.data(), b.data(), c.data(), m, k, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t) acc += static_cast<double>(a[i * k + t]) * b[t * n + j];
            CHECK(c[i * n + j] == doctest::Approx(acc).epsilon(1e-5));
        }
}
