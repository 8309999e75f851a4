// Times the OpenMP kernels against their serial reference twins and checks
// that both produce bit-identical results while at it.
//
//   bench_kernels [size] [reps]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "nscope/kernels.hpp"
#include "nscope/rng.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<float> random_vec(size_t n, nscope::Rng& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.next_gauss());
    return v;
}

struct Row {
    const char* name;
    double gflop;
    double serial_s;
    double omp_s;
    bool identical;
};

void print_row(const Row& r) {
    std::printf("%-16s %8.2f GF  serial %7.1f ms (%6.2f GF/s)  omp %7.1f ms (%6.2f GF/s)  x%.2f  %s\n",
                r.name, r.gflop, r.serial_s * 1e3, r.gflop / r.serial_s, r.omp_s * 1e3,
                r.gflop / r.omp_s, r.serial_s / r.omp_s, r.identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    const int n = argc > 1 ? std::atoi(argv[1]) : 256;
    const int reps = argc > 2 ? std::atoi(argv[2]) : 20;
    nscope::Rng rng(12345);

#ifdef _OPENMP
    std::printf("openmp enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("openmp disabled\n");
#endif

    auto a = random_vec(static_cast<size_t>(n) * n, rng);
    auto b = random_vec(static_cast<size_t>(n) * n, rng);
    std::vector<float> c1(static_cast<size_t>(n) * n), c2(c1.size());

    auto bench = [&](const char* name, double flops_per_rep, auto&& serial_fn, auto&& omp_fn) {
        serial_fn();  // warm up; c2 now holds the serial reference result
        c1 = c2;
        auto t0 = Clock::now();
        for (int r = 0; r < reps; ++r) serial_fn();
        double ts = seconds_since(t0) / reps;
        omp_fn();
        bool same = std::memcmp(c1.data(), c2.data(), c1.size() * sizeof(float)) == 0;
        t0 = Clock::now();
        for (int r = 0; r < reps; ++r) omp_fn();
        double tp = seconds_since(t0) / reps;
        print_row({name, flops_per_rep / 1e9, ts, tp, same});
    };

    const double mm_flops = 2.0 * n * n * n;
    bench(
        "matmul", mm_flops,
        [&] { nscope::kernels::serial::matmul(a.data(), b.data(), c2.data(), n, n, n); },
        [&] { nscope::kernels::matmul(a.data(), b.data(), c2.data(), n, n, n); });
    bench(
        "matmul_nt", mm_flops,
        [&] { nscope::kernels::serial::matmul_nt(a.data(), b.data(), c2.data(), n, n, n); },
        [&] { nscope::kernels::matmul_nt(a.data(), b.data(), c2.data(), n, n, n); });
    bench(
        "matmul_tn", mm_flops,
        [&] { nscope::kernels::serial::matmul_tn(a.data(), b.data(), c2.data(), n, n, n); },
        [&] { nscope::kernels::matmul_tn(a.data(), b.data(), c2.data(), n, n, n); });

    const double sm_flops = 5.0 * n * n;
    bench(
        "softmax_rows", sm_flops,
        [&] { nscope::kernels::serial::softmax_rows(a.data(), c2.data(), n, n); },
        [&] { nscope::kernels::softmax_rows(a.data(), c2.data(), n, n); });

    std::vector<float> gain(n, 1.0f), bias(n, 0.0f);
    const double ln_flops = 8.0 * n * n;
    bench(
        "layer_norm", ln_flops,
        [&] { nscope::kernels::serial::layer_norm_rows(a.data(), gain.data(), bias.data(), c2.data(), n, n, 1e-5f); },
        [&] { nscope::kernels::layer_norm_rows(a.data(), gain.data(), bias.data(), c2.data(), n, n, 1e-5f); });

    return 0;
}
