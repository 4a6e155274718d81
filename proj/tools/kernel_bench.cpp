// Compares the serial reference kernels against their OpenMP versions on
// posterior-engine-sized workloads and prints a small speedup table.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "swagbench/kernels.hpp"

namespace {

using swagbench::kernels::par::matmul_nt;
using Clock = std::chrono::steady_clock;

template <typename F>
double time_best_of(std::size_t reps, F&& f) {
    double best = 1e300;
    for (std::size_t r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        f();
        best = std::min(best,
                        std::chrono::duration<double>(Clock::now() - t0)
                            .count());
    }
    return best;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> v(n);
    for (double& x : v) x = normal(rng);
    return v;
}

void row(const char* name, double serial, double parallel) {
    std::printf("%-16s %12.6f s %12.6f s %8.2fx\n", name, serial, parallel,
                serial / parallel);
}

}  // namespace

int main() {
    namespace ks = swagbench::kernels::serial;
    namespace kp = swagbench::kernels::par;
    constexpr std::size_t kDim = 2'000'000;
    constexpr std::size_t kReps = 5;

    auto theta = random_vector(kDim, 1);
    auto mean = random_vector(kDim, 2);
    auto sq_mean = random_vector(kDim, 3);
    for (double& v : sq_mean) v = v * v + 1.0;
    std::vector<double> out(kDim);

    std::printf("%-16s %14s %14s %9s\n", "kernel", "serial", "openmp",
                "speedup");
    row("moment_update",
        time_best_of(kReps,
                     [&] { ks::moment_update(mean, sq_mean, theta, 0.01); }),
        time_best_of(kReps,
                     [&] { kp::moment_update(mean, sq_mean, theta, 0.01); }));
    row("diag_variance",
        time_best_of(kReps,
                     [&] { ks::diag_variance(mean, sq_mean, out, 1e-12); }),
        time_best_of(kReps,
                     [&] { kp::diag_variance(mean, sq_mean, out, 1e-12); }));
    row("axpy", time_best_of(kReps, [&] { ks::axpy(out, 0.5, theta); }),
        time_best_of(kReps, [&] { kp::axpy(out, 0.5, theta); }));
    row("diag_sample",
        time_best_of(kReps,
                     [&] { ks::diag_sample(mean, sq_mean, theta, 0.7, out); }),
        time_best_of(kReps,
                     [&] { kp::diag_sample(mean, sq_mean, theta, 0.7, out); }));

    constexpr std::size_t m = 256, n = 256, k = 784;
    auto a = random_vector(m * k, 4);
    auto b = random_vector(n * k, 5);
    std::vector<double> c(m * n);
    row("matmul_nt",
        time_best_of(kReps, [&] { ks::matmul_nt(a, b, c, m, n, k); }),
        time_best_of(kReps, [&] { kp::matmul_nt(a, b, c, m, n, k); }));
    return 0;
}
