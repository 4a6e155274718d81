#include "swagbench/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace swagbench::kernels {

namespace serial {

void moment_update(std::span<double> mean, std::span<double> sq_mean,
                   std::span<const double> theta, double inv_t) {
    const std::size_t n = mean.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = theta[i];
        mean[i] += (x - mean[i]) * inv_t;
        sq_mean[i] += (x * x - sq_mean[i]) * inv_t;
    }
}

void diag_variance(std::span<const double> mean,
                   std::span<const double> sq_mean, std::span<double> out,
                   double floor) {
    const std::size_t n = mean.size();
    for (std::size_t i = 0; i < n; ++i)
        out[i] = std::max(sq_mean[i] - mean[i] * mean[i], floor);
}

void subtract(std::span<const double> theta, std::span<const double> mean,
              std::span<double> out) {
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) out[i] = theta[i] - mean[i];
}

void axpy(std::span<double> out, double alpha, std::span<const double> x) {
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) out[i] += alpha * x[i];
}

void diag_sample(std::span<const double> mean, std::span<const double> var,
                 std::span<const double> z, double scale,
                 std::span<double> out) {
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i)
        out[i] = mean[i] + scale * std::sqrt(var[i]) * z[i];
}

void matmul_nt(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t n,
               std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * n + j] = acc;
        }
    }
}

void matmul_nn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t n,
               std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

void matmul_tn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t n,
               std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

}  // namespace serial

namespace par {

void moment_update(std::span<double> mean, std::span<double> sq_mean,
                   std::span<const double> theta, double inv_t) {
    const std::int64_t n = static_cast<std::int64_t>(mean.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const double x = theta[i];
        mean[i] += (x - mean[i]) * inv_t;
        sq_mean[i] += (x * x - sq_mean[i]) * inv_t;
    }
}

void diag_variance(std::span<const double> mean,
                   std::span<const double> sq_mean, std::span<double> out,
                   double floor) {
    const std::int64_t n = static_cast<std::int64_t>(mean.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        out[i] = std::max(sq_mean[i] - mean[i] * mean[i], floor);
}

void subtract(std::span<const double> theta, std::span<const double> mean,
              std::span<double> out) {
    const std::int64_t n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = theta[i] - mean[i];
}

void axpy(std::span<double> out, double alpha, std::span<const double> x) {
    const std::int64_t n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] += alpha * x[i];
}

void diag_sample(std::span<const double> mean, std::span<const double> var,
                 std::span<const double> z, double scale,
                 std::span<double> out) {
    const std::int64_t n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        out[i] = mean[i] + scale * std::sqrt(var[i]) * z[i];
}

void matmul_nt(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t n,
               std::size_t k) {
    const std::int64_t mm = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < mm; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * n + j] = acc;
        }
    }
}

void matmul_nn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t n,
               std::size_t k) {
    const std::int64_t mm = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < mm; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

void matmul_tn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t n,
               std::size_t k) {
    const std::int64_t mm = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < mm; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

}  // namespace par

}  // namespace swagbench::kernels
