#pragma once

#include <cstddef>
#include <span>

// Data-parallel inner loops used by the posterior engine and the trainer.
// Every kernel exists twice: kernels::serial is the reference used by the
// tests, kernels::par is the OpenMP version used in production paths.
// Parallel variants split only over independent output elements (inner
// reductions stay serial), so both produce bit-identical results.

namespace swagbench::kernels {

namespace serial {

// mean += (theta - mean) * inv_t;  sq_mean += (theta^2 - sq_mean) * inv_t
void moment_update(std::span<double> mean, std::span<double> sq_mean,
                   std::span<const double> theta, double inv_t);

// out = max(sq_mean - mean^2, floor)
void diag_variance(std::span<const double> mean,
                   std::span<const double> sq_mean, std::span<double> out,
                   double floor);

// out = theta - mean
void subtract(std::span<const double> theta, std::span<const double> mean,
              std::span<double> out);

// out += alpha * x
void axpy(std::span<double> out, double alpha, std::span<const double> x);

// out = mean + scale * sqrt(var) .* z
void diag_sample(std::span<const double> mean, std::span<const double> var,
                 std::span<const double> z, double scale,
                 std::span<double> out);

// C[m,n] = sum_k A[m,k] * B[n,k]   (A: MxK, B: NxK, C: MxN, row-major)
void matmul_nt(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t n,
               std::size_t k);

// C[m,n] = sum_k A[m,k] * B[k,n]   (A: MxK, B: KxN, C: MxN, row-major)
void matmul_nn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t n,
               std::size_t k);

// C[m,n] = sum_k A[k,m] * B[k,n]   (A: KxM, B: KxN, C: MxN, row-major)
void matmul_tn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t n,
               std::size_t k);

}  // namespace serial

namespace par {

void moment_update(std::span<double> mean, std::span<double> sq_mean,
                   std::span<const double> theta, double inv_t);

void diag_variance(std::span<const double> mean,
                   std::span<const double> sq_mean, std::span<double> out,
                   double floor);

void subtract(std::span<const double> theta, std::span<const double> mean,
              std::span<double> out);

void axpy(std::span<double> out, double alpha, std::span<const double> x);

void diag_sample(std::span<const double> mean, std::span<const double> var,
                 std::span<const double> z, double scale,
                 std::span<double> out);

void matmul_nt(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t n,
               std::size_t k);

void matmul_nn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t n,
               std::size_t k);

void matmul_tn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t n,
               std::size_t k);

}  // namespace par

}  // namespace swagbench::kernels
