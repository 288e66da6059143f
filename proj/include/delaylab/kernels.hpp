#pragma once

// Data-parallel inner loops. Each kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::parallel; the dispatching
// overloads at the bottom pick one from an Execution tag.
//
// Reductions in the parallel versions accumulate fixed-size chunks
// (kReductionChunk elements, independent of the thread count) and combine the
// partial sums serially, so results are bit-identical between runs and thread
// counts. They may differ from the serial reference in the last bits.

#include <cstddef>
#include <span>

namespace delaylab::kernels {

enum class Execution { serial, parallel };

inline constexpr std::size_t kReductionChunk = 1024;

/// Operands of one characteristic step of the age-structured transport
/// equation. All spans have the same length n_age + 1.
struct TransportStepArgs {
  std::span<const double> current;    // w(t, a_j)
  std::span<const double> delayed;    // w(t - r, a_j)
  std::span<const double> survival;   // exp(-mu_j dt)
  std::span<const double> alpha;      // delayed death rate
  std::span<const double> harvest;    // q(t - r, a_j); empty when not harvesting
  std::span<const double> eta;        // harvest rate; empty when not harvesting
  double dt = 0.0;
};

namespace serial {

/// c (n×m) = a (n×k) · b (k×m), all row-major.
void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t n, std::size_t k, std::size_t m);

/// out[j] = current[j-1]·survival[j-1] - dt·(alpha[j-1]·delayed[j-1]
///          + eta[j-1]·harvest[j-1]) for j >= 1; out[0] is left untouched.
void transport_step(const TransportStepArgs& args, std::span<double> out);

/// Σ_j weights_j · x_j · y_j.
double weighted_dot(std::span<const double> weights, std::span<const double> x,
                    std::span<const double> y);

/// Σ_d row_weights_d Σ_j col_weights_j · beta[d, j] · w[d', j] for row-major
/// (rows × cols) tables, where d' = (d + w_row_offset) mod rows lets w be a
/// rotating ring buffer.
double weighted_double_sum(std::span<const double> row_weights,
                           std::span<const double> col_weights,
                           std::span<const double> beta,
                           std::span<const double> w, std::size_t rows,
                           std::size_t cols, std::size_t w_row_offset = 0);

}  // namespace serial

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t n, std::size_t k, std::size_t m);
void transport_step(const TransportStepArgs& args, std::span<double> out);
double weighted_dot(std::span<const double> weights, std::span<const double> x,
                    std::span<const double> y);
double weighted_double_sum(std::span<const double> row_weights,
                           std::span<const double> col_weights,
                           std::span<const double> beta,
                           std::span<const double> w, std::size_t rows,
                           std::size_t cols, std::size_t w_row_offset = 0);

}  // namespace parallel

inline void matmul(Execution ex, std::span<const double> a,
                   std::span<const double> b, std::span<double> c,
                   std::size_t n, std::size_t k, std::size_t m) {
  ex == Execution::serial ? serial::matmul(a, b, c, n, k, m)
                          : parallel::matmul(a, b, c, n, k, m);
}

inline void transport_step(Execution ex, const TransportStepArgs& args,
                           std::span<double> out) {
  ex == Execution::serial ? serial::transport_step(args, out)
                          : parallel::transport_step(args, out);
}

inline double weighted_dot(Execution ex, std::span<const double> weights,
                           std::span<const double> x,
                           std::span<const double> y) {
  return ex == Execution::serial ? serial::weighted_dot(weights, x, y)
                                 : parallel::weighted_dot(weights, x, y);
}

inline double weighted_double_sum(Execution ex,
                                  std::span<const double> row_weights,
                                  std::span<const double> col_weights,
                                  std::span<const double> beta,
                                  std::span<const double> w, std::size_t rows,
                                  std::size_t cols,
                                  std::size_t w_row_offset = 0) {
  return ex == Execution::serial
             ? serial::weighted_double_sum(row_weights, col_weights, beta, w,
                                           rows, cols, w_row_offset)
             : parallel::weighted_double_sum(row_weights, col_weights, beta, w,
                                             rows, cols, w_row_offset);
}

}  // namespace delaylab::kernels
