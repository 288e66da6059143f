#include "delaylab/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

namespace delaylab::kernels {

namespace {

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 14;

double chunk_dot(std::span<const double> weights, std::span<const double> x,
                 std::span<const double> y, std::size_t begin,
                 std::size_t end) {
  double s = 0.0;
  for (std::size_t j = begin; j < end; ++j) s += weights[j] * x[j] * y[j];
  return s;
}

}  // namespace

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t n, std::size_t k, std::size_t m) {
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* bp = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

void transport_step(const TransportStepArgs& args, std::span<double> out) {
  const std::size_t n = args.current.size();
  const bool harvesting = !args.harvest.empty();
  for (std::size_t j = 1; j < n; ++j) {
    double loss = args.alpha[j - 1] * args.delayed[j - 1];
    if (harvesting) loss += args.eta[j - 1] * args.harvest[j - 1];
    out[j] = args.current[j - 1] * args.survival[j - 1] - args.dt * loss;
  }
}

double weighted_dot(std::span<const double> weights, std::span<const double> x,
                    std::span<const double> y) {
  return chunk_dot(weights, x, y, 0, weights.size());
}

double weighted_double_sum(std::span<const double> row_weights,
                           std::span<const double> col_weights,
                           std::span<const double> beta,
                           std::span<const double> w, std::size_t rows,
                           std::size_t cols, std::size_t w_row_offset) {
  double total = 0.0;
  for (std::size_t d = 0; d < rows; ++d) {
    if (row_weights[d] == 0.0) continue;
    const double row = chunk_dot(col_weights, beta.subspan(d * cols, cols),
                                 w.subspan(((d + w_row_offset) % rows) * cols, cols), 0, cols);
    total += row_weights[d] * row;
  }
  return total;
}

}  // namespace serial

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t n, std::size_t k, std::size_t m) {
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (n * k * m > kParallelWork)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* ci = c.data() + i * m;
    std::fill(ci, ci + m, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* bp = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

void transport_step(const TransportStepArgs& args, std::span<double> out) {
  const auto n = static_cast<std::int64_t>(args.current.size());
  const bool harvesting = !args.harvest.empty();
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t jj = 1; jj < n; ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    double loss = args.alpha[j - 1] * args.delayed[j - 1];
    if (harvesting) loss += args.eta[j - 1] * args.harvest[j - 1];
    out[j] = args.current[j - 1] * args.survival[j - 1] - args.dt * loss;
  }
}

double weighted_dot(std::span<const double> weights, std::span<const double> x,
                    std::span<const double> y) {
  const std::size_t n = weights.size();
  const std::size_t chunks = (n + kReductionChunk - 1) / kReductionChunk;
  std::vector<double> partial(chunks, 0.0);
  const auto nchunks = static_cast<std::int64_t>(chunks);
#pragma omp parallel for schedule(static) if (n > 4 * kReductionChunk)
  for (std::int64_t cc = 0; cc < nchunks; ++cc) {
    const auto c = static_cast<std::size_t>(cc);
    const std::size_t begin = c * kReductionChunk;
    partial[c] = chunk_dot(weights, x, y, begin,
                           std::min(n, begin + kReductionChunk));
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

double weighted_double_sum(std::span<const double> row_weights,
                           std::span<const double> col_weights,
                           std::span<const double> beta,
                           std::span<const double> w, std::size_t rows,
                           std::size_t cols, std::size_t w_row_offset) {
  std::vector<double> row_sum(rows, 0.0);
  const auto nrows = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) if (rows * cols > kParallelWork)
  for (std::int64_t dd = 0; dd < nrows; ++dd) {
    const auto d = static_cast<std::size_t>(dd);
    if (row_weights[d] == 0.0) continue;
    row_sum[d] = chunk_dot(col_weights, beta.subspan(d * cols, cols),
                           w.subspan(((d + w_row_offset) % rows) * cols, cols), 0, cols);
  }
  double total = 0.0;
  for (std::size_t d = 0; d < rows; ++d) {
    if (row_weights[d] != 0.0) total += row_weights[d] * row_sum[d];
  }
  return total;
}

}  // namespace parallel

}  // namespace delaylab::kernels
