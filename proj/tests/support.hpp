#pragma once

// Reference computations for the tests. Everything here is written
// independently of the library: plain loops, long double where it helps,
// no shared helpers.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "delaylab/matrix.hpp"

namespace oracle {

using delaylab::Matrix;

inline Matrix random_matrix(std::mt19937_64& gen, std::size_t r, std::size_t c,
                            double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (double& x : m.data()) x = u(gen);
  return m;
}

inline double max_diff(const Matrix& a, const Matrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  }
  return d;
}

/// Taylor series of e^x summed until the terms vanish, after halving x
/// until |x| < 1 and squaring back.
inline long double scalar_exp(long double x) {
  int halvings = 0;
  while (std::fabs(x) >= 1.0L) {
    x /= 2.0L;
    ++halvings;
  }
  long double term = 1.0L, sum = 1.0L;
  for (int k = 1; k < 40; ++k) {
    term *= x / k;
    sum += term;
  }
  for (int i = 0; i < halvings; ++i) sum *= sum;
  return sum;
}

/// e^{a t} by a long-double Taylor series with squaring.
inline Matrix taylor_exp(const Matrix& a, double t) {
  const std::size_t n = a.rows();
  std::vector<long double> m(n * n);
  long double norm = 0.0L;
  for (std::size_t i = 0; i < n * n; ++i) {
    m[i] = static_cast<long double>(a.data()[i]) * t;
    norm = std::max(norm, std::fabs(m[i]));
  }
  int squarings = 0;
  while (norm * n > 0.25L) {
    norm /= 2.0L;
    ++squarings;
  }
  for (auto& x : m) x = std::ldexp(x, -squarings);

  auto mul = [n](const std::vector<long double>& x, const std::vector<long double>& y) {
    std::vector<long double> z(n * n, 0.0L);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j) z[i * n + j] += x[i * n + k] * y[k * n + j];
    return z;
  };
  std::vector<long double> sum(n * n, 0.0L), term(n * n, 0.0L);
  for (std::size_t i = 0; i < n; ++i) sum[i * n + i] = term[i * n + i] = 1.0L;
  for (int k = 1; k < 30; ++k) {
    term = mul(term, m);
    for (auto& x : term) x /= k;
    for (std::size_t i = 0; i < n * n; ++i) sum[i] += term[i];
  }
  for (int s = 0; s < squarings; ++s) sum = mul(sum, sum);
  Matrix out(n, n);
  for (std::size_t i = 0; i < n * n; ++i) out.data()[i] = static_cast<double>(sum[i]);
  return out;
}

/// Gauss-Jordan with partial pivoting in long double; x with a x = b.
inline Matrix gauss_solve(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.rows(), m = b.cols();
  std::vector<std::vector<long double>> t(n, std::vector<long double>(n + m));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) t[i][j] = a(i, j);
    for (std::size_t j = 0; j < m; ++j) t[i][n + j] = b(i, j);
  }
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::fabs(t[i][k]) > std::fabs(t[p][k])) p = i;
    std::swap(t[k], t[p]);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == k) continue;
      const long double f = t[i][k] / t[k][k];
      for (std::size_t j = k; j < n + m; ++j) t[i][j] -= f * t[k][j];
    }
  }
  Matrix x(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) x(i, j) = static_cast<double>(t[i][n + j] / t[i][i]);
  return x;
}

/// Plain bisection on a sign change, to `tol`.
inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     double tol = 1e-14) {
  double flo = f(lo);
  for (int i = 0; i < 200 && hi - lo > tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Composite Simpson on [lo, hi] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double lo, double hi,
                      std::size_t n = 2000) {
  const double h = (hi - lo) / static_cast<double>(n);
  double s = f(lo) + f(hi);
  for (std::size_t i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + h * static_cast<double>(i));
  return s * h / 3.0;
}

/// Straightforward age-structured scheme with the whole history kept in a
/// vector of profiles (no ring buffer), constant-coefficient rates, point
/// birth law. Returns the profile after `steps` steps.
struct NaivePopulation {
  double a_max;
  std::size_t n_age;
  std::size_t k;  // delay steps
  double mu, alpha, beta;

  std::vector<std::vector<double>> run(const std::function<double(double, double)>& history,
                                       std::size_t steps) const {
    const double h = a_max / static_cast<double>(n_age);
    std::vector<std::vector<double>> w;  // w[i] at time (i - k)·h
    for (std::size_t i = 0; i <= k; ++i) {
      const double s = (static_cast<double>(i) - static_cast<double>(k)) * h;
      std::vector<double> p(n_age + 1);
      for (std::size_t j = 0; j <= n_age; ++j) p[j] = history(s, h * static_cast<double>(j));
      w.push_back(p);
    }
    const double surv = std::exp(-mu * h);
    for (std::size_t n = 0; n < steps; ++n) {
      const auto& cur = w.back();
      const auto& del = w[w.size() - 1 - k];
      std::vector<double> next(n_age + 1, 0.0);
      for (std::size_t j = 1; j <= n_age; ++j) {
        next[j] = cur[j - 1] * surv - h * alpha * del[j - 1];
      }
      // newborn from the profile r earlier than the new time
      const auto& src = k == 0 ? next : w[w.size() - k];
      double b = 0.0;
      for (std::size_t j = 1; j <= n_age; ++j) {
        b += 0.5 * h * beta * (src[j - 1] + src[j]);
      }
      if (k == 0) {
        // next[0] is still zero and enters b with weight β·h/2
        next[0] = b / (1.0 - 0.5 * h * beta);
      } else {
        next[0] = b;
      }
      w.push_back(next);
    }
    return w;
  }
};

}  // namespace oracle
