#pragma once

// Dense matrices at desk scale: storage, arithmetic, LU, the matrix
// exponential and its zero/polynomial-hold integrals, the 2×2 block inverse,
// and power iteration.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "delaylab/error.hpp"
#include "delaylab/kernels.hpp"

namespace delaylab {

namespace detail {

template <typename T>
bool is_finite(const T& x) {
  if constexpr (std::is_floating_point_v<T>) {
    return std::isfinite(x);
  } else {
    return std::isfinite(x.real()) && std::isfinite(x.imag());
  }
}

}  // namespace detail

/// Row-major dense matrix over double or std::complex<double>.
template <typename T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() = default;

  BasicMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, T{}) {}

  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("matrix storage holds " +
                           std::to_string(data_.size()) + " entries, expected " +
                           std::to_string(rows_ * cols_));
    }
    require_finite();
  }

  BasicMatrix(std::initializer_list<std::initializer_list<T>> init)
      : rows_(init.size()), cols_(init.size() ? init.begin()->size() : 0) {
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) throw DimensionError("ragged matrix literal");
      data_.insert(data_.end(), row.begin(), row.end());
    }
    require_finite();
  }

  static BasicMatrix identity(std::size_t n) {
    BasicMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  static BasicMatrix column(std::span<const T> v) {
    return BasicMatrix(v.size(), 1, std::vector<T>(v.begin(), v.end()));
  }

  static BasicMatrix diagonal(std::span<const T> v) {
    BasicMatrix m(v.size(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i) m(i, i) = v[i];
    m.require_finite();
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  std::span<T> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<T> col(std::size_t j) const {
    std::vector<T> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }

  BasicMatrix block(std::size_t r0, std::size_t c0, std::size_t nr,
                    std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) {
      throw DimensionError("block exceeds matrix bounds");
    }
    BasicMatrix out(nr, nc);
    for (std::size_t i = 0; i < nr; ++i) {
      std::copy_n(data_.begin() + (r0 + i) * cols_ + c0, nc,
                  out.data_.begin() + i * nc);
    }
    return out;
  }

  void set_block(std::size_t r0, std::size_t c0, const BasicMatrix& src) {
    if (r0 + src.rows_ > rows_ || c0 + src.cols_ > cols_) {
      throw DimensionError("block exceeds matrix bounds");
    }
    for (std::size_t i = 0; i < src.rows_; ++i) {
      std::copy_n(src.data_.begin() + i * src.cols_, src.cols_,
                  data_.begin() + (r0 + i) * cols_ + c0);
    }
  }

  BasicMatrix transpose() const {
    BasicMatrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
    return out;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](const T& x) { return detail::is_finite(x); });
  }

  BasicMatrix& operator+=(const BasicMatrix& o) {
    require_same_shape(o, "+");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  BasicMatrix& operator-=(const BasicMatrix& o) {
    require_same_shape(o, "-");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }

  BasicMatrix& operator*=(T s) {
    for (auto& x : data_) x *= s;
    return *this;
  }

  friend BasicMatrix operator+(BasicMatrix a, const BasicMatrix& b) {
    return a += b;
  }
  friend BasicMatrix operator-(BasicMatrix a, const BasicMatrix& b) {
    return a -= b;
  }
  friend BasicMatrix operator-(BasicMatrix a) { return a *= T{-1}; }
  friend BasicMatrix operator*(BasicMatrix a, T s) { return a *= s; }
  friend BasicMatrix operator*(T s, BasicMatrix a) { return a *= s; }

  friend BasicMatrix operator*(const BasicMatrix& a, const BasicMatrix& b) {
    if (a.cols_ != b.rows_) {
      throw DimensionError("matrix product " + a.shape() + " · " + b.shape());
    }
    BasicMatrix c(a.rows_, b.cols_);
    if constexpr (std::is_same_v<T, double>) {
      kernels::matmul(kernels::Execution::parallel, a.data_, b.data_, c.data_,
                      a.rows_, a.cols_, b.cols_);
    } else {
      for (std::size_t i = 0; i < a.rows_; ++i)
        for (std::size_t p = 0; p < a.cols_; ++p) {
          const T aip = a(i, p);
          for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aip * b(p, j);
        }
    }
    return c;
  }

  friend bool operator==(const BasicMatrix&, const BasicMatrix&) = default;

  std::string shape() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  void require_finite() const {
    if (!all_finite()) throw NumericRangeError("matrix entry is not finite");
  }

  void require_same_shape(const BasicMatrix& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) {
      throw DimensionError(std::string("shape mismatch in ") + op + ": " +
                           shape() + " vs " + o.shape());
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<double>;
using ComplexMatrix = BasicMatrix<std::complex<double>>;
using Vector = std::vector<double>;

/// Pivots below this fraction of the largest entry make a matrix singular.
inline constexpr double kPivotThreshold = 1e-12;

template <typename T>
double norm_one(const BasicMatrix<T>& a) {
  double best = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += std::abs(a(i, j));
    best = std::max(best, s);
  }
  return best;
}

template <typename T>
double norm_inf(const BasicMatrix<T>& a) {
  double best = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (const auto& x : a.row(i)) s += std::abs(x);
    best = std::max(best, s);
  }
  return best;
}

template <typename T>
double norm_fro(const BasicMatrix<T>& a) {
  double s = 0.0;
  for (const auto& x : a.data()) s += std::norm(x);
  return std::sqrt(s);
}

template <typename T>
double max_abs(const BasicMatrix<T>& a) {
  double best = 0.0;
  for (const auto& x : a.data()) best = std::max(best, std::abs(x));
  return best;
}

/// LU factorization with partial pivoting. Construction fails with
/// SingularMatrixError when a pivot falls below threshold · max|a_ij|.
template <typename T>
class LuFactorization {
 public:
  explicit LuFactorization(BasicMatrix<T> a,
                           double threshold = kPivotThreshold)
      : lu_(std::move(a)), perm_(lu_.rows()) {
    if (!lu_.is_square()) {
      throw DimensionError("LU of non-square matrix " + lu_.shape());
    }
    const std::size_t n = lu_.rows();
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
    const double scale = max_abs(lu_);
    min_pivot_ = n ? std::numeric_limits<double>::infinity() : 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t i = k + 1; i < n; ++i) {
        if (std::abs(lu_(i, k)) > best) {
          best = std::abs(lu_(i, k));
          p = i;
        }
      }
      min_pivot_ = std::min(min_pivot_, best);
      if (scale == 0.0 || best <= threshold * scale) {
        const double cond = best > 0.0 ? scale / best
                                       : std::numeric_limits<double>::infinity();
        throw SingularMatrixError(
            "matrix is singular to working precision (pivot " +
                std::to_string(best) + " at column " + std::to_string(k) +
                ", condition estimate " + std::to_string(cond) + ")",
            cond);
      }
      if (p != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
        std::swap(perm_[k], perm_[p]);
        sign_ = -sign_;
      }
      const T pivot = lu_(k, k);
      for (std::size_t i = k + 1; i < n; ++i) {
        const T f = lu_(i, k) / pivot;
        lu_(i, k) = f;
        if (f == T{}) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
      }
    }
    condition_estimate_ = min_pivot_ > 0.0 ? scale / min_pivot_ : 0.0;
  }

  std::size_t dim() const noexcept { return lu_.rows(); }

  /// max|a_ij| / min|pivot|: a cheap lower bound on the condition number.
  double condition_estimate() const noexcept { return condition_estimate_; }

  std::vector<T> solve(std::span<const T> b) const {
    const std::size_t n = dim();
    if (b.size() != n) throw DimensionError("right-hand side length mismatch");
    std::vector<T> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
    for (std::size_t ii = n; ii-- > 0;) {
      for (std::size_t j = ii + 1; j < n; ++j) x[ii] -= lu_(ii, j) * x[j];
      x[ii] /= lu_(ii, ii);
    }
    return x;
  }

  BasicMatrix<T> solve(const BasicMatrix<T>& b) const {
    if (b.rows() != dim()) {
      throw DimensionError("solve: rhs " + b.shape() + " vs system of order " +
                           std::to_string(dim()));
    }
    BasicMatrix<T> out(b.rows(), b.cols());
    for (std::size_t j = 0; j < b.cols(); ++j) {
      const auto x = solve(std::span<const T>(b.col(j)));
      for (std::size_t i = 0; i < x.size(); ++i) out(i, j) = x[i];
    }
    return out;
  }

  BasicMatrix<T> inverse() const {
    return solve(BasicMatrix<T>::identity(dim()));
  }

  T determinant() const {
    T det = T(static_cast<double>(sign_));
    for (std::size_t i = 0; i < dim(); ++i) det *= lu_(i, i);
    return det;
  }

 private:
  BasicMatrix<T> lu_;
  std::vector<std::size_t> perm_;
  int sign_ = 1;
  double min_pivot_ = 0.0;
  double condition_estimate_ = 0.0;
};

/// Determinant by Gaussian elimination; exactly singular matrices give 0.
template <typename T>
T determinant(const BasicMatrix<T>& a) {
  if (!a.is_square()) throw DimensionError("determinant of " + a.shape());
  try {
    return LuFactorization<T>(a, 0.0).determinant();
  } catch (const SingularMatrixError&) {
    return T{};
  }
}

/// y = a·x.
Vector mat_vec(const Matrix& a, std::span<const double> x);

/// e^{a·t} by scaling and squaring with a degree-6 Padé kernel (scaled
/// 1-norm ≤ 0.5).
Matrix mat_exp(const Matrix& a, double t);

/// Solution x of a·x = b. Throws SingularMatrixError when LU rejects a.
Matrix solve_linear(const Matrix& a, const Matrix& b);
Vector solve_linear(const Matrix& a, std::span<const double> b);

/// [[a, b], [c, d]] with a n×n, b n×m, c m×n, d m×m.
struct BlockMatrix2x2 {
  Matrix a, b, c, d;

  BlockMatrix2x2(Matrix a_, Matrix b_, Matrix c_, Matrix d_);

  std::size_t n() const noexcept { return a.rows(); }
  std::size_t m() const noexcept { return d.rows(); }

  /// The (n+m)×(n+m) matrix the blocks describe.
  Matrix assemble() const;
};

/// Inverse of a 2×2 operator block matrix whose diagonal blocks a, d and
/// Schur complement a - b·d⁻¹·c are invertible:
///
///   [ (a - b d⁻¹ c)⁻¹            -a⁻¹ b (d - c a⁻¹ b)⁻¹ ]
///   [ -d⁻¹ c (a - b d⁻¹ c)⁻¹      (d - c a⁻¹ b)⁻¹        ]
///
/// where (d - c a⁻¹ b)⁻¹ = d⁻¹ + d⁻¹ c (a - b d⁻¹ c)⁻¹ b d⁻¹ is formed from
/// the first Schur complement, so no second factorization is needed.
/// Throws PreconditionError naming the failing block.
BlockMatrix2x2 block_inverse(const BlockMatrix2x2& m);

struct EigenPair {
  double value = 0.0;
  Matrix vector;  // unit 2-norm column
  std::size_t iterations = 0;
};

/// Power iteration with Rayleigh-quotient estimate. Stops when
/// ‖p·v - value·v‖ ≤ tol·‖v‖. A complex dominant pair never satisfies the
/// test; it surfaces as ConvergenceError with the quotient spread.
EigenPair dominant_eig(const Matrix& p, double tol, std::size_t max_iter);

struct ZohDiscretization {
  Matrix ad;  // e^{a·dt}
  Matrix bd;  // ∫_0^dt e^{a·s} ds · b
};

/// Exact one-step map of ẋ = a x + b u for u constant over the step, from
/// the exponential of [[a, b], [0, 0]]·dt.
ZohDiscretization zoh_discretize(const Matrix& a, const Matrix& b, double dt);

/// Exact one-step map of ẋ = a x + b u for u polynomial over the step. With
/// τ = s/dt ∈ [0, 1] and u(τ) = Σ_i w_i τ^i / i!,
///   x(dt) = phi · x(0) + Σ_i gamma[i] · w_i,
/// where w_i = dⁱu/dτⁱ at τ = 0. Order 0 reproduces zoh_discretize.
struct PolynomialHold {
  Matrix phi;
  std::vector<Matrix> gamma;
};

PolynomialHold hold_discretize(const Matrix& a, const Matrix& b, double dt,
                               std::size_t order);

}  // namespace delaylab
