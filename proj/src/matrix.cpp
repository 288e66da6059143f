#include "delaylab/matrix.hpp"

#include <array>
#include <cmath>
#include <deque>
#include <string>

namespace delaylab {

Vector mat_vec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    throw DimensionError("apply: matrix " + a.shape() + " to vector of length " +
                         std::to_string(x.size()));
  }
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto row = a.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

Matrix mat_exp(const Matrix& a, double t) {
  if (!a.is_square()) throw DimensionError("mat_exp of non-square " + a.shape());
  if (!std::isfinite(t)) throw PreconditionError("mat_exp: time is not finite");
  const std::size_t n = a.rows();
  Matrix x = a * t;
  const double norm = norm_one(x);
  int squarings = 0;
  if (norm > 0.5) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    x *= std::ldexp(1.0, -squarings);
  }

  // Diagonal Padé(6,6): c_k = (2q-k)! q! / ((2q)! k! (q-k)!).
  constexpr std::array<double, 7> c = {1.0,         1.0 / 2.0,    5.0 / 44.0,
                                       1.0 / 66.0,  1.0 / 792.0,  1.0 / 15840.0,
                                       1.0 / 665280.0};
  const Matrix eye = Matrix::identity(n);
  Matrix power = eye;
  Matrix num = eye;
  Matrix den = eye;
  for (std::size_t k = 1; k < c.size(); ++k) {
    power = power * x;
    num += c[k] * power;
    den += ((k % 2) ? -c[k] : c[k]) * power;
  }
  Matrix e = LuFactorization<double>(den).solve(num);
  for (int s = 0; s < squarings; ++s) {
    e = e * e;
    if (!e.all_finite()) break;
  }
  if (!e.all_finite()) {
    throw NumericRangeError("mat_exp overflow: ‖a·t‖₁ = " + std::to_string(norm));
  }
  return e;
}

Matrix solve_linear(const Matrix& a, const Matrix& b) {
  if (!a.is_square()) throw DimensionError("solve_linear: non-square " + a.shape());
  return LuFactorization<double>(a).solve(b);
}

Vector solve_linear(const Matrix& a, std::span<const double> b) {
  if (!a.is_square()) throw DimensionError("solve_linear: non-square " + a.shape());
  return LuFactorization<double>(a).solve(b);
}

BlockMatrix2x2::BlockMatrix2x2(Matrix a_, Matrix b_, Matrix c_, Matrix d_)
    : a(std::move(a_)), b(std::move(b_)), c(std::move(c_)), d(std::move(d_)) {
  const std::size_t n = a.rows();
  const std::size_t m = d.rows();
  if (!a.is_square() || !d.is_square() || b.rows() != n || b.cols() != m ||
      c.rows() != m || c.cols() != n) {
    throw DimensionError("non-conformable blocks: a " + a.shape() + ", b " +
                         b.shape() + ", c " + c.shape() + ", d " + d.shape());
  }
}

Matrix BlockMatrix2x2::assemble() const {
  Matrix out(n() + m(), n() + m());
  out.set_block(0, 0, a);
  out.set_block(0, n(), b);
  out.set_block(n(), 0, c);
  out.set_block(n(), n(), d);
  return out;
}

namespace {

LuFactorization<double> factor_block(const Matrix& x, const char* name) {
  try {
    return LuFactorization<double>(x);
  } catch (const SingularMatrixError& e) {
    throw PreconditionError(std::string("block_inverse: ") + name +
                            " is not invertible (" + e.what() + ")");
  }
}

}  // namespace

BlockMatrix2x2 block_inverse(const BlockMatrix2x2& m) {
  const auto lu_a = factor_block(m.a, "block a");
  const auto lu_d = factor_block(m.d, "block d");
  const Matrix dinv = lu_d.inverse();
  const Matrix dinv_c = dinv * m.c;                      // d⁻¹ c
  const Matrix schur_a = m.a - m.b * dinv_c;             // a - b d⁻¹ c
  const auto lu_s = factor_block(schur_a, "Schur complement a - b d^-1 c");
  const Matrix top_left = lu_s.inverse();                // (a - b d⁻¹ c)⁻¹
  // (d - c a⁻¹ b)⁻¹ = d⁻¹ + d⁻¹ c (a - b d⁻¹ c)⁻¹ b d⁻¹
  const Matrix bottom_right = dinv + dinv_c * top_left * (m.b * dinv);
  const Matrix top_right = -(lu_a.solve(m.b) * bottom_right);
  const Matrix bottom_left = -(dinv_c * top_left);
  return BlockMatrix2x2(top_left, top_right, bottom_left, bottom_right);
}

EigenPair dominant_eig(const Matrix& p, double tol, std::size_t max_iter) {
  if (!p.is_square()) throw DimensionError("dominant_eig of non-square " + p.shape());
  if (!(tol > 0.0)) throw PreconditionError("dominant_eig: tol must be positive");
  const std::size_t n = p.rows();
  if (n == 0) throw DimensionError("dominant_eig of empty matrix");

  // Deterministic start with no symmetry that would hide an eigenvector.
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.25 * std::sin(1.0 + 1.7 * static_cast<double>(i));
  auto normalize = [](Vector& x) {
    double s = 0.0;
    for (double xi : x) s += xi * xi;
    s = std::sqrt(s);
    if (s > 0.0)
      for (double& xi : x) xi /= s;
    return s;
  };
  normalize(v);

  std::deque<double> recent;
  double last_residual = 0.0, last_relative = 0.0;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    Vector w = mat_vec(p, v);
    double rho = 0.0;
    for (std::size_t i = 0; i < n; ++i) rho += v[i] * w[i];
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) res += (w[i] - rho * v[i]) * (w[i] - rho * v[i]);
    res = std::sqrt(res);
    last_residual = res;
    double image = 0.0;
    for (double wi : w) image += wi * wi;
    last_relative = image > 0.0 ? res / std::sqrt(image) : 0.0;
    if (!std::isfinite(rho) || !std::isfinite(res)) {
      throw NumericRangeError("dominant_eig: iterate left the representable range");
    }
    if (res <= tol) {
      return EigenPair{rho, Matrix::column(std::span<const double>(v)), it};
    }
    recent.push_back(rho);
    if (recent.size() > 32) recent.pop_front();
    if (normalize(w) == 0.0) {
      // v was in the kernel of p but the residual test failed: unreachable for
      // exact arithmetic, treat as convergence to zero.
      return EigenPair{0.0, Matrix::column(std::span<const double>(v)), it};
    }
    v = std::move(w);
  }
  double lo = recent.front(), hi = recent.front(), mean = 0.0;
  for (double r : recent) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    mean += r;
  }
  mean /= static_cast<double>(recent.size());
  const double spread = (hi - lo) / std::max(std::abs(mean), 1e-300);
  // A rotation-like pair can freeze the quotient; the residual still shows it.
  const double oscillation = std::max(spread, last_relative);
  throw ConvergenceError(
      "dominant_eig: no convergence after " + std::to_string(max_iter) +
          " iterations (residual " + std::to_string(last_residual) +
          ", Rayleigh-quotient spread " + std::to_string(spread) +
          "; a complex dominant pair is likely)",
      oscillation);
}

ZohDiscretization zoh_discretize(const Matrix& a, const Matrix& b, double dt) {
  if (!(dt > 0.0)) throw PreconditionError("zoh_discretize: dt must be positive");
  if (!a.is_square() || b.rows() != a.rows()) {
    throw DimensionError("zoh_discretize: a " + a.shape() + ", b " + b.shape());
  }
  const std::size_t n = a.rows();
  const std::size_t m = b.cols();
  // M = [a  b]
  //     [0  0]
  Matrix aug(n + m, n + m);
  aug.set_block(0, 0, a);
  aug.set_block(0, n, b);
  const Matrix phi = mat_exp(aug, dt);
  return {phi.block(0, 0, n, n), phi.block(0, n, n, m)};
}

PolynomialHold hold_discretize(const Matrix& a, const Matrix& b, double dt,
                               std::size_t order) {
  if (!(dt > 0.0)) throw PreconditionError("hold_discretize: dt must be positive");
  if (!a.is_square() || b.rows() != a.rows()) {
    throw DimensionError("hold_discretize: a " + a.shape() + ", b " + b.shape());
  }
  const std::size_t n = a.rows();
  const std::size_t m = b.cols();
  const std::size_t size = n + (order + 1) * m;
  // Chain of input derivatives in normalized time τ = s/dt:
  //   dx/dτ = dt·a x + dt·b w_0,  dw_i/dτ = w_{i+1},  dw_order/dτ = 0.
  Matrix aug(size, size);
  aug.set_block(0, 0, a * dt);
  aug.set_block(0, n, b * dt);
  const Matrix eye = Matrix::identity(m);
  for (std::size_t i = 0; i < order; ++i) {
    aug.set_block(n + i * m, n + (i + 1) * m, eye);
  }
  const Matrix e = mat_exp(aug, 1.0);
  PolynomialHold out{e.block(0, 0, n, n), {}};
  for (std::size_t i = 0; i <= order; ++i) {
    out.gamma.push_back(e.block(0, n + i * m, n, m));
  }
  return out;
}

}  // namespace delaylab
