#include "delaylab/delay_lift.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace delaylab {

DelayDescriptor::DelayDescriptor(Matrix a0, Matrix a1, double r,
                                 std::optional<KernelTable> kernel)
    : a0_(std::move(a0)), a1_(std::move(a1)), r_(r), kernel_(std::move(kernel)) {
  if (!a0_.is_square() || a1_.rows() != a0_.rows() || a1_.cols() != a0_.cols()) {
    throw DimensionError("delay matrices must be square of one size: a0 " +
                         a0_.shape() + ", a1 " + a1_.shape());
  }
  if (!(r_ > 0.0) || !std::isfinite(r_)) {
    throw PreconditionError("delay r must be positive and finite");
  }
  if (kernel_) {
    if (kernel_->values.size() < 2) {
      throw PreconditionError("kernel table needs at least two nodes on [-r, 0]");
    }
    for (const auto& k : kernel_->values) {
      if (k.rows() != dim() || k.cols() != dim()) {
        throw DimensionError("kernel value " + k.shape() + " does not match a0 " +
                             a0_.shape());
      }
    }
  }
}

Matrix DelayDescriptor::kernel_at(double theta) const {
  if (!kernel_) return Matrix(dim(), dim());
  const auto& v = kernel_->values;
  const double step = r_ / static_cast<double>(v.size() - 1);
  const double pos = std::clamp((theta + r_) / step, 0.0,
                                static_cast<double>(v.size() - 1));
  const auto i = std::min(static_cast<std::size_t>(pos), v.size() - 2);
  const double frac = pos - static_cast<double>(i);
  return (1.0 - frac) * v[i] + frac * v[i + 1];
}

namespace {

template <typename S>
BasicMatrix<S> promote(const Matrix& m) {
  if constexpr (std::is_same_v<S, double>) {
    return m;
  } else {
    BasicMatrix<S> out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = m.data()[i];
    return out;
  }
}

template <typename S>
BasicMatrix<S> delay_on_exponential_impl(const DelayDescriptor& d, S lambda) {
  BasicMatrix<S> out = promote<S>(d.a1());
  out *= std::exp(-lambda * d.r());
  if (d.kernel()) {
    const auto& v = d.kernel()->values;
    const double step = d.r() / static_cast<double>(v.size() - 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double theta = -d.r() + step * static_cast<double>(i);
      const double w = (i == 0 || i + 1 == v.size()) ? 0.5 * step : step;
      BasicMatrix<S> term = promote<S>(v[i]);
      term *= S(w) * std::exp(lambda * theta);
      out += term;
    }
  }
  return out;
}

template <typename S>
BasicMatrix<S> char_matrix(const DelayDescriptor& d, S lambda) {
  BasicMatrix<S> m = BasicMatrix<S>::identity(d.dim());
  m *= lambda;
  m -= promote<S>(d.a0());
  m -= delay_on_exponential_impl(d, lambda);
  return m;
}

}  // namespace

ComplexMatrix delay_on_exponential(const DelayDescriptor& d,
                                   std::complex<double> lambda) {
  return delay_on_exponential_impl(d, lambda);
}

Matrix delay_on_exponential(const DelayDescriptor& d, double lambda) {
  return delay_on_exponential_impl(d, lambda);
}

LiftedSystem build_lift(const DelayDescriptor& d, std::size_t big_n) {
  if (big_n < 2) throw PreconditionError("build_lift needs at least 2 history points");
  const std::size_t n = d.dim();
  const double h = d.r() / static_cast<double>(big_n);
  const std::size_t size = n * (big_n + 1);
  Matrix big_a(size, size);

  big_a.set_block(0, 0, d.a0());
  Matrix tail = d.a1();
  if (d.kernel()) {
    for (std::size_t j = 0; j <= big_n; ++j) {
      const double w = (j == 0 || j == big_n) ? 0.5 * h : h;
      Matrix kj = w * d.kernel_at(-h * static_cast<double>(j));
      if (j == big_n) {
        tail += kj;
      } else {
        kj += big_a.block(0, j * n, n, n);
        big_a.set_block(0, j * n, kj);
      }
    }
  }
  big_a.set_block(0, big_n * n, tail);

  const double inv_h = 1.0 / h;
  for (std::size_t j = 1; j <= big_n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      big_a(j * n + i, (j - 1) * n + i) = inv_h;
      big_a(j * n + i, j * n + i) = -inv_h;
    }
  }
  return LiftedSystem{n, big_n, std::move(big_a), h, d};
}

Vector lifted_state(const LiftedSystem& ls, std::span<const double> head,
                    const std::function<Vector(double theta)>& history) {
  if (head.size() != ls.n) throw DimensionError("lifted_state: head length mismatch");
  Vector x(ls.size());
  std::copy(head.begin(), head.end(), x.begin());
  for (std::size_t j = 1; j <= ls.big_n; ++j) {
    const Vector f = history(-ls.dt_theta * static_cast<double>(j));
    if (f.size() != ls.n) throw DimensionError("lifted_state: history length mismatch");
    std::copy(f.begin(), f.end(), x.begin() + static_cast<std::ptrdiff_t>(j * ls.n));
  }
  return x;
}

std::complex<double> CharFunction::operator()(std::complex<double> lambda) const {
  return determinant(char_matrix(d_, lambda));
}

double CharFunction::operator()(double lambda) const {
  return determinant(char_matrix(d_, lambda));
}

std::complex<double> char_eval(const CharFunction& cf,
                               std::complex<double> lambda) {
  return cf(lambda);
}

std::optional<double> rightmost_real_root(const CharFunction& cf, double lo,
                                          double hi, double scan_step) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
    throw PreconditionError("root bracket must be a finite interval lo < hi");
  }
  if (!(scan_step > 0.0)) throw PreconditionError("scan step must be positive");
  const DelayDescriptor& d = cf.descriptor();
  if (d.dim() == 1 && d.a1()(0, 0) == 0.0 && !d.kernel()) {
    // λ - a0 is linear: the root is a0 itself.
    const double root = d.a0()(0, 0);
    if (lo <= root && root <= hi) return root;
    return std::nullopt;
  }
  const auto cells =
      static_cast<std::size_t>(std::ceil((hi - lo) / scan_step - 1e-9));
  auto node = [&](std::size_t i) {
    return i == cells ? hi : lo + (hi - lo) * static_cast<double>(i) /
                                      static_cast<double>(cells);
  };
  double right = hi;
  double f_right = cf(right);
  if (f_right == 0.0) return right;
  for (std::size_t i = cells; i-- > 0;) {
    const double left = node(i);
    const double f_left = cf(left);
    if (f_left == 0.0) return left;
    if ((f_left < 0.0) != (f_right < 0.0)) {
      double a = left, b = right, fa = f_left;
      while (b - a > 1e-10) {
        const double mid = 0.5 * (a + b);
        const double fm = cf(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (fa < 0.0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      return 0.5 * (a + b);
    }
    right = left;
    f_right = f_left;
  }
  return std::nullopt;
}

double lifted_growth(const LiftedSystem& ls, double dt, double tol,
                     std::size_t max_iter) {
  if (!(dt > 0.0)) throw PreconditionError("lifted_growth: dt must be positive");
  const EigenPair e = dominant_eig(mat_exp(ls.big_a, dt), tol, max_iter);
  if (!(e.value > 0.0)) {
    throw ConvergenceError("lifted_growth: dominant propagator eigenvalue is not positive",
                           0.0);
  }
  return std::log(e.value) / dt;
}

double lifted_norm(const LiftedSystem& ls, std::span<const double> x) {
  double head = 0.0, hist = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    (i < ls.n ? head : hist) += x[i] * x[i];
  }
  return std::sqrt(head + ls.dt_theta * hist);
}

namespace {

LuFactorization<double> factor_or_spectrum(const Matrix& m, const char* what) {
  try {
    return LuFactorization<double>(m);
  } catch (const SingularMatrixError& e) {
    throw SpectrumError(std::string(what) + " is singular: λ is in the spectrum (" +
                        e.what() + ")");
  }
}

}  // namespace

Vector structured_resolvent(const LiftedSystem& ls, double lambda,
                            std::span<const double> rhs) {
  if (rhs.size() != ls.size()) {
    throw DimensionError("resolvent right-hand side has length " +
                         std::to_string(rhs.size()) + ", expected " +
                         std::to_string(ls.size()));
  }
  const std::size_t n = ls.n;
  const std::size_t nn = ls.big_n;
  const double h = ls.dt_theta;
  const DelayDescriptor& d = ls.descriptor;
  const double diag = lambda + 1.0 / h;
  if (std::abs(diag) * h < 1e-12) {
    throw SpectrumError("λ = -1/h is the eigenvalue of the discrete history shift");
  }

  // R(λ,𝔄) f: (λ + 1/h) x_j - x_{j-1}/h = f_j with x_0 = 0.
  Vector rf(ls.size(), 0.0);
  for (std::size_t j = 1; j <= nn; ++j)
    for (std::size_t i = 0; i < n; ++i)
      rf[j * n + i] = (rhs[j * n + i] + rf[(j - 1) * n + i] / h) / diag;

  // L applied to a history vector: the head row of big_a minus its a0 block.
  auto apply_delay = [&](const Vector& x) {
    Vector out(n, 0.0);
    for (std::size_t col = 0; col < ls.size(); ++col) {
      const double xc = x[col];
      if (xc == 0.0) continue;
      for (std::size_t i = 0; i < n; ++i) {
        double coeff = ls.big_a(i, col);
        if (col < n) coeff -= d.a0()(i, col);
        out[i] += coeff * xc;
      }
    }
    return out;
  };

  const Matrix eye = Matrix::identity(n);
  const auto lu_a = factor_or_spectrum(lambda * eye - d.a0(), "λ - a0");
  const Matrix le = delay_on_exponential(d, lambda);
  const Matrix ra_le = lu_a.solve(le);
  const auto lu_n1 = factor_or_spectrum(eye - ra_le, "I - R(λ,a0) L e_λ");

  const Vector g(rhs.begin(), rhs.begin() + static_cast<std::ptrdiff_t>(n));
  const Vector ra_lrf = lu_a.solve(std::span<const double>(apply_delay(rf)));
  const Vector ra_g = lu_a.solve(std::span<const double>(g));
  const Vector w1f = lu_n1.solve(std::span<const double>(ra_lrf));
  const Vector w2g = lu_n1.solve(std::span<const double>(ra_g));
  Vector c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = w1f[i] + w2g[i];

  Vector x = rf;
  const Vector head_corr = mat_vec(ra_le, c);
  for (std::size_t i = 0; i < n; ++i) x[i] = ra_lrf[i] + head_corr[i] + ra_g[i];
  const double ratio = 1.0 / (1.0 + lambda * h);
  double e = 1.0;
  for (std::size_t j = 1; j <= nn; ++j) {
    e *= ratio;
    for (std::size_t i = 0; i < n; ++i) x[j * n + i] += e * c[i];
  }
  return x;
}

double verify_resolvent_structure(const LiftedSystem& ls, double lambda,
                                  std::span<const double> rhs) {
  factor_or_spectrum(lambda * Matrix::identity(ls.size()) - ls.big_a, "λ - big_a");
  const Vector x = structured_resolvent(ls, lambda, rhs);
  Vector res = mat_vec(ls.big_a, x);
  for (std::size_t i = 0; i < res.size(); ++i) res[i] = lambda * x[i] - res[i] - rhs[i];
  const double scale = lifted_norm(ls, rhs);
  if (scale == 0.0) throw PreconditionError("resolvent right-hand side is zero");
  return lifted_norm(ls, res) / scale;
}

}  // namespace delaylab
