#pragma once

// State-delay systems
//
//   ẇ(t) = a0 w(t) + a1 w(t - r) + ∫_{-r}^0 K(θ) w(t + θ) dθ
//
// lifted to an undelayed system on (w, history) by discretizing the history
// θ ↦ w(t + θ) on big_n + 1 nodes θ_j = -j·r/big_n, plus the characteristic
// function Δ(λ) = det(λI - a0 - a1 e^{-λr} - ∫K(θ) e^{λθ} dθ).

#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "delaylab/matrix.hpp"

namespace delaylab {

/// K(θ) sampled on a uniform grid θ_i = -r + i·r/(values.size()-1),
/// ascending, so values.front() is K(-r) and values.back() is K(0).
struct KernelTable {
  std::vector<Matrix> values;
};

class DelayDescriptor {
 public:
  DelayDescriptor(Matrix a0, Matrix a1, double r,
                  std::optional<KernelTable> kernel = std::nullopt);

  const Matrix& a0() const noexcept { return a0_; }
  const Matrix& a1() const noexcept { return a1_; }
  double r() const noexcept { return r_; }
  const std::optional<KernelTable>& kernel() const noexcept { return kernel_; }
  std::size_t dim() const noexcept { return a0_.rows(); }

  /// K(θ) by linear interpolation of the table; zero without a kernel.
  Matrix kernel_at(double theta) const;

 private:
  Matrix a0_, a1_;
  double r_;
  std::optional<KernelTable> kernel_;
};

/// L e_λ = a1 e^{-λr} + ∫K(θ) e^{λθ} dθ (trapezoid on the kernel grid).
ComplexMatrix delay_on_exponential(const DelayDescriptor& d,
                                   std::complex<double> lambda);
Matrix delay_on_exponential(const DelayDescriptor& d, double lambda);

struct LiftedSystem {
  std::size_t n = 0;
  std::size_t big_n = 0;
  Matrix big_a;  // n·(big_n+1) square; block j is the history node θ_j, block 0 is w
  double dt_theta = 0.0;
  DelayDescriptor descriptor;

  std::size_t size() const noexcept { return n * (big_n + 1); }
};

/// Upwind generator: block rows j ≥ 1 are (x_{j-1} - x_j)/dt_theta, block row
/// 0 is a0 w + a1 x_{big_n} + trapezoid of K(θ_j) x_j.
LiftedSystem build_lift(const DelayDescriptor& d, std::size_t big_n);

/// Lifted state with head w and history nodes f(θ_j), j = 1..big_n.
Vector lifted_state(const LiftedSystem& ls, std::span<const double> head,
                    const std::function<Vector(double theta)>& history);

class CharFunction {
 public:
  explicit CharFunction(DelayDescriptor d) : d_(std::move(d)) {}
  const DelayDescriptor& descriptor() const noexcept { return d_; }

  std::complex<double> operator()(std::complex<double> lambda) const;
  /// Real restriction; real for real coefficient data.
  double operator()(double lambda) const;

 private:
  DelayDescriptor d_;
};

std::complex<double> char_eval(const CharFunction& cf,
                               std::complex<double> lambda);

/// Scans [lo, hi] from the right in steps of at most `scan_step`, then
/// bisects the rightmost sign change to 1e-10. nullopt without a sign change.
/// A scalar system without delayed terms returns a0 exactly.
std::optional<double> rightmost_real_root(const CharFunction& cf, double lo,
                                          double hi, double scan_step = 1e-2);

/// log(ρ(e^{big_a·dt}))/dt from power iteration on the propagator.
double lifted_growth(const LiftedSystem& ls, double dt = 1.0,
                     double tol = 1e-11, std::size_t max_iter = 20000);

/// Builds R(λ, big_a)·rhs from the resolvent block structure with K = M = 0
/// boundary terms absent:
///
///   N1   = (I - R(λ,a0) L e_λ)⁻¹
///   W1 f = N1 R(λ,a0) L R(λ,𝔄) f,   W2 g = N1 R(λ,a0) g
///   head    = R(λ,a0) L R(λ,𝔄) f + R(λ,a0) L e_λ (W1 f + W2 g) + R(λ,a0) g
///   history = R(λ,𝔄) f + e_λ (W1 f + W2 g)
///
/// where R(λ,𝔄) is the discrete history resolvent with zero boundary value
/// and e_λ the discrete exponential (1 + λh)^{-j}. Returns
/// ‖(λ - big_a) x - rhs‖ / ‖rhs‖ in the norm |w|² + h Σ|x_j|².
double verify_resolvent_structure(const LiftedSystem& ls, double lambda,
                                  std::span<const double> rhs);

/// The assembled vector x of verify_resolvent_structure.
Vector structured_resolvent(const LiftedSystem& ls, double lambda,
                            std::span<const double> rhs);

/// |w|² + h Σ_{j≥1} |x_j|², square-rooted.
double lifted_norm(const LiftedSystem& ls, std::span<const double> x);

}  // namespace delaylab
