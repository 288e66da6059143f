#pragma once

// Finite-dimensional regular linear systems Σ = (A, B, C, D) and their maps
// on sampled signals:
//
//   state      x(t)      = T(t) x0 + Φ(t) u,   Φ(t) u = ∫_0^t e^{A(t-s)} B u(s) ds
//   observe    (Ψ x0)(σ) = C e^{Aσ} x0
//   io         (F u)(t)  = C Φ(t) u + D u(t)
//
// Signals live on a uniform grid and are interpreted between samples by a
// Hold. Each step is integrated exactly for the held input (augmented matrix
// exponential), so the only approximation in a chain of maps is the hold of
// the intermediate signals.
//
// At finite dimension X₋₁ = X, T₋₁ = T and C^A_Λ = C, and J^{A,A+P} is the
// identity; no code exists for them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "delaylab/matrix.hpp"

namespace delaylab {

/// Generator quadruple of a regular linear system.
class StateSpaceSystem {
 public:
  StateSpaceSystem(Matrix a, Matrix b, Matrix c, Matrix d);

  /// (a, b, c) with zero feedthrough.
  static StateSpaceSystem without_feedthrough(Matrix a, Matrix b, Matrix c);

  const Matrix& a() const noexcept { return a_; }
  const Matrix& b() const noexcept { return b_; }
  const Matrix& c() const noexcept { return c_; }
  const Matrix& d() const noexcept { return d_; }

  std::size_t states() const noexcept { return a_.rows(); }
  std::size_t inputs() const noexcept { return b_.cols(); }
  std::size_t outputs() const noexcept { return c_.rows(); }

 private:
  Matrix a_, b_, c_, d_;
};

/// How a signal behaves between grid samples.
enum class Hold {
  zero_order,    // constant on [k dt, (k+1) dt)
  first_order,   // linear between samples k and k+1
  second_order,  // quadratic through samples k-1, k, k+1 (first step linear)
};

/// Vector-valued samples on t_k = k·dt, k = 0..steps.
class SampledSignal {
 public:
  /// samples: one row per time point.
  SampledSignal(double dt, Matrix samples);

  static SampledSignal zeros(double dt, std::size_t steps, std::size_t dim);
  static SampledSignal from_function(
      double dt, std::size_t steps, std::size_t dim,
      const std::function<void(double t, std::span<double> out)>& f);

  double dt() const noexcept { return dt_; }
  std::size_t size() const noexcept { return samples_.rows(); }
  std::size_t steps() const noexcept { return samples_.rows() - 1; }
  std::size_t dim() const noexcept { return samples_.cols(); }
  double horizon() const noexcept { return dt_ * static_cast<double>(steps()); }

  std::span<const double> at(std::size_t k) const { return samples_.row(k); }
  const Matrix& samples() const noexcept { return samples_; }

  /// u(k0·dt + ·): drops the first k0 samples.
  SampledSignal shifted(std::size_t k0) const;
  /// Samples k0 .. k0 + steps.
  SampledSignal window(std::size_t k0, std::size_t steps) const;
  /// Zeroes every sample after index last (length unchanged).
  SampledSignal truncated_after(std::size_t last) const;

  /// max_k max_i |u_k[i]|
  double sup_norm() const;

  SampledSignal& operator+=(const SampledSignal& o);
  SampledSignal& operator-=(const SampledSignal& o);
  SampledSignal& operator*=(double s);
  friend SampledSignal operator+(SampledSignal a, const SampledSignal& b) {
    return a += b;
  }
  friend SampledSignal operator-(SampledSignal a, const SampledSignal& b) {
    return a -= b;
  }
  friend SampledSignal operator*(double s, SampledSignal a) { return a *= s; }

  /// Applies a fixed matrix to every sample (dimension m → rows(g)).
  SampledSignal mapped(const Matrix& g) const;

 private:
  double dt_;
  Matrix samples_;
};

/// Index k with t = k·dt; GridAlignmentError when t is off the grid.
std::size_t grid_index(double t, double dt);

/// One-step update x_{k+1} = phi x_k + next u_{k+1} + cur u_k + prev u_{k-1}
/// of ẋ = a x + b u under a hold; `first` applies to the step 0 → 1.
struct HeldStep {
  struct Weights {
    Matrix next, cur, prev;
  };
  Matrix phi;
  Weights first;
  Weights regular;
  Hold hold;
};

HeldStep discretize(const Matrix& a, const Matrix& b, double dt, Hold hold);

/// States x(k·dt), k = 0..u.steps(), as a signal of dimension a.rows().
SampledSignal state_trajectory(const Matrix& a, const Matrix& b,
                               std::span<const double> x0,
                               const SampledSignal& u, Hold hold);

/// x(t) = T(t) x0 + Φ(t) u.
Vector state_map(const StateSpaceSystem& sys, std::span<const double> x0,
                 const SampledSignal& u, double t,
                 Hold hold = Hold::zero_order);

/// F u on [0, horizon] from zero initial state.
SampledSignal io_map(const StateSpaceSystem& sys, const SampledSignal& u,
                     double horizon, Hold hold = Hold::zero_order);

/// Ψ x0 + F u on [0, horizon].
SampledSignal response(const StateSpaceSystem& sys,
                       std::span<const double> x0, const SampledSignal& u,
                       double horizon, Hold hold = Hold::zero_order);

/// Samples of C e^{Aσ} x0 on σ = k·dt ∈ [0, horizon].
SampledSignal observation_map(const StateSpaceSystem& sys,
                              std::span<const double> x0, double horizon,
                              double dt);

/// Closed loop under u = v + Γ y. Requires I - DΓ invertible
/// (AdmissibilityError otherwise):
///   A^Γ = A + BΓ(I-DΓ)⁻¹C,  B^Γ = B + BΓ(I-DΓ)⁻¹D,
///   C^Γ = (I-DΓ)⁻¹C,        D^Γ = (I-DΓ)⁻¹D.
StateSpaceSystem feedback_close(const StateSpaceSystem& sys,
                                const Matrix& gamma);

/// v = (I - F)⁻¹ w for a system with as many outputs as inputs, i.e. the
/// solution of v = w + F v, computed by forward substitution through the same
/// discrete map io_map uses.
SampledSignal identity_minus_io_inverse(const StateSpaceSystem& sys,
                                        const SampledSignal& w, Hold hold);

struct IdentityResidualReport {
  std::string identity;
  std::size_t trial = 0;
  double sup_residual = 0.0;
  double relative_residual = 0.0;
  double dt = 0.0;
  double horizon = 0.0;
};

struct PerturbationSuiteOptions {
  std::size_t max_state_dim = 5;
  std::size_t max_io_dim = 3;
  std::size_t trials = 20;
  std::uint64_t seed = 42;
  double dt = 1e-3;
  double horizon = 2.0;
  Hold hold = Hold::second_order;
  /// P is drawn with entries in [-1, 1], rescaled to ‖P‖ ≤ 1, then
  /// multiplied by this factor (0 gives P = 0).
  double perturbation_scale = 1.0;
  /// Use B = I and C = I (square n×n channels).
  bool identity_channels = false;
};

/// Both sides of, for random (A, B, C) and perturbations P:
///   frelation  F_{A+P,B,C}  = F_{A+P,I,C} F_{A,B,P} + F_{A,B,C}
///   teshu      F_{A+P,I,C}  = F_{A,I,C} (I - F_{A,I,P})⁻¹
///   main       F_{A+P,B,C}  = F_{A,I,C} (I - F_{A,I,P})⁻¹ F_{A,B,P} + F_{A,B,C}
///   phiab      Φ_{A+P,B}    = Φ_{A,I} (I - F_{A,I,P})⁻¹ F_{A,B,P} + Φ_{A,B}
/// Reports are ordered by trial, then identity, independent of threading.
std::vector<IdentityResidualReport> verify_perturbation_identities(
    const PerturbationSuiteOptions& options);

struct AxiomOptions {
  double dt = 1e-3;
  double t = 1.0;
  double tau = 1.0;
  std::size_t trials = 20;
  std::uint64_t seed = 7;
  bool zero_input = false;
  Hold hold = Hold::zero_order;
};

/// Residuals of the defining equations of a well-posed system:
///   control cocycle     Φ(t+τ)u = T(t)Φ(τ)u + Φ(t)u(τ+·)
///   observation shift   (Ψ(t+τ)x)(·) = (Ψ(t)T(τ)x)(· - τ) on [τ, t+τ]
///   io composition      (F(t+τ)u)(·) = (ΨΦ(τ)u + F(t)u(τ+·))(· - τ) on [τ, t+τ]
/// on random x and u (u ≡ 0 when zero_input).
std::vector<IdentityResidualReport> verify_system_axioms(
    const StateSpaceSystem& sys, const AxiomOptions& options);

}  // namespace delaylab
