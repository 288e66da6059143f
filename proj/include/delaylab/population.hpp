#pragma once

// Linear age-structured population with delays:
//
//   ∂w/∂t + ∂w/∂a = -μ(a) w(t,a) - α(a) w(t-r,a) - η(a) q(t-r,a)
//   w(t,0) = B(t)
//
// with one of the birth laws
//
//   B1:  B(t) = ∫_0^{a_max} ∫_{-r}^0 β1(σ,a) w(t+σ,a) dσ da
//   B2:  B(t) = ∫_0^{a_max} β2(a) w(t-r,a) da
//
// solved along characteristics with dt = Δa, so transport is an index shift.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "delaylab/kernels.hpp"
#include "delaylab/matrix.hpp"

namespace delaylab {

using kernels::Execution;

enum class BirthLaw {
  distributed,  // B1: β1(σ, a) over the history window
  point,        // B2: β2(a) at t - r
};

/// Unvalidated model description. Tables are sampled on the age nodes
/// a_j = j·a_max/n_age, j = 0..n_age.
struct ModelSpec {
  double a_max = 0.0;
  std::size_t n_age = 0;
  std::optional<double> dt;  // must equal a_max/n_age when given
  double r = 0.0;
  Vector mu;
  Vector alpha;
  Vector eta;  // empty: no harvesting channel
  std::optional<double> mu_inf;  // default: mu at a_max
  BirthLaw law = BirthLaw::point;
  Vector beta2;  // point law, n_age + 1 entries
  Matrix beta1;  // distributed law, (r/dt + 1) × (n_age + 1); row d is σ = -d·dt
};

/// f sampled on the age nodes of a grid with n_age cells on [0, a_max].
Vector sample_ages(double a_max, std::size_t n_age,
                   const std::function<double(double)>& f);

class AgePopulationModel {
 public:
  double a_max() const noexcept { return a_max_; }
  std::size_t n_age() const noexcept { return n_age_; }
  std::size_t nodes() const noexcept { return n_age_ + 1; }
  double da() const noexcept { return da_; }
  double dt() const noexcept { return da_; }
  double r() const noexcept { return r_; }
  /// r/dt: history slots beyond the current profile.
  std::size_t delay_steps() const noexcept { return k_; }
  double age(std::size_t j) const noexcept { return da_ * static_cast<double>(j); }

  const Vector& mu() const noexcept { return mu_; }
  const Vector& alpha() const noexcept { return alpha_; }
  const Vector& eta() const noexcept { return eta_; }
  double mu_inf() const noexcept { return mu_inf_; }
  BirthLaw law() const noexcept { return law_; }
  const Vector& beta2() const noexcept { return beta2_; }
  const Matrix& beta1() const noexcept { return beta1_; }
  bool harvesting() const noexcept { return !eta_.empty(); }

  /// exp(-μ_j dt).
  const Vector& survival() const noexcept { return survival_; }
  /// Trapezoid weights on the age grid.
  const Vector& age_weights() const noexcept { return age_weights_; }
  /// Trapezoid weights on the history window σ = -d·dt, d = 0..k.
  const Vector& history_weights() const noexcept { return history_weights_; }

  /// sup_a β(σ, a) over the birth table.
  double beta_sup() const;
  /// dt·max α ≤ 1, the step restriction under which the scheme is positive.
  bool positivity_step_ok() const;

 private:
  friend AgePopulationModel build_model(const ModelSpec& spec);
  AgePopulationModel() = default;

  double a_max_ = 0.0;
  std::size_t n_age_ = 0;
  double da_ = 0.0;
  double r_ = 0.0;
  std::size_t k_ = 0;
  Vector mu_, alpha_, eta_;
  double mu_inf_ = 0.0;
  BirthLaw law_ = BirthLaw::point;
  Vector beta2_;
  Matrix beta1_;
  Vector survival_, age_weights_, history_weights_;
};

/// Validates the model description; ConfigError on any violated invariant.
AgePopulationModel build_model(const ModelSpec& spec);

/// φ(s, a) for s ∈ [-r, 0].
using HistoryFunction = std::function<double(double s, double a)>;
/// q(t, a) for t ≥ -r, written into an age-node profile.
using HarvestInput = std::function<void(double t, std::span<double> out)>;

class PopulationState {
 public:
  double t() const noexcept { return t_; }
  /// w(t - d·dt, ·), d = 0..k.
  std::span<const double> slot(std::size_t d) const;
  std::span<const double> profile() const { return slot(0); }
  /// q(t - d·dt, ·), d = 0..k; empty without harvesting.
  std::span<const double> harvest_slot(std::size_t d) const;
  std::size_t slots() const noexcept { return slots_; }

 private:
  friend PopulationState initial_state(const AgePopulationModel&,
                                       const HistoryFunction&,
                                       const HarvestInput*);
  friend void step(const AgePopulationModel&, PopulationState&,
                   const HarvestInput*, Execution);
  friend double birth_eval(const AgePopulationModel&, const PopulationState&,
                           Execution);

  std::size_t physical(std::size_t d) const noexcept {
    return (head_ + d) % slots_;
  }

  double t_ = 0.0;
  std::size_t step_count_ = 0;
  std::size_t slots_ = 0;
  std::size_t nodes_ = 0;
  std::size_t head_ = 0;  // physical row of slot 0
  Matrix ring_;
  Matrix harvest_ring_;
};

/// History ring filled from φ at s = -d·dt; harvest ring from q when given.
PopulationState initial_state(const AgePopulationModel& model,
                              const HistoryFunction& history,
                              const HarvestInput* harvest = nullptr);

/// Birth integral over the current ring (B1: trapezoid in σ and a, B2:
/// trapezoid in a at the oldest slot).
double birth_eval(const AgePopulationModel& model, const PopulationState& state,
                  Execution ex = Execution::parallel);

/// One dt step along characteristics; the new boundary value solves the birth
/// law including its own quadrature weight.
void step(const AgePopulationModel& model, PopulationState& state,
          const HarvestInput* harvest = nullptr,
          Execution ex = Execution::parallel);

/// ∫ w da by the trapezoid rule (signed, so the map stays linear).
double total_population(const AgePopulationModel& model,
                        std::span<const double> w);

struct Trajectory {
  std::vector<double> times;
  std::vector<double> total;
  std::vector<double> birth;
  std::vector<std::pair<double, Vector>> snapshots;
  /// Smallest profile entry seen over the run (positivity monitor).
  double min_value = 0.0;
  Vector final_profile;
};

struct SimulationOptions {
  std::size_t snapshot_stride = 0;  // 0: no snapshots
  Execution execution = Execution::parallel;
};

/// Steps from t = 0 to t_max (rounded down to the grid). OverflowError with
/// the last finite time when the total leaves the double range.
Trajectory simulate(const AgePopulationModel& model,
                    const HistoryFunction& history, double t_max,
                    const HarvestInput* harvest = nullptr,
                    const SimulationOptions& options = {});

struct GainEstimate {
  double gain = 0.0;
  std::size_t probe = 0;  // index of the probe attaining the sup
};

/// sup over seeded nonnegative separable probes q(t,a) = s(t)·p(a) of
/// ‖w(t_max)‖_{L¹} / ‖q‖_{L¹([-r, t_max - r] × [0, a_max])} from zero history.
/// Probe i depends only on (seed, i), so a larger probe count never lowers the
/// estimate.
GainEstimate input_gain(const AgePopulationModel& model, double t_max,
                        std::size_t probes, std::uint64_t seed = 1);

}  // namespace delaylab
