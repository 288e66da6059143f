#pragma once

// Characteristic functions of the delayed population generator, for real
// λ > -μ∞:
//
//   f(a)  = exp(-∫_0^a (λ + μ(s) + e^{-λr} α(s)) ds)
//   ξ1(λ) = -1 + ∫_0^{a_max} ∫_{-r}^0 β1(σ,a) e^{λσ} f(a) dσ da
//   ξ2(λ) = -1 + e^{-λr} ∫_0^{a_max} β2(a) f(a) da
//
// λ is in the spectrum iff ξ(λ) = 0, and the sign of ξ(0) decides stability.
// All integrals are trapezoid sums on the model's own age and history grids.

#include <optional>
#include <string>

#include "delaylab/population.hpp"

namespace delaylab {

class CharacteristicEvaluator {
 public:
  /// Keeps a reference to model.
  explicit CharacteristicEvaluator(const AgePopulationModel& model,
                                   double margin = 1e-6);

  const AgePopulationModel& model() const noexcept { return *model_; }
  /// Smallest admissible λ: -μ∞ + margin.
  double lower_bound() const noexcept { return lower_; }

  /// f(a_j) on every age node.
  Vector kernel_profile(double lambda) const;
  /// ξ1 or ξ2 according to the model's birth law.
  double xi(double lambda) const;
  double xi1(double lambda) const;
  double xi2(double lambda) const;

 private:
  void check_domain(double lambda) const;

  const AgePopulationModel* model_;
  double lower_;
  Vector cum_mu_;     // ∫_0^{a_j} μ
  Vector cum_alpha_;  // ∫_0^{a_j} α
};

/// f(a_j) for a single node j.
double resolvent_kernel(const AgePopulationModel& model, double lambda,
                        std::size_t j);
double xi1(const AgePopulationModel& model, double lambda);
double xi2(const AgePopulationModel& model, double lambda);

/// Largest real zero of ξ above -μ∞ located by bracket expansion and
/// bisection to 1e-10; nullopt when ξ < 0 on the whole domain. A detected
/// loss of monotonicity switches to a full scan of the bracket.
std::optional<double> dominant_real_root(const CharacteristicEvaluator& ev);

enum class StabilityClass { stable, critical, unstable };

std::string to_string(StabilityClass c);

struct SpectralReport {
  double xi_at_zero = 0.0;
  std::optional<double> dominant_root;
  StabilityClass stability_class = StabilityClass::stable;
  bool sufficient_condition_holds = false;
  std::optional<double> measured_growth;
  std::optional<double> agreement;
};

/// Round-trip precision JSON with keys xi_at_zero, dominant_root,
/// stability_class, sufficient_condition_holds, measured_growth, agreement.
std::string to_json(const SpectralReport& report);

inline constexpr double kCriticalBand = 1e-9;
inline constexpr double kMeasuredCriticalBand = 0.02;

/// ‖β‖∞ · ∫_0^∞ exp(-∫_0^a μ) da, with μ = μ∞ beyond a_max.
double sufficient_condition_value(const AgePopulationModel& model);

/// ξ(0), its class (critical band 1e-9), the sufficient condition, and the
/// dominant root.
SpectralReport classify_stability(const CharacteristicEvaluator& ev);

/// Factor c such that scaling the birth table by c makes ξ(0) = 0 on this
/// grid (ξ(0) + 1 is linear in β).
double critical_birth_scale(const AgePopulationModel& model);

/// Least-squares slope of log(total) over times t ≥ t_0 + discard·(t_end - t_0).
double growth_rate_fit(const Trajectory& traj, double discard_fraction);

/// classify_stability plus a simulation from `history`; agreement is
/// |measured - root| / max(|root|, 0.05) when a root exists.
SpectralReport cross_check(const AgePopulationModel& model,
                           const HistoryFunction& history, double t_max,
                           double discard_fraction,
                           Execution ex = Execution::parallel);

/// Sign of the measured growth matches ξ(0); critical cases need
/// |measured| ≤ kMeasuredCriticalBand.
bool trichotomy_consistent(const SpectralReport& report);

}  // namespace delaylab
