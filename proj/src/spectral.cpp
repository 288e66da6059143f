#include "delaylab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include "json.hpp"

namespace delaylab {

namespace {

Vector cumulative_trapezoid(const Vector& v, double h) {
  Vector out(v.size(), 0.0);
  for (std::size_t j = 1; j < v.size(); ++j) {
    out[j] = out[j - 1] + 0.5 * h * (v[j - 1] + v[j]);
  }
  return out;
}

}  // namespace

CharacteristicEvaluator::CharacteristicEvaluator(const AgePopulationModel& model,
                                                 double margin)
    : model_(&model),
      lower_(-model.mu_inf() + margin),
      cum_mu_(cumulative_trapezoid(model.mu(), model.da())),
      cum_alpha_(cumulative_trapezoid(model.alpha(), model.da())) {
  if (!(margin > 0.0)) throw PreconditionError("domain margin must be positive");
}

void CharacteristicEvaluator::check_domain(double lambda) const {
  if (!(lambda >= lower_) || !std::isfinite(lambda)) {
    throw DomainError("λ = " + std::to_string(lambda) +
                      " is outside the domain λ > -μ∞ + margin = " +
                      std::to_string(lower_));
  }
}

Vector CharacteristicEvaluator::kernel_profile(double lambda) const {
  check_domain(lambda);
  const auto& m = *model_;
  const double delay_factor = std::exp(-lambda * m.r());
  Vector f(m.nodes());
  for (std::size_t j = 0; j < f.size(); ++j) {
    f[j] = std::exp(-(lambda * m.age(j) + cum_mu_[j] + delay_factor * cum_alpha_[j]));
  }
  return f;
}

double CharacteristicEvaluator::xi2(double lambda) const {
  const auto& m = *model_;
  if (m.law() != BirthLaw::point) {
    throw PreconditionError("xi2 needs a model with the point birth law");
  }
  const Vector f = kernel_profile(lambda);
  double s = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) s += m.age_weights()[j] * m.beta2()[j] * f[j];
  return -1.0 + std::exp(-lambda * m.r()) * s;
}

double CharacteristicEvaluator::xi1(double lambda) const {
  const auto& m = *model_;
  if (m.law() != BirthLaw::distributed) {
    throw PreconditionError("xi1 needs a model with the distributed birth law");
  }
  const Vector f = kernel_profile(lambda);
  const Matrix& beta = m.beta1();
  double total = 0.0;
  for (std::size_t d = 0; d < beta.rows(); ++d) {
    const auto row = beta.row(d);
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) s += m.age_weights()[j] * row[j] * f[j];
    total += m.history_weights()[d] * std::exp(-lambda * m.dt() * static_cast<double>(d)) * s;
  }
  return -1.0 + total;
}

double CharacteristicEvaluator::xi(double lambda) const {
  return model_->law() == BirthLaw::point ? xi2(lambda) : xi1(lambda);
}

double resolvent_kernel(const AgePopulationModel& model, double lambda,
                        std::size_t j) {
  if (j >= model.nodes()) throw PreconditionError("age node out of range");
  return CharacteristicEvaluator(model).kernel_profile(lambda)[j];
}

double xi1(const AgePopulationModel& model, double lambda) {
  return CharacteristicEvaluator(model).xi1(lambda);
}

double xi2(const AgePopulationModel& model, double lambda) {
  return CharacteristicEvaluator(model).xi2(lambda);
}

namespace {

double bisect(const CharacteristicEvaluator& ev, double lo, double hi) {
  double f_lo = ev.xi(lo);
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    const double fm = ev.xi(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (f_lo > 0.0)) {
      lo = mid;
      f_lo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::optional<double> dominant_real_root(const CharacteristicEvaluator& ev) {
  constexpr double kCap = 1e3;
  const double lo = ev.lower_bound();
  double hi = std::max(1.0, lo + 1.0);
  while (ev.xi(hi) > 0.0) {
    hi = lo + 2.0 * (hi - lo);
    if (hi > kCap) return std::nullopt;
  }

  // Monotone check on a coarse sweep; any increase means ξ may have several
  // zeros, and then the full scan below looks for the rightmost one.
  constexpr std::size_t kSweep = 64;
  std::vector<double> grid(kSweep + 1), values(kSweep + 1);
  bool monotone = true;
  for (std::size_t i = 0; i <= kSweep; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / kSweep;
    values[i] = ev.xi(grid[i]);
    if (i > 0 && values[i] > values[i - 1]) monotone = false;
  }

  if (monotone) {
    if (values[0] <= 0.0) return values[0] == 0.0 ? std::optional<double>(lo) : std::nullopt;
    for (std::size_t i = kSweep; i-- > 0;) {
      if (values[i] > 0.0) return bisect(ev, grid[i], grid[i + 1]);
    }
    return std::nullopt;
  }

  const auto cells = static_cast<std::size_t>(std::ceil((hi - lo) / 1e-2));
  double right = hi;
  double f_right = ev.xi(right);
  for (std::size_t i = cells; i-- > 0;) {
    const double left = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cells);
    const double f_left = ev.xi(left);
    if ((f_left > 0.0) != (f_right > 0.0)) return bisect(ev, left, right);
    right = left;
    f_right = f_left;
  }
  return std::nullopt;
}

std::string to_string(StabilityClass c) {
  switch (c) {
    case StabilityClass::stable:
      return "stable";
    case StabilityClass::critical:
      return "critical";
    case StabilityClass::unstable:
      return "unstable";
  }
  return "unknown";
}

std::string to_json(const SpectralReport& r) {
  nlohmann::ordered_json j;
  j["xi_at_zero"] = r.xi_at_zero;
  j["dominant_root"] = r.dominant_root ? nlohmann::ordered_json(*r.dominant_root)
                                       : nlohmann::ordered_json(nullptr);
  j["stability_class"] = to_string(r.stability_class);
  j["sufficient_condition_holds"] = r.sufficient_condition_holds;
  j["measured_growth"] = r.measured_growth ? nlohmann::ordered_json(*r.measured_growth)
                                           : nlohmann::ordered_json(nullptr);
  j["agreement"] = r.agreement ? nlohmann::ordered_json(*r.agreement)
                               : nlohmann::ordered_json(nullptr);
  return j.dump(2);
}

double sufficient_condition_value(const AgePopulationModel& model) {
  const Vector cum_mu = cumulative_trapezoid(model.mu(), model.da());
  double integral = 0.0;
  for (std::size_t j = 0; j < cum_mu.size(); ++j) {
    integral += model.age_weights()[j] * std::exp(-cum_mu[j]);
  }
  integral += std::exp(-cum_mu.back()) / model.mu_inf();
  return model.beta_sup() * integral;
}

SpectralReport classify_stability(const CharacteristicEvaluator& ev) {
  SpectralReport r;
  r.xi_at_zero = ev.xi(0.0);
  if (std::abs(r.xi_at_zero) <= kCriticalBand) {
    r.stability_class = StabilityClass::critical;
  } else {
    r.stability_class = r.xi_at_zero < 0.0 ? StabilityClass::stable : StabilityClass::unstable;
  }
  r.sufficient_condition_holds = sufficient_condition_value(ev.model()) < 1.0;
  r.dominant_root = dominant_real_root(ev);
  return r;
}

double critical_birth_scale(const AgePopulationModel& model) {
  const double birth_integral = CharacteristicEvaluator(model).xi(0.0) + 1.0;
  if (!(birth_integral > 0.0)) {
    throw PreconditionError("birth table is zero; no scaling reaches ξ(0) = 0");
  }
  return 1.0 / birth_integral;
}

double growth_rate_fit(const Trajectory& traj, double discard_fraction) {
  if (!(discard_fraction >= 0.0 && discard_fraction < 1.0)) {
    throw PreconditionError("discard_fraction must lie in [0, 1)");
  }
  const auto& t = traj.times;
  const auto& y = traj.total;
  if (t.size() < 2 || t.size() != y.size()) {
    throw FitError("trajectory too short for a growth fit");
  }
  const double start = t.front() + discard_fraction * (t.back() - t.front());
  double n = 0.0, st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < start) continue;
    if (!(y[i] > 0.0)) {
      throw FitError("total population is not positive at t = " + std::to_string(t[i]) +
                     "; the run decayed to roundoff or changed sign");
    }
    const double ly = std::log(y[i]);
    n += 1.0;
    st += t[i];
    sy += ly;
    stt += t[i] * t[i];
    sty += t[i] * ly;
  }
  if (n < 2.0) throw FitError("fit window holds fewer than two samples");
  // Centered form keeps the normal equations well conditioned at large t.
  const double tm = st / n, ym = sy / n;
  const double var = stt / n - tm * tm;
  if (!(var > 0.0)) throw FitError("fit window has no time spread");
  return (sty / n - tm * ym) / var;
}

SpectralReport cross_check(const AgePopulationModel& model,
                           const HistoryFunction& history, double t_max,
                           double discard_fraction, Execution ex) {
  const CharacteristicEvaluator ev(model);
  SpectralReport r = classify_stability(ev);
  const Trajectory tr = simulate(model, history, t_max, nullptr, {0, ex});
  r.measured_growth = growth_rate_fit(tr, discard_fraction);
  if (r.dominant_root) {
    r.agreement = std::abs(*r.measured_growth - *r.dominant_root) /
                  std::max(std::abs(*r.dominant_root), 0.05);
  }
  return r;
}

bool trichotomy_consistent(const SpectralReport& r) {
  if (!r.measured_growth) return false;
  const double g = *r.measured_growth;
  switch (r.stability_class) {
    case StabilityClass::critical:
      return std::abs(g) <= kMeasuredCriticalBand;
    case StabilityClass::stable:
      return g < 0.0;
    case StabilityClass::unstable:
      return g > 0.0;
  }
  return false;
}

}  // namespace delaylab
