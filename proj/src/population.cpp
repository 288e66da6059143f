#include "delaylab/population.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace delaylab {

Vector sample_ages(double a_max, std::size_t n_age,
                   const std::function<double(double)>& f) {
  if (n_age == 0) throw ConfigError("n_age must be at least 1");
  Vector out(n_age + 1);
  const double da = a_max / static_cast<double>(n_age);
  for (std::size_t j = 0; j <= n_age; ++j) out[j] = f(da * static_cast<double>(j));
  return out;
}

namespace {

void check_table(const Vector& v, std::size_t nodes, const char* name) {
  if (v.size() != nodes) {
    throw ConfigError(std::string(name) + " table has " + std::to_string(v.size()) +
                      " entries, expected n_age + 1 = " + std::to_string(nodes));
  }
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (!std::isfinite(v[j]) || v[j] < 0.0) {
      throw ConfigError(std::string(name) + " must be finite and nonnegative (entry " +
                        std::to_string(j) + " is " + std::to_string(v[j]) + ")");
    }
  }
}

Vector trapezoid_weights(std::size_t count, double h) {
  Vector w(count, h);
  if (count == 1) {
    w[0] = 0.0;
  } else {
    w.front() *= 0.5;
    w.back() *= 0.5;
  }
  return w;
}

}  // namespace

AgePopulationModel build_model(const ModelSpec& s) {
  if (!(s.a_max > 0.0) || !std::isfinite(s.a_max)) {
    throw ConfigError("a_max must be positive and finite");
  }
  if (s.n_age == 0) throw ConfigError("n_age must be at least 1");
  AgePopulationModel m;
  m.a_max_ = s.a_max;
  m.n_age_ = s.n_age;
  m.da_ = s.a_max / static_cast<double>(s.n_age);
  if (s.dt && std::abs(*s.dt - m.da_) > 1e-12 * m.da_) {
    throw ConfigError("dt = " + std::to_string(*s.dt) +
                      " must equal the age step a_max/n_age = " + std::to_string(m.da_));
  }
  if (!(s.r >= 0.0) || !std::isfinite(s.r)) {
    throw ConfigError("delay r must be finite and nonnegative");
  }
  const double ratio = s.r / m.da_;
  const double k = std::round(ratio);
  if (std::abs(ratio - k) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("delay r = " + std::to_string(s.r) +
                      " is not an integer multiple of dt = " + std::to_string(m.da_));
  }
  m.r_ = s.r;
  m.k_ = static_cast<std::size_t>(k);

  const std::size_t nodes = m.nodes();
  check_table(s.mu, nodes, "mu");
  check_table(s.alpha, nodes, "alpha");
  if (!s.eta.empty()) check_table(s.eta, nodes, "eta");
  m.mu_ = s.mu;
  m.alpha_ = s.alpha;
  m.eta_ = s.eta;
  m.mu_inf_ = s.mu_inf.value_or(s.mu.back());
  if (!(m.mu_inf_ > 0.0) || !std::isfinite(m.mu_inf_)) {
    throw ConfigError("mu_inf must be positive");
  }

  m.law_ = s.law;
  if (s.law == BirthLaw::point) {
    check_table(s.beta2, nodes, "beta2");
    m.beta2_ = s.beta2;
  } else {
    if (m.k_ == 0) throw ConfigError("the distributed birth law needs r > 0");
    if (s.beta1.rows() != m.k_ + 1 || s.beta1.cols() != nodes) {
      throw ConfigError("beta1 table is " + s.beta1.shape() + ", expected " +
                        std::to_string(m.k_ + 1) + "x" + std::to_string(nodes));
    }
    for (double b : s.beta1.data()) {
      if (!std::isfinite(b) || b < 0.0) {
        throw ConfigError("beta1 must be finite and nonnegative");
      }
    }
    m.beta1_ = s.beta1;
  }

  m.survival_.resize(nodes);
  for (std::size_t j = 0; j < nodes; ++j) m.survival_[j] = std::exp(-m.mu_[j] * m.da_);
  m.age_weights_ = trapezoid_weights(nodes, m.da_);
  m.history_weights_ = trapezoid_weights(m.k_ + 1, m.da_);
  return m;
}

double AgePopulationModel::beta_sup() const {
  if (law_ == BirthLaw::point) {
    return *std::max_element(beta2_.begin(), beta2_.end());
  }
  return max_abs(beta1_);
}

bool AgePopulationModel::positivity_step_ok() const {
  return da_ * *std::max_element(alpha_.begin(), alpha_.end()) <= 1.0;
}

std::span<const double> PopulationState::slot(std::size_t d) const {
  if (d >= slots_) throw PreconditionError("history slot out of range");
  return ring_.row(physical(d));
}

std::span<const double> PopulationState::harvest_slot(std::size_t d) const {
  if (harvest_ring_.empty()) return {};
  if (d >= slots_) throw PreconditionError("harvest slot out of range");
  return harvest_ring_.row(physical(d));
}

PopulationState initial_state(const AgePopulationModel& model,
                              const HistoryFunction& history,
                              const HarvestInput* harvest) {
  PopulationState s;
  s.slots_ = model.delay_steps() + 1;
  s.nodes_ = model.nodes();
  s.ring_ = Matrix(s.slots_, s.nodes_);
  for (std::size_t d = 0; d < s.slots_; ++d) {
    const double sigma = -model.dt() * static_cast<double>(d);
    auto row = s.ring_.row(d);
    for (std::size_t j = 0; j < s.nodes_; ++j) row[j] = history(sigma, model.age(j));
  }
  if (!s.ring_.all_finite()) throw ConfigError("initial history is not finite");
  if (harvest) {
    if (!model.harvesting()) {
      throw PreconditionError("harvest input given but the model has no eta table");
    }
    s.harvest_ring_ = Matrix(s.slots_, s.nodes_);
    for (std::size_t d = 0; d < s.slots_; ++d) {
      (*harvest)(-model.dt() * static_cast<double>(d), s.harvest_ring_.row(d));
    }
  }
  return s;
}

namespace {

// Birth sum and the weight the newest boundary node carries in it.
double birth_sum(const AgePopulationModel& model, std::span<const double> ring,
                 std::size_t slots, std::size_t head,
                 std::span<const double> oldest, Execution ex) {
  if (model.law() == BirthLaw::point) {
    return kernels::weighted_dot(ex, model.age_weights(), model.beta2(), oldest);
  }
  return kernels::weighted_double_sum(ex, model.history_weights(),
                                      model.age_weights(), model.beta1().data(),
                                      ring, slots, model.nodes(), head);
}

double self_weight(const AgePopulationModel& model) {
  if (model.law() == BirthLaw::point) {
    return model.delay_steps() == 0 ? model.age_weights()[0] * model.beta2()[0] : 0.0;
  }
  return model.history_weights()[0] * model.age_weights()[0] * model.beta1()(0, 0);
}

}  // namespace

double birth_eval(const AgePopulationModel& model, const PopulationState& state,
                  Execution ex) {
  return birth_sum(model, state.ring_.data(), state.slots_, state.head_,
                   state.slot(state.slots_ - 1), ex);
}

void step(const AgePopulationModel& model, PopulationState& s,
          const HarvestInput* harvest, Execution ex) {
  const std::size_t k = s.slots_ - 1;
  const std::size_t n = s.nodes_;
  const bool harvesting = !s.harvest_ring_.empty();
  if (harvest && !harvesting) {
    throw PreconditionError("harvest input given to a state built without one");
  }

  Vector next(n, 0.0);
  kernels::TransportStepArgs args{
      s.slot(0),
      s.slot(k),
      model.survival(),
      model.alpha(),
      harvesting ? s.harvest_slot(k) : std::span<const double>(),
      harvesting ? std::span<const double>(model.eta()) : std::span<const double>(),
      model.dt()};
  kernels::transport_step(ex, args, next);

  // The oldest row becomes the newest.
  const std::size_t row = s.physical(k);
  std::copy(next.begin(), next.end(), s.ring_.row(row).begin());
  s.head_ = row;
  ++s.step_count_;
  s.t_ = model.dt() * static_cast<double>(s.step_count_);
  if (harvesting) {
    auto q = s.harvest_ring_.row(row);
    if (harvest) {
      (*harvest)(s.t_, q);
    } else {
      std::fill(q.begin(), q.end(), 0.0);
    }
  }

  const double sum = birth_sum(model, s.ring_.data(), s.slots_, s.head_,
                               s.slot(k), ex);
  const double c = self_weight(model);
  if (!(c < 1.0)) {
    throw NumericRangeError("birth law weight on the newborn node is >= 1; refine the age grid");
  }
  s.ring_(row, 0) = sum / (1.0 - c);
}

double total_population(const AgePopulationModel& model,
                        std::span<const double> w) {
  const Vector& c = model.age_weights();
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += c[j] * w[j];
  return s;
}

Trajectory simulate(const AgePopulationModel& model,
                    const HistoryFunction& history, double t_max,
                    const HarvestInput* harvest,
                    const SimulationOptions& options) {
  if (!(t_max > model.r()) || !std::isfinite(t_max)) {
    throw PreconditionError("t_max must be finite and exceed the delay r");
  }
  const auto steps = static_cast<std::size_t>(std::floor(t_max / model.dt() + 1e-9));
  PopulationState state = initial_state(model, history, harvest);

  Trajectory tr;
  tr.times.reserve(steps + 1);
  tr.total.reserve(steps + 1);
  tr.birth.reserve(steps + 1);
  auto record = [&](std::size_t i) {
    const auto w = state.profile();
    tr.times.push_back(model.dt() * static_cast<double>(i));
    tr.total.push_back(total_population(model, w));
    tr.birth.push_back(w[0]);
    tr.min_value = std::min(tr.min_value, *std::min_element(w.begin(), w.end()));
    if (options.snapshot_stride && i % options.snapshot_stride == 0) {
      tr.snapshots.emplace_back(tr.times.back(), Vector(w.begin(), w.end()));
    }
  };
  {
    // Entries of the initial history count for the positivity monitor.
    tr.min_value = std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < state.slots(); ++d) {
      const auto w = state.slot(d);
      tr.min_value = std::min(tr.min_value, *std::min_element(w.begin(), w.end()));
    }
  }
  record(0);
  for (std::size_t i = 1; i <= steps; ++i) {
    step(model, state, harvest, options.execution);
    const auto w = state.profile();
    const double peak = *std::max_element(w.begin(), w.end(), [](double a, double b) {
      return std::abs(a) < std::abs(b);
    });
    if (!std::isfinite(peak) || std::abs(peak) > 1e300) {
      const double last = tr.times.back();
      throw OverflowError("population left the double range after t = " +
                              std::to_string(last) + "; shorten t_max",
                          last);
    }
    record(i);
  }
  const auto w = state.profile();
  tr.final_profile.assign(w.begin(), w.end());
  return tr;
}

namespace {

struct Probe {
  double c0, c1, omega, phase;  // s(t) = c0 + c1 sin(ω t + φ)
  double decay, kappa, psi;     // p(a) = e^{-decay·a} (1 + sin(κ a + ψ)/2)

  double time(double t) const { return c0 + c1 * std::sin(omega * t + phase); }
  double age(double a) const {
    return std::exp(-decay * a) * (1.0 + 0.5 * std::sin(kappa * a + psi));
  }
};

Probe make_probe(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 gen(seq);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Probe p{};
  p.c0 = 0.5 + u(gen);
  p.c1 = p.c0 * u(gen);
  p.omega = 0.5 + 2.5 * u(gen);
  p.phase = 2.0 * std::numbers::pi * u(gen);
  p.decay = 0.1 + 1.9 * u(gen);
  p.kappa = 0.5 + 2.5 * u(gen);
  p.psi = 2.0 * std::numbers::pi * u(gen);
  return p;
}

}  // namespace

GainEstimate input_gain(const AgePopulationModel& model, double t_max,
                        std::size_t probes, std::uint64_t seed) {
  if (probes == 0) throw PreconditionError("input_gain needs at least one probe");
  if (!model.harvesting()) return {};
  const auto steps = static_cast<std::size_t>(std::floor(t_max / model.dt() + 1e-9));
  const Vector time_weights = trapezoid_weights(steps + 1, model.dt());

  std::vector<double> gains(probes, 0.0);
  const auto count = static_cast<std::int64_t>(probes);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t ii = 0; ii < count; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const Probe p = make_probe(seed, i);
    const Vector profile = sample_ages(model.a_max(), model.n_age(),
                                       [&](double a) { return p.age(a); });
    const HarvestInput q = [&](double t, std::span<double> out) {
      const double s = p.time(t);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] = s * profile[j];
    };
    const Trajectory tr =
        simulate(model, [](double, double) { return 0.0; }, t_max, &q,
                 {0, Execution::serial});
    double w_norm = 0.0;
    for (std::size_t j = 0; j < tr.final_profile.size(); ++j) {
      w_norm += model.age_weights()[j] * std::abs(tr.final_profile[j]);
    }
    double time_norm = 0.0;
    for (std::size_t m = 0; m <= steps; ++m) {
      time_norm += time_weights[m] *
                   std::abs(p.time(-model.r() + model.dt() * static_cast<double>(m)));
    }
    double age_norm = 0.0;
    for (std::size_t j = 0; j < profile.size(); ++j) {
      age_norm += model.age_weights()[j] * std::abs(profile[j]);
    }
    gains[i] = w_norm / (time_norm * age_norm);
  }
  GainEstimate best;
  for (std::size_t i = 0; i < probes; ++i) {
    if (gains[i] > best.gain) best = {gains[i], i};
  }
  return best;
}

}  // namespace delaylab
