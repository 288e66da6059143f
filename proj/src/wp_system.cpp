#include "delaylab/wp_system.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>

namespace delaylab {

StateSpaceSystem::StateSpaceSystem(Matrix a, Matrix b, Matrix c, Matrix d)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)) {
  const std::size_t n = a_.rows();
  if (!a_.is_square() || b_.rows() != n || c_.cols() != n ||
      d_.rows() != c_.rows() || d_.cols() != b_.cols()) {
    throw DimensionError("non-conformable system: A " + a_.shape() + ", B " +
                         b_.shape() + ", C " + c_.shape() + ", D " +
                         d_.shape());
  }
}

StateSpaceSystem StateSpaceSystem::without_feedthrough(Matrix a, Matrix b,
                                                       Matrix c) {
  Matrix d(c.rows(), b.cols());
  return StateSpaceSystem(std::move(a), std::move(b), std::move(c),
                          std::move(d));
}

SampledSignal::SampledSignal(double dt, Matrix samples)
    : dt_(dt), samples_(std::move(samples)) {
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) {
    throw PreconditionError("signal step dt must be positive and finite");
  }
  if (samples_.rows() == 0) throw PreconditionError("signal has no samples");
  if (!samples_.all_finite()) throw NumericRangeError("signal sample is not finite");
}

SampledSignal SampledSignal::zeros(double dt, std::size_t steps,
                                   std::size_t dim) {
  return SampledSignal(dt, Matrix(steps + 1, dim));
}

SampledSignal SampledSignal::from_function(
    double dt, std::size_t steps, std::size_t dim,
    const std::function<void(double, std::span<double>)>& f) {
  Matrix m(steps + 1, dim);
  for (std::size_t k = 0; k <= steps; ++k) {
    f(dt * static_cast<double>(k), m.row(k));
  }
  return SampledSignal(dt, std::move(m));
}

SampledSignal SampledSignal::shifted(std::size_t k0) const {
  if (k0 > steps()) throw GridAlignmentError("shift beyond signal horizon");
  return window(k0, steps() - k0);
}

SampledSignal SampledSignal::window(std::size_t k0, std::size_t count) const {
  if (k0 + count > steps()) throw GridAlignmentError("window beyond signal horizon");
  return SampledSignal(dt_, samples_.block(k0, 0, count + 1, dim()));
}

SampledSignal SampledSignal::truncated_after(std::size_t last) const {
  Matrix m = samples_;
  for (std::size_t k = last + 1; k < m.rows(); ++k)
    for (double& x : m.row(k)) x = 0.0;
  return SampledSignal(dt_, std::move(m));
}

double SampledSignal::sup_norm() const { return max_abs(samples_); }

SampledSignal& SampledSignal::operator+=(const SampledSignal& o) {
  if (o.dt_ != dt_) throw GridAlignmentError("adding signals on different grids");
  samples_ += o.samples_;
  return *this;
}

SampledSignal& SampledSignal::operator-=(const SampledSignal& o) {
  if (o.dt_ != dt_) throw GridAlignmentError("subtracting signals on different grids");
  samples_ -= o.samples_;
  return *this;
}

SampledSignal& SampledSignal::operator*=(double s) {
  samples_ *= s;
  return *this;
}

SampledSignal SampledSignal::mapped(const Matrix& g) const {
  return SampledSignal(dt_, samples_ * g.transpose());
}

std::size_t grid_index(double t, double dt) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw GridAlignmentError("time must be finite and nonnegative");
  }
  const double k = std::round(t / dt);
  if (std::abs(k * dt - t) > 1e-9 * std::max(1.0, std::abs(t))) {
    throw GridAlignmentError("time " + std::to_string(t) +
                             " is not a multiple of dt = " + std::to_string(dt));
  }
  return static_cast<std::size_t>(k);
}

HeldStep discretize(const Matrix& a, const Matrix& b, double dt, Hold hold) {
  const std::size_t order = hold == Hold::zero_order    ? 0
                            : hold == Hold::first_order ? 1
                                                        : 2;
  const PolynomialHold ph = hold_discretize(a, b, dt, order);
  HeldStep s{ph.phi, {}, {}, hold};
  switch (hold) {
    case Hold::zero_order:
      s.first.cur = ph.gamma[0];
      break;
    case Hold::first_order:
    case Hold::second_order:
      // u(τ) = u_k + τ (u_{k+1} - u_k)
      s.first.next = ph.gamma[1];
      s.first.cur = ph.gamma[0] - ph.gamma[1];
      break;
  }
  if (hold == Hold::second_order) {
    // u(τ) = u_k + τ (u_{k+1} - u_{k-1})/2 + τ² (u_{k+1} - 2u_k + u_{k-1})/2
    const Matrix half_g1 = 0.5 * ph.gamma[1];
    s.regular.next = half_g1 + ph.gamma[2];
    s.regular.cur = ph.gamma[0] - 2.0 * ph.gamma[2];
    s.regular.prev = ph.gamma[2] - half_g1;
  } else {
    s.regular = s.first;
  }
  return s;
}

namespace {

void accumulate(Vector& x, const Matrix& g, std::span<const double> u) {
  if (g.empty()) return;
  const Vector gu = mat_vec(g, u);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += gu[i];
}

// x_{k+1} without the u_{k+1} term.
Vector step_base(const HeldStep& s, std::span<const double> x,
                 const Matrix& u, std::size_t k) {
  const auto& w = k == 0 ? s.first : s.regular;
  Vector next = mat_vec(s.phi, x);
  accumulate(next, w.cur, u.row(k));
  if (k > 0) accumulate(next, w.prev, u.row(k - 1));
  return next;
}

void check_input_dim(const SampledSignal& u, std::size_t expected) {
  if (u.dim() != expected) {
    throw DimensionError("signal dimension " + std::to_string(u.dim()) +
                         " does not match " + std::to_string(expected) +
                         " inputs");
  }
}

void check_state_dim(std::span<const double> x0, std::size_t n) {
  if (x0.size() != n) {
    throw DimensionError("initial state has length " +
                         std::to_string(x0.size()) + ", expected " +
                         std::to_string(n));
  }
}

std::size_t horizon_steps(const SampledSignal& u, double horizon) {
  const std::size_t k = grid_index(horizon, u.dt());
  if (k > u.steps()) {
    throw GridAlignmentError("horizon exceeds the input signal");
  }
  return k;
}

}  // namespace

SampledSignal state_trajectory(const Matrix& a, const Matrix& b,
                               std::span<const double> x0,
                               const SampledSignal& u, Hold hold) {
  check_state_dim(x0, a.rows());
  check_input_dim(u, b.cols());
  const HeldStep s = discretize(a, b, u.dt(), hold);
  Matrix xs(u.size(), a.rows());
  Vector x(x0.begin(), x0.end());
  std::copy(x.begin(), x.end(), xs.row(0).begin());
  for (std::size_t k = 0; k + 1 < u.size(); ++k) {
    x = step_base(s, x, u.samples(), k);
    accumulate(x, (k == 0 ? s.first : s.regular).next, u.at(k + 1));
    std::copy(x.begin(), x.end(), xs.row(k + 1).begin());
  }
  return SampledSignal(u.dt(), std::move(xs));
}

Vector state_map(const StateSpaceSystem& sys, std::span<const double> x0,
                 const SampledSignal& u, double t, Hold hold) {
  check_state_dim(x0, sys.states());
  check_input_dim(u, sys.inputs());
  const std::size_t k = horizon_steps(u, t);
  const SampledSignal xs =
      state_trajectory(sys.a(), sys.b(), x0, u.window(0, k), hold);
  const auto last = xs.at(k);
  return Vector(last.begin(), last.end());
}

SampledSignal response(const StateSpaceSystem& sys,
                       std::span<const double> x0, const SampledSignal& u,
                       double horizon, Hold hold) {
  check_input_dim(u, sys.inputs());
  const std::size_t k = horizon_steps(u, horizon);
  const SampledSignal uk = u.window(0, k);
  const SampledSignal xs = state_trajectory(sys.a(), sys.b(), x0, uk, hold);
  return xs.mapped(sys.c()) + uk.mapped(sys.d());
}

SampledSignal io_map(const StateSpaceSystem& sys, const SampledSignal& u,
                     double horizon, Hold hold) {
  const Vector x0(sys.states(), 0.0);
  return response(sys, x0, u, horizon, hold);
}

SampledSignal observation_map(const StateSpaceSystem& sys,
                              std::span<const double> x0, double horizon,
                              double dt) {
  check_state_dim(x0, sys.states());
  if (!(dt > 0.0)) throw PreconditionError("observation_map: dt must be positive");
  const std::size_t steps = grid_index(horizon, dt);
  const Matrix ad = mat_exp(sys.a(), dt);
  Matrix ys(steps + 1, sys.outputs());
  Vector x(x0.begin(), x0.end());
  for (std::size_t k = 0; k <= steps; ++k) {
    if (k > 0) x = mat_vec(ad, x);
    const Vector y = mat_vec(sys.c(), x);
    std::copy(y.begin(), y.end(), ys.row(k).begin());
  }
  return SampledSignal(dt, std::move(ys));
}

StateSpaceSystem feedback_close(const StateSpaceSystem& sys,
                                const Matrix& gamma) {
  if (gamma.rows() != sys.inputs() || gamma.cols() != sys.outputs()) {
    throw DimensionError("feedback operator must be " +
                         std::to_string(sys.inputs()) + "x" +
                         std::to_string(sys.outputs()) + ", got " +
                         gamma.shape());
  }
  const Matrix loop = Matrix::identity(sys.outputs()) - sys.d() * gamma;
  std::optional<LuFactorization<double>> lu;
  try {
    lu.emplace(loop);
  } catch (const SingularMatrixError& e) {
    throw AdmissibilityError(
        std::string("I - DΓ is singular; Γ is not an admissible feedback "
                    "operator (") +
        e.what() + ")");
  }
  const Matrix c_closed = lu->solve(sys.c());  // (I-DΓ)⁻¹C
  const Matrix d_closed = lu->solve(sys.d());  // (I-DΓ)⁻¹D
  const Matrix b_gamma = sys.b() * gamma;
  return StateSpaceSystem(sys.a() + b_gamma * c_closed,
                          sys.b() + b_gamma * d_closed, c_closed, d_closed);
}

SampledSignal identity_minus_io_inverse(const StateSpaceSystem& sys,
                                        const SampledSignal& w, Hold hold) {
  if (sys.inputs() != sys.outputs()) {
    throw DimensionError("(I - F)⁻¹ needs as many outputs as inputs");
  }
  check_input_dim(w, sys.inputs());
  const std::size_t m = sys.inputs();
  const HeldStep s = discretize(sys.a(), sys.b(), w.dt(), hold);
  const Matrix eye = Matrix::identity(m);

  auto factor = [&](const Matrix& next) {
    Matrix lhs = eye - sys.d();
    if (!next.empty()) lhs -= sys.c() * next;
    try {
      return LuFactorization<double>(lhs);
    } catch (const SingularMatrixError& e) {
      throw AdmissibilityError(std::string("I - F is not invertible on this grid (") +
                               e.what() + ")");
    }
  };
  const auto lu0 = factor(Matrix());
  const auto lu_first = factor(s.first.next);
  const auto lu_regular = factor(s.regular.next);

  Matrix vs(w.size(), m);
  Vector x(sys.states(), 0.0);
  {
    const Vector v0 = lu0.solve(w.at(0));
    std::copy(v0.begin(), v0.end(), vs.row(0).begin());
  }
  for (std::size_t k = 0; k + 1 < w.size(); ++k) {
    // Rows 0..k of vs are filled, which is all step_base reads.
    Vector base = step_base(s, x, vs, k);
    Vector rhs = mat_vec(sys.c(), base);
    const auto wk = w.at(k + 1);
    for (std::size_t i = 0; i < m; ++i) rhs[i] += wk[i];
    const Vector v = (k == 0 ? lu_first : lu_regular).solve(rhs);
    std::copy(v.begin(), v.end(), vs.row(k + 1).begin());
    accumulate(base, (k == 0 ? s.first : s.regular).next, v);
    x = std::move(base);
  }
  return SampledSignal(w.dt(), std::move(vs));
}

namespace {

Matrix random_matrix(std::mt19937_64& gen, std::size_t rows, std::size_t cols) {
  std::uniform_real_distribution<double> entry(-1.0, 1.0);
  Matrix m(rows, cols);
  for (double& x : m.data()) x = entry(gen);
  return m;
}

double spectral_norm_bound(const Matrix& m) {
  // ‖m‖₂ ≤ sqrt(‖m‖₁ ‖m‖∞)
  return std::sqrt(norm_one(m) * norm_inf(m));
}

/// Each channel a sum of three sinusoids with ω ∈ [0.5, 3].
SampledSignal smooth_random_signal(std::mt19937_64& gen, double dt,
                                   std::size_t steps, std::size_t dim) {
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  std::uniform_real_distribution<double> freq(0.5, 3.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  struct Wave {
    double a, w, p;
  };
  std::vector<Wave> waves(3 * dim);
  for (auto& wv : waves) wv = {amp(gen), freq(gen), phase(gen)};
  return SampledSignal::from_function(
      dt, steps, dim, [&](double t, std::span<double> out) {
        for (std::size_t i = 0; i < dim; ++i) {
          double v = 0.0;
          for (std::size_t j = 0; j < 3; ++j) {
            const Wave& wv = waves[3 * i + j];
            v += wv.a * std::sin(wv.w * t + wv.p);
          }
          out[i] = v;
        }
      });
}

IdentityResidualReport compare(std::string name, std::size_t trial,
                               const SampledSignal& lhs,
                               const SampledSignal& rhs) {
  const double diff = (lhs - rhs).sup_norm();
  const double scale = lhs.sup_norm();
  return {std::move(name), trial, diff, scale > 0.0 ? diff / scale : diff,
          lhs.dt(), lhs.horizon()};
}

std::seed_seq trial_seed(std::uint64_t seed, std::size_t trial) {
  return std::seed_seq{static_cast<std::uint32_t>(seed),
                       static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(trial)};
}

}  // namespace

std::vector<IdentityResidualReport> verify_perturbation_identities(
    const PerturbationSuiteOptions& o) {
  if (o.trials == 0) throw PreconditionError("trials must be positive");
  if (o.max_state_dim == 0 || o.max_io_dim == 0) {
    throw PreconditionError("dimensions must be positive");
  }
  if (!(o.dt > 0.0) || !(o.horizon > 0.0)) {
    throw PreconditionError("dt and horizon must be positive");
  }
  const std::size_t steps = grid_index(o.horizon, o.dt);
  constexpr std::size_t kIdentities = 4;
  std::vector<IdentityResidualReport> out(o.trials * kIdentities);
  std::vector<std::string> failures(o.trials);

  const auto trials = static_cast<std::int64_t>(o.trials);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t tt = 0; tt < trials; ++tt) {
    const auto trial = static_cast<std::size_t>(tt);
    try {
      auto seq = trial_seed(o.seed, trial);
      std::mt19937_64 gen(seq);
      std::uniform_int_distribution<std::size_t> state_dim(1, o.max_state_dim);
      std::uniform_int_distribution<std::size_t> io_dim(1, o.max_io_dim);
      const std::size_t n = state_dim(gen);
      const std::size_t m = o.identity_channels ? n : io_dim(gen);
      const std::size_t p = o.identity_channels ? n : io_dim(gen);

      const Matrix a = random_matrix(gen, n, n);
      const Matrix b = o.identity_channels ? Matrix::identity(n) : random_matrix(gen, n, m);
      const Matrix c = o.identity_channels ? Matrix::identity(n) : random_matrix(gen, p, n);
      Matrix pert = random_matrix(gen, n, n);
      pert *= o.perturbation_scale / std::max(1.0, spectral_norm_bound(pert));
      const Matrix eye = Matrix::identity(n);
      const Matrix a_pert = a + pert;

      const SampledSignal u = smooth_random_signal(gen, o.dt, steps, m);
      const SampledSignal w = smooth_random_signal(gen, o.dt, steps, n);

      using S = StateSpaceSystem;
      const auto pert_sys = S::without_feedthrough(a, b, pert);     // (A, B, P)
      const auto loop_sys = S::without_feedthrough(a, eye, pert);   // (A, I, P)
      const auto base_sys = S::without_feedthrough(a, b, c);        // (A, B, C)
      const auto obs_sys = S::without_feedthrough(a, eye, c);       // (A, I, C)
      const auto target = S::without_feedthrough(a_pert, b, c);     // (A+P, B, C)
      const auto target_i = S::without_feedthrough(a_pert, eye, c); // (A+P, I, C)

      const double h = o.horizon;
      const SampledSignal fu = io_map(base_sys, u, h, o.hold);
      const SampledSignal v = io_map(pert_sys, u, h, o.hold);
      const SampledSignal loop_v = identity_minus_io_inverse(loop_sys, v, o.hold);
      const SampledSignal lhs = io_map(target, u, h, o.hold);

      auto* r = &out[trial * kIdentities];
      r[0] = compare("frelation", trial, lhs, io_map(target_i, v, h, o.hold) + fu);
      r[1] = compare("teshu", trial, io_map(target_i, w, h, o.hold),
                     io_map(obs_sys, identity_minus_io_inverse(loop_sys, w, o.hold),
                            h, o.hold));
      r[2] = compare("main", trial, lhs, io_map(obs_sys, loop_v, h, o.hold) + fu);
      const Vector x0(n, 0.0);
      r[3] = compare("phiab", trial, state_trajectory(a_pert, b, x0, u, o.hold),
                     state_trajectory(a, eye, x0, loop_v, o.hold) +
                         state_trajectory(a, b, x0, u, o.hold));
    } catch (const std::exception& e) {
      failures[trial] = e.what();
    }
  }
  for (std::size_t t = 0; t < o.trials; ++t) {
    if (!failures[t].empty()) {
      throw NumericRangeError("identity trial " + std::to_string(t) +
                              " failed: " + failures[t]);
    }
  }
  return out;
}

std::vector<IdentityResidualReport> verify_system_axioms(
    const StateSpaceSystem& sys, const AxiomOptions& o) {
  if (!(o.dt > 0.0)) throw PreconditionError("dt must be positive");
  const std::size_t kt = grid_index(o.t, o.dt);
  const std::size_t ktau = grid_index(o.tau, o.dt);
  const double total = o.dt * static_cast<double>(kt + ktau);
  const Matrix t_t = mat_exp(sys.a(), o.t);
  const Matrix t_tau = mat_exp(sys.a(), o.tau);
  const Vector zero_state(sys.states(), 0.0);

  std::vector<IdentityResidualReport> out;
  for (std::size_t trial = 0; trial < o.trials; ++trial) {
    auto seq = trial_seed(o.seed, trial);
    std::mt19937_64 gen(seq);
    std::uniform_real_distribution<double> entry(-1.0, 1.0);
    Vector x(sys.states());
    for (double& xi : x) xi = entry(gen);
    SampledSignal u = smooth_random_signal(gen, o.dt, kt + ktau, sys.inputs());
    if (o.zero_input) u *= 0.0;
    const SampledSignal u_tail = u.shifted(ktau);

    // Φ(t+τ)u = T(t)Φ(τ)u + Φ(t)u(τ+·)
    {
      const Vector lhs = state_map(sys, zero_state, u, total, o.hold);
      Vector rhs = mat_vec(t_t, state_map(sys, zero_state, u, o.tau, o.hold));
      const Vector tail = state_map(sys, zero_state, u_tail, o.t, o.hold);
      for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += tail[i];
      const std::size_t n = lhs.size();
      out.push_back(compare("control_cocycle", trial,
                            SampledSignal(o.dt, Matrix(1, n, lhs)),
                            SampledSignal(o.dt, Matrix(1, n, rhs))));
      out.back().horizon = total;
    }
    // Ψ(t+τ)x restricted to [τ, t+τ] = Ψ(t)T(τ)x
    {
      const SampledSignal lhs = observation_map(sys, x, total, o.dt).window(ktau, kt);
      const SampledSignal rhs = observation_map(sys, mat_vec(t_tau, x), o.t, o.dt);
      out.push_back(compare("observation_shift", trial, lhs, rhs));
    }
    // F(t+τ)u restricted to [τ, t+τ] = Ψ(t)Φ(τ)u + F(t)u(τ+·)
    {
      const SampledSignal lhs = io_map(sys, u, total, o.hold).window(ktau, kt);
      const Vector mid = state_map(sys, zero_state, u, o.tau, o.hold);
      const SampledSignal rhs = observation_map(sys, mid, o.t, o.dt) +
                                io_map(sys, u_tail, o.t, o.hold);
      out.push_back(compare("io_composition", trial, lhs, rhs));
    }
  }
  return out;
}

}  // namespace delaylab
