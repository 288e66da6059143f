#include <catch2/catch_amalgamated.hpp>

#include <omp.h>

#include <cmath>

#include "delaylab/population.hpp"
#include "support.hpp"

using namespace delaylab;
using Catch::Approx;

namespace {

ModelSpec constant_spec(double a_max, std::size_t n_age, double r, double mu, double alpha,
                        double beta, BirthLaw law = BirthLaw::point) {
  ModelSpec s;
  s.a_max = a_max;
  s.n_age = n_age;
  s.r = r;
  s.mu.assign(n_age + 1, mu);
  s.alpha.assign(n_age + 1, alpha);
  s.law = law;
  if (law == BirthLaw::point) {
    s.beta2.assign(n_age + 1, beta);
  } else {
    const auto k = static_cast<std::size_t>(std::llround(r * n_age / a_max));
    s.beta1 = Matrix(k + 1, n_age + 1);
    for (double& x : s.beta1.data()) x = beta / r;
  }
  return s;
}

const HistoryFunction frozen_decay = [](double, double a) { return std::exp(-a); };

double rel_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0, m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::abs(a[i] - b[i]));
    m = std::max(m, std::abs(b[i]));
  }
  return m > 0.0 ? d / m : d;
}

}  // namespace

TEST_CASE("build_model examples") {
  const auto m = build_model(constant_spec(20, 2000, 0.5, 1, 0, 2));
  CHECK(m.delay_steps() == 50);
  CHECK(m.dt() == Approx(0.01));
  CHECK(m.mu_inf() == 1.0);

  auto off_grid = constant_spec(12, 1000, 0.5, 1, 0, 2);  // dt = 0.012
  CHECK_THROWS_AS(build_model(off_grid), ConfigError);

  auto negative = constant_spec(20, 200, 0.5, 1, 0, 2);
  negative.beta2[17] = -1e-3;
  CHECK_THROWS_AS(build_model(negative), ConfigError);

  auto wrong_dt = constant_spec(20, 200, 0.5, 1, 0, 2);
  wrong_dt.dt = 0.05;
  CHECK_THROWS_AS(build_model(wrong_dt), ConfigError);
  wrong_dt.dt = 0.1;
  CHECK_NOTHROW(build_model(wrong_dt));

  auto bad_len = constant_spec(20, 200, 0.5, 1, 0, 2);
  bad_len.alpha.pop_back();
  CHECK_THROWS_AS(build_model(bad_len), ConfigError);

  auto tail = constant_spec(20, 200, 0.5, 1, 0, 2);
  tail.mu_inf = 0.0;
  CHECK_THROWS_AS(build_model(tail), ConfigError);

  CHECK_THROWS_AS(build_model(constant_spec(20, 200, 0.0, 1, 0, 2, BirthLaw::distributed)),
                  ConfigError);
}

TEST_CASE("pure transport is exact at the grid nodes") {
  const double mu0 = 0.7;
  const auto m = build_model(constant_spec(10, 1000, 0.2, mu0, 0, 0));
  const HistoryFunction w0 = [](double, double a) { return 1.0 + std::sin(a); };
  PopulationState s = initial_state(m, w0);
  for (int i = 0; i < 300; ++i) step(m, s);
  const double t = s.t();
  CHECK(t == Approx(3.0));
  for (std::size_t j = 301; j <= 1000; j += 37) {
    const double want = (1.0 + std::sin(m.age(j) - t)) * std::exp(-mu0 * t);
    CHECK(s.profile()[j] == Approx(want).epsilon(1e-12));
  }
  CHECK(s.profile()[0] == 0.0);
}

TEST_CASE("stepping matches a naive full-history scheme") {
  for (std::size_t k : {0u, 7u}) {
    const double a_max = 4.0;
    const std::size_t n = 400;
    const double r = a_max / n * static_cast<double>(k);
    const auto m = build_model(constant_spec(a_max, n, r, 0.9, 0.3, 1.6));
    const HistoryFunction phi = [](double s, double a) { return std::exp(-a + 0.2 * s) * (1 + a); };
    const oracle::NaivePopulation naive{a_max, n, k, 0.9, 0.3, 1.6};
    const auto ref = naive.run(phi, 250);
    PopulationState s = initial_state(m, phi);
    for (int i = 0; i < 250; ++i) step(m, s, nullptr, Execution::serial);
    CHECK(rel_diff(s.profile(), ref.back()) <= 1e-12);
    for (std::size_t d = 0; d <= k; ++d) {
      CHECK(rel_diff(s.slot(d), ref[ref.size() - 1 - d]) <= 1e-12);
    }
  }
}

TEST_CASE("doubling the history doubles every later profile") {
  const auto m = build_model(constant_spec(10, 500, 0.4, 1, 0.5, 1.5));
  const HistoryFunction phi = [](double s, double a) { return std::exp(-a) * (2 + std::cos(3 * s)); };
  const HistoryFunction twice = [&](double s, double a) { return 2.0 * phi(s, a); };
  const auto one = simulate(m, phi, 5.0, nullptr, {100});
  const auto two = simulate(m, twice, 5.0, nullptr, {100});
  for (std::size_t i = 0; i < one.snapshots.size(); ++i) {
    const auto& a = one.snapshots[i].second;
    const auto& b = two.snapshots[i].second;
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(b[j] == 2.0 * a[j]);
  }
}

TEST_CASE("first post-delay step converges under refinement") {
  // α = 0.5, μ = 1, φ = e^{-a}; compare at t = r + dt against a 4× finer grid.
  const double r = 0.5;
  auto profile_after = [&](std::size_t n_age, double t) {
    const auto m = build_model(constant_spec(10, n_age, r, 1, 0.5, 0));
    PopulationState s = initial_state(m, frozen_decay);
    while (s.t() < t - 1e-12) step(m, s);
    return std::make_pair(m, Vector(s.profile().begin(), s.profile().end()));
  };
  const auto [coarse_m, coarse] = profile_after(1000, r + 0.01);
  const auto [fine_m, fine] = profile_after(4000, r + 0.01);
  double err = 0.0;
  for (std::size_t j = 2; j < coarse.size(); ++j) {
    err = std::max(err, std::abs(coarse[j] - fine[4 * j]));
  }
  CHECK(err <= coarse_m.dt());
  CHECK(err > 0.0);
}

TEST_CASE("birth_eval examples") {
  SECTION("no births") {
    const auto m = build_model(constant_spec(20, 2000, 0.5, 1, 0, 0));
    CHECK(birth_eval(m, initial_state(m, frozen_decay)) == 0.0);
  }
  SECTION("point law against the closed form") {
    const double beta0 = 1.7;
    // a_max = 2, n_age = 2000: trapezoid error β0·h²/12·(1 - e^{-2}) ≈ 1e-7
    const auto fine = build_model(constant_spec(2, 2000, 0.5, 1, 0, beta0));
    CHECK(birth_eval(fine, initial_state(fine, frozen_decay)) ==
          Approx(beta0 * (1 - std::exp(-2.0))).epsilon(0).margin(1e-6));
    // a_max = 20: the error is the trapezoid one, β0·h²/12·(1 - e^{-20})
    const auto wide = build_model(constant_spec(20, 2000, 0.5, 1, 0, beta0));
    const double err = birth_eval(wide, initial_state(wide, frozen_decay)) -
                       beta0 * (1 - std::exp(-20.0));
    CHECK(err == Approx(beta0 * 1e-4 / 12.0).epsilon(1e-3));
  }
  SECTION("distributed law with a flat kernel equals the point law") {
    const auto point = build_model(constant_spec(20, 2000, 0.5, 1, 0, 1.7));
    const auto dist = build_model(constant_spec(20, 2000, 0.5, 1, 0, 1.7, BirthLaw::distributed));
    const double b2 = birth_eval(point, initial_state(point, frozen_decay));
    const double b1 = birth_eval(dist, initial_state(dist, frozen_decay));
    CHECK(b1 == Approx(b2).epsilon(1e-12));
    CHECK(birth_eval(dist, initial_state(dist, frozen_decay), Execution::serial) ==
          Approx(b1).epsilon(1e-13));
  }
}

TEST_CASE("simulate: pure death against the closed form") {
  // w(t, a) = e^{-a} on [t, a_max], so the total is e^{-t} - e^{-a_max}. The
  // trapezoid rule adds h/2·e^{-t} from the jump at the front and the usual
  // h²/12·(f'(a_max) - f'(t)) from the smooth part.
  const double a_max = 30.0;
  const auto m = build_model(constant_spec(a_max, 3000, 0.0, 1, 0, 0));
  const auto tr = simulate(m, frozen_decay, 20.0);
  for (std::size_t i = 1; i < tr.times.size(); i += 97) {
    const double t = tr.times[i];
    const double exact = std::exp(-t) - std::exp(-a_max);
    const double h = m.dt();
    const double predicted = exact + (0.5 * h + h * h / 12.0) * std::exp(-t);
    CHECK(tr.total[i] == Approx(predicted).epsilon(1e-6));
    CHECK(std::abs(tr.total[i] - exact) <= 0.51 * h * std::exp(-t));
  }
  // On a grid fine enough for the jump term the closed form itself holds to 1e-6.
  const auto fine = build_model(constant_spec(2.0, 2'000'000, 0.0, 1, 0, 0));
  const auto ftr = simulate(fine, frozen_decay, 2e-4);
  for (std::size_t i = 1; i < ftr.times.size(); i += 50) {
    const double t = ftr.times[i];
    CHECK(ftr.total[i] == Approx(std::exp(-t) - std::exp(-2.0)).epsilon(1e-6));
  }
}

TEST_CASE("simulate: zero data and linearity in the harvest input") {
  auto spec = constant_spec(10, 1000, 0.3, 1, 0.2, 1.2);
  spec.eta.assign(1001, 0.4);
  const auto m = build_model(spec);
  const HistoryFunction zero = [](double, double) { return 0.0; };
  const auto quiet = simulate(m, zero, 4.0);
  for (double x : quiet.total) CHECK(x == 0.0);
  for (double x : quiet.birth) CHECK(x == 0.0);

  auto harvest_scaled = [](double c) {
    return HarvestInput([c](double t, std::span<double> out) {
      for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = c * (1.0 + std::sin(t)) * std::exp(-0.01 * static_cast<double>(j));
      }
    });
  };
  const auto q1 = harvest_scaled(1.0);
  const auto base = simulate(m, zero, 4.0, &q1);
  CHECK(std::abs(base.total.back()) > 0.0);
  for (double c : {2.0, 10.0}) {
    const auto qc = harvest_scaled(c);
    const auto scaled = simulate(m, zero, 4.0, &qc);
    for (std::size_t i = 0; i < base.total.size(); ++i) {
      CHECK(std::abs(scaled.total[i] - c * base.total[i]) <=
            1e-12 * std::max(1e-300, std::abs(c * base.total[i])));
    }
  }
  CHECK_THROWS_AS(simulate(build_model(constant_spec(10, 1000, 0.3, 1, 0.2, 1.2)), zero, 4.0, &q1),
                  PreconditionError);
}

TEST_CASE("superposition of histories") {
  const auto m = build_model(constant_spec(10, 1000, 0.5, 1, 0.3, 1.4));
  const HistoryFunction p1 = [](double s, double a) { return std::exp(-a + s); };
  const HistoryFunction p2 = [](double s, double a) { return a * std::exp(-a) * (1 - s); };
  const HistoryFunction sum = [&](double s, double a) { return p1(s, a) + p2(s, a); };
  const auto t1 = simulate(m, p1, 6.0), t2 = simulate(m, p2, 6.0), ts = simulate(m, sum, 6.0);
  for (std::size_t i = 0; i < ts.total.size(); ++i) {
    CHECK(ts.total[i] == Approx(t1.total[i] + t2.total[i]).epsilon(1e-12));
    CHECK(ts.birth[i] == Approx(t1.birth[i] + t2.birth[i]).epsilon(1e-12).margin(1e-300));
  }
}

TEST_CASE("pure transport conserves compactly supported mass") {
  auto spec = constant_spec(10, 1000, 0.2, 0, 0, 0);
  spec.mu_inf = 1.0;
  const auto m = build_model(spec);
  const HistoryFunction bump = [](double, double a) {
    return a > 0.5 && a < 4.0 ? std::pow(std::sin((a - 0.5) * M_PI / 3.5), 2) : 0.0;
  };
  const auto tr = simulate(m, bump, 6.0);
  for (double x : tr.total) CHECK(x == Approx(tr.total.front()).epsilon(1e-12));
}

TEST_CASE("positivity") {
  SECTION("without delayed death every nonnegative run stays nonnegative") {
    const auto m = build_model(constant_spec(20, 2000, 0.5, 1, 0, 2));
    REQUIRE(m.positivity_step_ok());
    CHECK(simulate(m, frozen_decay, 10.0).min_value >= -1e-12);
  }
  SECTION("a history on the dominant mode stays positive with delayed death") {
    // Pick the growth rate and solve the birth condition for β.
    const double mu = 1.0, alpha = 0.5, r = 0.5, lambda = 0.2, a_max = 20.0;
    const double rate = lambda + mu + std::exp(-lambda * r) * alpha;
    const double beta = rate * std::exp(lambda * r) / (1.0 - std::exp(-rate * a_max));
    const HistoryFunction mode = [=](double s, double a) { return std::exp(lambda * s - rate * a); };
    const auto m = build_model(constant_spec(a_max, 2000, r, mu, alpha, beta));
    REQUIRE(m.positivity_step_ok());
    CHECK(simulate(m, mode, 10.0).min_value >= -1e-12);
  }
  SECTION("the monitor reports negative entries from generic data") {
    // With α > 0 the delayed death term can push cohorts below zero.
    const auto m = build_model(constant_spec(30, 3000, 0.5, 1, 0.25, 2));
    REQUIRE(m.positivity_step_ok());
    CHECK(simulate(m, frozen_decay, 20.0).min_value < -1e-6);
  }
  SECTION("step restriction") {
    CHECK_FALSE(build_model(constant_spec(20, 10, 0.0, 1, 0.6, 0)).positivity_step_ok());
  }
}

TEST_CASE("serial and parallel execution agree") {
  const auto m = build_model(constant_spec(20, 40000, 0.01, 1, 0.2, 1.5, BirthLaw::distributed));
  SimulationOptions serial{0, Execution::serial}, parallel{0, Execution::parallel};
  const auto a = simulate(m, frozen_decay, 0.2, nullptr, serial);
  const auto b = simulate(m, frozen_decay, 0.2, nullptr, parallel);
  CHECK(rel_diff(a.total, b.total) <= 1e-13);
  CHECK(rel_diff(a.final_profile, b.final_profile) <= 1e-13);

  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto c = simulate(m, frozen_decay, 0.2, nullptr, parallel);
  omp_set_num_threads(saved);
  CHECK(c.total == b.total);
  CHECK(c.final_profile == b.final_profile);
}

TEST_CASE("simulate errors") {
  const auto m = build_model(constant_spec(10, 1000, 0.5, 1, 0, 2));
  CHECK_THROWS_AS(simulate(m, frozen_decay, 0.5), PreconditionError);
  const auto wild = build_model(constant_spec(10, 1000, 0.01, 1, 0, 1e6));
  try {
    simulate(wild, frozen_decay, 5.0);
    FAIL("expected OverflowError");
  } catch (const OverflowError& e) {
    CHECK(e.last_valid_time() > 0.0);
    CHECK(e.last_valid_time() < 5.0);
  }
}

TEST_CASE("input_gain") {
  auto spec = constant_spec(10, 500, 0.4, 1, 0.2, 0.5);
  CHECK(input_gain(build_model(spec), 4.0, 5).gain == 0.0);

  spec.eta.assign(501, 0.6);
  const auto m = build_model(spec);
  const auto few = input_gain(m, 4.0, 10), many = input_gain(m, 4.0, 50);
  CHECK(few.gain > 0.0);
  CHECK(few.gain <= many.gain);
  CHECK(few.probe < 10);

  auto fine_spec = constant_spec(10, 1000, 0.4, 1, 0.2, 0.5);
  fine_spec.eta.assign(1001, 0.6);
  const auto fine = input_gain(build_model(fine_spec), 4.0, 10);
  CHECK(std::abs(fine.gain - few.gain) <= 0.1 * few.gain);
  CHECK_THROWS_AS(input_gain(m, 4.0, 0), PreconditionError);
}
