#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "delaylab/spectral.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace delaylab;
using Catch::Approx;

namespace {

ModelSpec flat_spec(double r, double mu, double alpha, double beta,
                    BirthLaw law = BirthLaw::point, double a_max = 30.0, std::size_t n_age = 3000) {
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

// Scale the birth table of a spec by c.
ModelSpec scaled_births(ModelSpec s, double c) {
  for (double& x : s.beta2) x *= c;
  for (double& x : s.beta1.data()) x *= c;
  return s;
}

// Trapezoid value of β∫_0^{a_max} e^{-rate·a} da on step h, to O(h⁴).
double flat_birth_integral(double beta, double rate, double h, double a_max = 30.0) {
  return beta * ((1.0 - std::exp(-rate * a_max)) / rate + h * h * rate / 12.0);
}

const HistoryFunction decaying = [](double, double a) { return std::exp(-a); };

}  // namespace

TEST_CASE("resolvent_kernel closed forms") {
  const auto plain = build_model(flat_spec(0.5, 0.8, 0.0, 1.0));
  const auto delayed = build_model(flat_spec(0.5, 0.8, 0.3, 1.0));
  for (double lambda : {-0.5, 0.0, 0.7}) {
    CHECK(resolvent_kernel(plain, lambda, 0) == 1.0);
    CHECK(resolvent_kernel(delayed, lambda, 0) == 1.0);
    for (std::size_t j : {1u, 250u, 2999u}) {
      const double a = plain.age(j);
      CHECK(resolvent_kernel(plain, lambda, j) == Approx(std::exp(-(lambda + 0.8) * a)).epsilon(1e-10));
      const double rate = lambda + 0.8 + 0.3 * std::exp(-lambda * 0.5);
      CHECK(resolvent_kernel(delayed, lambda, j) == Approx(std::exp(-rate * a)).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS(resolvent_kernel(plain, 0.0, 3001), PreconditionError);
}

TEST_CASE("xi examples") {
  SECTION("no births") {
    for (auto law : {BirthLaw::point, BirthLaw::distributed}) {
      const auto m = build_model(flat_spec(0.5, 1, 0.2, 0, law));
      const CharacteristicEvaluator ev(m);
      for (double lambda : {-0.9, 0.0, 3.0}) CHECK(ev.xi(lambda) == -1.0);
    }
  }
  SECTION("point law without delayed death") {
    const auto m = build_model(flat_spec(0.0, 1, 0, 2));
    // -1 + 2/(λ+1), truncated at a_max, plus the trapezoid bias
    for (double lambda : {-0.5, 0.0, 1.0, 4.0}) {
      const double want = -1.0 + flat_birth_integral(2.0, lambda + 1.0, m.dt());
      CHECK(xi2(m, lambda) == Approx(want).epsilon(0).margin(1e-8));
    }
    CHECK(xi2(m, 0.0) == Approx(1.0).epsilon(0).margin(2e-5));
  }
  SECTION("point law at zero with delayed death") {
    for (double r : {0.0, 0.5, 1.0}) {
      const auto m = build_model(flat_spec(r, 1, 0.5, 1.2));
      CHECK(xi2(m, 0.0) == Approx(-1.0 + flat_birth_integral(1.2, 1.5, m.dt())).epsilon(0).margin(1e-8));
      CHECK(xi2(m, 0.0) == Approx(-1.0 + 1.2 / 1.5).epsilon(0).margin(2e-5));
    }
  }
  SECTION("distributed law at zero") {
    const auto m = build_model(flat_spec(0.5, 0.8, 0, 2, BirthLaw::distributed));
    CHECK(xi1(m, 0.0) == Approx(-1.0 + flat_birth_integral(2.0, 0.8, m.dt())).epsilon(0).margin(1e-8));
    CHECK(xi1(m, 0.0) == Approx(-1.0 + 2.0 / 0.8).epsilon(0).margin(2e-5));
    // away from zero the σ-integral is (1 - e^{-λr})/λ against a trapezoid sum
    const double lambda = 0.6, r = 0.5, h = m.dt();
    double sigma = 0.0;
    for (std::size_t d = 0; d <= m.delay_steps(); ++d) {
      const double w = (d == 0 || d == m.delay_steps()) ? 0.5 * h : h;
      sigma += w * std::exp(-lambda * h * static_cast<double>(d));
    }
    CHECK(sigma == Approx((1.0 - std::exp(-lambda * r)) / lambda).epsilon(1e-5));
    const double want = -1.0 + sigma * flat_birth_integral(2.0 / r, lambda + 0.8, h);
    CHECK(xi1(m, lambda) == Approx(want).epsilon(0).margin(1e-8));
  }
  SECTION("law mismatch and domain") {
    const auto m = build_model(flat_spec(0.5, 1, 0, 2));
    CHECK_THROWS_AS(xi1(m, 0.0), PreconditionError);
    CHECK_THROWS_AS(xi2(m, -1.0), DomainError);
    CHECK_THROWS_AS(xi2(m, -1.0 + 1e-7), DomainError);
    CHECK_NOTHROW(xi2(m, -1.0 + 2e-6));
    CHECK_THROWS_AS(xi2(m, NAN), DomainError);
  }
}

TEST_CASE("xi without delay matches direct quadrature") {
  const double a_max = 10.0;
  const std::size_t n = 2000;
  auto mu = [](double a) { return 0.5 + 0.1 * a; };
  auto alpha = [](double a) { return 0.2 * std::sin(a) * std::sin(a); };
  auto beta = [](double a) { return a * std::exp(-0.3 * a); };
  ModelSpec s;
  s.a_max = a_max;
  s.n_age = n;
  s.r = 0.0;
  s.mu = sample_ages(a_max, n, mu);
  s.alpha = sample_ages(a_max, n, alpha);
  s.beta2 = sample_ages(a_max, n, beta);
  const auto m = build_model(s);
  const double h = a_max / n;
  for (double lambda : {-0.3, 0.0, 0.9}) {
    // same grid, exponent integrated node by node
    double same_grid = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
      double exponent = 0.0;
      for (std::size_t i = 1; i <= j; ++i) {
        const double lo = h * static_cast<double>(i - 1), hi = h * static_cast<double>(i);
        exponent += 0.5 * h * (lambda + mu(lo) + alpha(lo) + lambda + mu(hi) + alpha(hi));
      }
      const double w = (j == 0 || j == n) ? 0.5 * h : h;
      same_grid += w * beta(h * static_cast<double>(j)) * std::exp(-exponent);
    }
    CHECK(xi2(m, lambda) == Approx(-1.0 + same_grid).epsilon(0).margin(1e-10));
    // analytic exponent and a fine Simpson rule bound the trapezoid bias
    const double fine = oracle::simpson(
        [&](double a) {
          const double e = lambda * a + 0.5 * a + 0.05 * a * a + 0.1 * a - 0.05 * std::sin(2 * a);
          return beta(a) * std::exp(-e);
        },
        0.0, a_max, 20000);
    CHECK(xi2(m, lambda) == Approx(-1.0 + fine).epsilon(0).margin(1e-5));
  }
}

TEST_CASE("xi is strictly decreasing and tends to -1") {
  std::vector<ModelSpec> specs{flat_spec(0.0, 1, 0, 2), flat_spec(0.5, 1, 0.5, 2),
                               flat_spec(1.0, 0.4, 1.0, 3),
                               flat_spec(0.5, 1, 0.25, 2, BirthLaw::distributed),
                               flat_spec(0.25, 0.6, 0.0, 0.5, BirthLaw::distributed)};
  for (const auto& s : specs) {
    const auto m = build_model(s);
    const CharacteristicEvaluator ev(m);
    double previous = ev.xi(-m.mu_inf() / 2.0);
    for (int k = 1; -m.mu_inf() / 2.0 + 0.1 * k <= 5.0 + 1e-12; ++k) {
      const double next = ev.xi(-m.mu_inf() / 2.0 + 0.1 * k);
      CHECK(next < previous);
      previous = next;
    }
    const double far = ev.xi(50.0);
    CHECK(far > -1.0 - 1e-6);
    CHECK(far < -0.9);
  }
}

TEST_CASE("dominant_real_root examples") {
  const auto closed = build_model(flat_spec(0.0, 1, 0, 2));
  const auto root = dominant_real_root(CharacteristicEvaluator(closed));
  REQUIRE(root.has_value());
  // closed form 1 up to the trapezoid bias of ξ on this grid
  CHECK(*root == Approx(1.0).epsilon(0).margin(1e-4));
  const double grid_root =
      oracle::bisect([&](double l) { return xi2(closed, l); }, 0.5, 1.5, 1e-13);
  CHECK(*root == Approx(grid_root).epsilon(0).margin(1e-9));

  CHECK_FALSE(dominant_real_root(CharacteristicEvaluator(build_model(flat_spec(0.5, 1, 0, 0))))
                  .has_value());

  for (double r : {0.0, 0.5, 2.0}) {
    const auto weak = build_model(flat_spec(r, 1, 0, 0.5));
    CHECK(xi2(weak, 0.0) == Approx(-1.0 + flat_birth_integral(0.5, 1.0, weak.dt())).epsilon(0).margin(1e-8));
    const auto w = dominant_real_root(CharacteristicEvaluator(weak));
    if (w) CHECK(*w < 0.0);
  }

  // with delay: independent bisection on the closed form λ + 1 + 0.5e^{-λ/2} = 2e^{-λ/2}
  const auto delayed = build_model(flat_spec(0.5, 1, 0.5, 2));
  const double want = oracle::bisect(
      [](double l) { return 2.0 * std::exp(-0.5 * l) - (l + 1.0 + 0.5 * std::exp(-0.5 * l)); },
      -0.5, 2.0);
  CHECK(*dominant_real_root(CharacteristicEvaluator(delayed)) == Approx(want).epsilon(0).margin(1e-4));
}

TEST_CASE("classify_stability examples") {
  const auto weak = classify_stability(CharacteristicEvaluator(build_model(flat_spec(0.5, 1, 0, 0.5))));
  CHECK(weak.stability_class == StabilityClass::stable);
  CHECK(weak.sufficient_condition_holds);
  CHECK(sufficient_condition_value(build_model(flat_spec(0.5, 1, 0, 0.5))) ==
        Approx(0.5).epsilon(1e-5));

  const auto strong = classify_stability(CharacteristicEvaluator(build_model(flat_spec(0.0, 1, 0, 2))));
  CHECK(strong.stability_class == StabilityClass::unstable);
  CHECK(strong.xi_at_zero == Approx(-1.0 + flat_birth_integral(2.0, 1.0, 0.01)).epsilon(0).margin(1e-8));
  CHECK_FALSE(strong.sufficient_condition_holds);

  // β0 = μ0 + α0 is critical for the continuous model; on the grid the table
  // needs the small correction from critical_birth_scale.
  const ModelSpec tuned = flat_spec(0.5, 1, 0.5, 1.5);
  const double c = critical_birth_scale(build_model(tuned));
  CHECK(c == Approx(1.0).epsilon(0).margin(1e-4));
  const auto critical =
      classify_stability(CharacteristicEvaluator(build_model(scaled_births(tuned, c))));
  CHECK(critical.stability_class == StabilityClass::critical);
  CHECK(std::abs(critical.xi_at_zero) <= kCriticalBand);
  CHECK(critical.dominant_root.has_value());
  CHECK(std::abs(*critical.dominant_root) <= 1e-8);

  CHECK_THROWS_AS(critical_birth_scale(build_model(flat_spec(0.5, 1, 0, 0))), PreconditionError);
}

TEST_CASE("the sufficient condition implies a negative value at zero") {
  for (double beta : {0.1, 0.4, 0.7, 0.95}) {
    for (double alpha : {0.0, 0.5}) {
      for (auto law : {BirthLaw::point, BirthLaw::distributed}) {
        const auto m = build_model(flat_spec(0.5, 1, alpha, beta, law));
        const auto report = classify_stability(CharacteristicEvaluator(m));
        if (report.sufficient_condition_holds) {
          CHECK(report.xi_at_zero < 0.0);
          CHECK(report.stability_class == StabilityClass::stable);
        }
      }
    }
  }
}

TEST_CASE("growth_rate_fit on synthetic data") {
  Trajectory up, down;
  for (int i = 0; i <= 400; ++i) {
    const double t = 0.05 * i;
    up.times.push_back(t);
    up.total.push_back(std::exp(0.3 * t));
    down.times.push_back(t);
    down.total.push_back(4.2 * std::exp(-1.2 * t));
  }
  CHECK(growth_rate_fit(up, 0.5) == Approx(0.3).epsilon(0).margin(1e-9));
  CHECK(growth_rate_fit(down, 0.0) == Approx(-1.2).epsilon(0).margin(1e-9));
  CHECK_THROWS_AS(growth_rate_fit(up, 1.0), PreconditionError);
  CHECK_THROWS_AS(growth_rate_fit(up, -0.1), PreconditionError);
  down.total.back() = 0.0;
  CHECK_THROWS_AS(growth_rate_fit(down, 0.5), FitError);
  CHECK_THROWS_AS(growth_rate_fit(Trajectory{}, 0.5), FitError);
}

TEST_CASE("cross_check examples") {
  SECTION("stable") {
    const auto r = cross_check(build_model(flat_spec(0.5, 1, 0, 0.5)), decaying, 20.0, 0.5);
    REQUIRE(r.measured_growth.has_value());
    CHECK(*r.measured_growth < 0.0);
    CHECK(r.stability_class == StabilityClass::stable);
    CHECK(trichotomy_consistent(r));
  }
  SECTION("unstable without delay") {
    const auto r = cross_check(build_model(flat_spec(0.0, 1, 0, 2)), decaying, 20.0, 0.5);
    CHECK(*r.dominant_root == Approx(1.0).epsilon(0).margin(1e-4));
    CHECK(*r.measured_growth == Approx(1.0).epsilon(0.05));
    REQUIRE(r.agreement.has_value());
    CHECK(*r.agreement <= 0.05);
    CHECK(trichotomy_consistent(r));
  }
  SECTION("critical") {
    const ModelSpec tuned = flat_spec(0.5, 1, 0.5, 1.5);
    const auto m = build_model(scaled_births(tuned, critical_birth_scale(build_model(tuned))));
    const auto r = cross_check(m, decaying, 40.0, 0.5);
    CHECK(r.stability_class == StabilityClass::critical);
    CHECK(std::abs(*r.measured_growth) <= kMeasuredCriticalBand);
    CHECK(trichotomy_consistent(r));
  }
  SECTION("serial and parallel runs agree") {
    const auto m = build_model(flat_spec(0.5, 1, 0.5, 2));
    const auto p = cross_check(m, decaying, 10.0, 0.5, Execution::parallel);
    const auto s = cross_check(m, decaying, 10.0, 0.5, Execution::serial);
    CHECK(*p.measured_growth == Approx(*s.measured_growth).epsilon(1e-10));
  }
}

TEST_CASE("trichotomy_consistent needs a measurement") {
  SpectralReport r;
  CHECK_FALSE(trichotomy_consistent(r));
  r.measured_growth = -0.1;
  CHECK(trichotomy_consistent(r));
  r.stability_class = StabilityClass::unstable;
  CHECK_FALSE(trichotomy_consistent(r));
  r.stability_class = StabilityClass::critical;
  r.measured_growth = 0.019;
  CHECK(trichotomy_consistent(r));
  r.measured_growth = 0.021;
  CHECK_FALSE(trichotomy_consistent(r));
}

TEST_CASE("report serialization") {
  SpectralReport r;
  r.xi_at_zero = -0.1234567890123456789;
  r.sufficient_condition_holds = true;
  const auto empty = nlohmann::json::parse(to_json(r));
  CHECK(empty.size() == 6);
  CHECK(empty["dominant_root"].is_null());
  CHECK(empty["measured_growth"].is_null());
  CHECK(empty["agreement"].is_null());
  CHECK(empty["stability_class"] == "stable");
  CHECK(empty["sufficient_condition_holds"] == true);
  CHECK(empty["xi_at_zero"].get<double>() == r.xi_at_zero);

  r.dominant_root = 0.3;
  r.measured_growth = 0.31;
  r.agreement = 1.0 / 30.0;
  r.stability_class = StabilityClass::unstable;
  const auto full = nlohmann::json::parse(to_json(r));
  CHECK(full["dominant_root"].get<double>() == 0.3);
  CHECK(full["agreement"].get<double>() == 1.0 / 30.0);
  CHECK(full["stability_class"] == "unstable");
  CHECK(to_string(StabilityClass::critical) == "critical");
}
