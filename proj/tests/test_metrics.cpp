#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "optosyn/errors.hpp"
#include "optosyn/metrics.hpp"

using namespace optosyn;

namespace {

CurrentTrace trace_from(std::vector<double> samples, double dt = 1e-3) {
  CurrentTrace t;
  t.dt = dt;
  t.current_a = std::move(samples);
  return t;
}

}  // namespace

TEST_CASE("delta_psc: constant trace has zero response classified Null") {
  const auto t = trace_from(std::vector<double>(100, 2e-5));
  const double d = delta_psc(t, {0, 10}, {10, 100});
  CHECK(d == 0.0);
  CHECK(classify(d) == Classification::Null);
}

TEST_CASE("delta_psc: picks the signed extremum against the baseline") {
  std::vector<double> v(100, 2e-5);
  v[40] = 1.7e-5;  // deepest dip
  v[40 + 20] = 2.2e-5;
  const auto t = trace_from(std::move(v));
  const double d = delta_psc(t, {0, 10}, {10, 100});
  CHECK(d == doctest::Approx(-3e-6).epsilon(1e-12));
  CHECK(classify(d) == Classification::Inhibitory);
  CHECK(classify(-d) == Classification::Excitatory);
}

TEST_CASE("delta_psc: reflection about the baseline flips the sign exactly") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> step(0.0, 1e-7);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> v(200);
    double x = 1e-5;
    for (auto& s : v) {
      x += step(rng);
      s = x;
    }
    const auto t = trace_from(std::vector<double>(v));
    const double base = window_mean(t, {0, 20});
    std::vector<double> mirrored(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) mirrored[i] = 2.0 * base - v[i];
    const auto tm = trace_from(std::move(mirrored));
    const double d = delta_psc(t, {0, 20}, {20, 200});
    const double dm = delta_psc(tm, {0, 20}, {20, 200});
    CHECK(d == doctest::Approx(-dm).epsilon(1e-9));
  }
}

TEST_CASE("delta_psc: empty or out-of-range windows are rejected") {
  const auto t = trace_from(std::vector<double>(50, 1e-5));
  CHECK_THROWS_AS(delta_psc(t, {0, 10}, {20, 20}), EmptyWindow);
  CHECK_THROWS_AS(delta_psc(t, {0, 0}, {10, 20}), EmptyWindow);
  CHECK_THROWS_AS(delta_psc(t, {0, 10}, {10, 90}), EmptyWindow);
}

TEST_CASE("weight_change: hand-checked dip") {
  std::vector<double> v(100, 2e-5);
  for (int i = 30; i < 40; ++i) v[i] = 1.5e-5;
  const auto t = trace_from(std::move(v));
  CHECK(weight_change(t, {0, 20}, {20, 100}) == doctest::Approx(-0.25).epsilon(1e-12));
}

TEST_CASE("ppf_index: invariant under uniform current rescaling") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> v(300, 1e-5);
    for (int i = 50; i < 150; ++i) v[i] = 1e-5 - 2e-6 * unit(rng);
    for (int i = 150; i < 300; ++i) v[i] = 1e-5 - 3e-6 * unit(rng);
    auto t = trace_from(std::vector<double>(v));
    const double r1 = ppf_index(t, {0, 50}, {50, 150}, {150, 300});
    const double k = 0.5 + 4.0 * unit(rng);
    for (auto& s : v) s *= k;
    const auto ts = trace_from(std::move(v));
    const double r2 = ppf_index(ts, {0, 50}, {50, 150}, {150, 300});
    CHECK(r1 == doctest::Approx(r2).epsilon(1e-12));
  }
}

TEST_CASE("ppf_index: silent first window trips the near-zero guard") {
  const auto t = trace_from(std::vector<double>(100, 1e-5));
  CHECK_THROWS_AS(ppf_index(t, {0, 10}, {10, 50}, {50, 100}), DivisionByNearZero);
}

TEST_CASE("fit_double_exp: recovers a synthetic double exponential within 1%") {
  const double a1 = 1e-6, tau1 = 2e-3, a2 = 5e-7, tau2 = 4e-2, c = 1e-5;
  std::vector<double> t, y;
  for (int i = 0; i <= 2000; ++i) {
    const double ti = 1e-4 * i;
    t.push_back(ti);
    y.push_back(a1 * std::exp(-ti / tau1) + a2 * std::exp(-ti / tau2) + c);
  }
  const auto fit = fit_double_exp(t, y);
  CHECK(fit.a1 == doctest::Approx(a1).epsilon(0.01));
  CHECK(fit.tau1 == doctest::Approx(tau1).epsilon(0.01));
  CHECK(fit.a2 == doctest::Approx(a2).epsilon(0.01));
  CHECK(fit.tau2 == doctest::Approx(tau2).epsilon(0.01));
  CHECK(fit.c == doctest::Approx(c).epsilon(0.01));
  CHECK(fit.tau1 <= fit.tau2);
  CHECK(fit.r2 > 0.999999);
}

TEST_CASE("fit_double_exp: negative-amplitude recovery branch") {
  const double a1 = -2e-6, tau1 = 5e-3, a2 = -4e-7, tau2 = 8e-2, c = 2e-5;
  std::vector<double> t, y;
  for (int i = 0; i <= 3000; ++i) {
    const double ti = 1e-4 * i;
    t.push_back(ti);
    y.push_back(a1 * std::exp(-ti / tau1) + a2 * std::exp(-ti / tau2) + c);
  }
  const auto fit = fit_double_exp(t, y);
  CHECK(fit.a1 == doctest::Approx(a1).epsilon(0.01));
  CHECK(fit.tau1 == doctest::Approx(tau1).epsilon(0.01));
  CHECK(fit.a2 == doctest::Approx(a2).epsilon(0.01));
  CHECK(fit.tau2 == doctest::Approx(tau2).epsilon(0.01));
}

TEST_CASE("fit_double_exp: single exponential degenerates cleanly") {
  std::vector<double> t, y;
  for (int i = 0; i <= 1000; ++i) {
    const double ti = 1e-4 * i;
    t.push_back(ti);
    y.push_back(1e-6 * std::exp(-ti / 0.01) + 1e-5);
  }
  const auto fit = fit_double_exp(t, y);
  const bool amp_degenerate =
      std::abs(fit.a1) < 0.02 * 1e-6 || std::abs(fit.a2) < 0.02 * 1e-6;
  const bool tau_degenerate = std::abs(fit.tau1 - fit.tau2) < 0.05 * fit.tau2;
  CHECK((amp_degenerate || tau_degenerate));
  CHECK(fit.r2 > 0.9999);
  CHECK(fit.a1 + fit.a2 == doctest::Approx(1e-6).epsilon(0.01));
}

TEST_CASE("fit_double_exp: refuses data no decay can describe") {
  std::vector<double> t, y;
  for (int i = 0; i < 200; ++i) {
    t.push_back(1e-3 * i);
    y.push_back(i % 2 ? 1.0 : -1.0);
  }
  CHECK_THROWS_AS(fit_double_exp(t, y), FitDiverged);
}

TEST_CASE("fit_double_exp: input contract") {
  std::vector<double> t(10), y(10);
  CHECK_THROWS_AS(fit_double_exp(t, y), ValidationError);  // too short
}

TEST_CASE("truth_table: zero optical power yields the all-zero row set") {
  DeviceParams p;
  p.eta = {{405, 1.2e22}};
  LogicConfig cfg;
  cfg.v_g = 0.0;
  cfg.threshold_a = 1e-9;
  const LightPulse a{405, 0.0, 0.05, 0.2};
  const LightPulse b{405, 0.0, 0.1, 0.15};
  const auto rows = truth_table(p, cfg, a, b, 1e-4);
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows) {
    CHECK(std::abs(row.delta_a) < 1e-12);
    CHECK(!row.out);
  }
}

TEST_CASE("truth_table: validates threshold and shared trailing edge") {
  DeviceParams p;
  p.eta = {{405, 1.2e22}};
  const LightPulse a{405, 1e-5, 0.05, 0.2};
  LogicConfig cfg;
  cfg.threshold_a = 0.0;
  CHECK_THROWS_AS(truth_table(p, cfg, a, a, 1e-4), ValidationError);
  cfg.threshold_a = 1e-9;
  const LightPulse late{405, 1e-5, 0.1, 0.2};  // different trailing edge
  CHECK_THROWS_AS(truth_table(p, cfg, a, late, 1e-4), ValidationError);
}
