#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "optosyn/calibration.hpp"
#include "optosyn/errors.hpp"
#include "optosyn/simulator.hpp"

using namespace optosyn;

namespace {

DeviceParams base_params() {
  DeviceParams p;
  p.eta = {{405, 1.2e22}, {532, 7e21}};
  return p;
}

CalibrationTarget equal_target(const std::string& name,
                               double (*pred)(const DeviceParams&, double),
                               double target, double tol) {
  return {name, pred, TargetKind::Equal, target, 1.0, tol};
}

}  // namespace

TEST_CASE("field registry: every scalar field round-trips through get/set") {
  auto p = base_params();
  for (const auto& name : calibratable_fields()) {
    if (name == "eta_<nm>") continue;
    const double v = get_field(p, name);
    set_field(p, name, v * 1.5);
    CHECK(get_field(p, name) == doctest::Approx(v * 1.5).epsilon(1e-15));
    set_field(p, name, v);
  }
  CHECK_THROWS_AS(get_field(p, "no_such_field"), ValidationError);
  CHECK_THROWS_AS(set_field(p, "eta_x5", 1.0), ValidationError);
}

TEST_CASE("field registry: alpha_fast keeps the fractions summing to one") {
  auto p = base_params();
  set_field(p, "alpha_fast", 0.6);
  CHECK(p.alpha_fast == 0.6);
  CHECK(p.alpha_slow == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("field registry: eta channels are addressable by wavelength") {
  auto p = base_params();
  CHECK(get_field(p, "eta_405") == 1.2e22);
  set_field(p, "eta_650", 3e21);
  CHECK(p.eta.at(650) == 3e21);
  CHECK_THROWS_AS(get_field(p, "eta_999"), ValidationError);
}

TEST_CASE("calibrate: frozen bounds pin fields and skip the search") {
  const auto p = base_params();
  const auto target = equal_target(
      "dirac", [](const DeviceParams& q, double) { return q.v_dirac0; }, 8.0, 1.0);
  const auto result = calibrate(p, {{"v_dirac0", 8.0, 8.0}}, {target}, 100, 0, 1e-4);
  CHECK(result.params.v_dirac0 == 8.0);
  CHECK(result.evaluations == 1);
  CHECK(result.objective == 0.0);
  CHECK(!result.budget_exhausted);
}

TEST_CASE("calibrate: infeasible boxes are rejected up front") {
  const auto p = base_params();
  const auto target = equal_target(
      "dirac", [](const DeviceParams& q, double) { return q.v_dirac0; }, 8.0, 1.0);
  CHECK_THROWS_AS(calibrate(p, {{"v_dirac0", 20.0, 4.0}}, {target}, 100, 0, 1e-4),
                  InfeasibleBounds);
  CHECK_THROWS_AS(calibrate(p, {{"v_dirac0", 10.0, 20.0}}, {target}, 100, 0, 1e-4),
                  InfeasibleBounds);
  CHECK_THROWS_AS(
      calibrate(p, {{"v_dirac0", 4.0, 20.0}, {"v_dirac0", 4.0, 20.0}}, {target}, 100, 0,
                1e-4),
      ValidationError);
  CHECK_THROWS_AS(calibrate(p, {}, {}, 100, 0, 1e-4), ValidationError);
}

TEST_CASE("calibrate: recovers a synthetic two-field optimum inside the box") {
  const auto p = base_params();
  const std::vector<CalibrationTarget> targets = {
      equal_target("dirac", [](const DeviceParams& q, double) { return q.v_dirac0; },
                   12.0, 0.5),
      equal_target("tfast", [](const DeviceParams& q, double) { return q.tau_fast; },
                   4e-3, 1e-3),
  };
  const auto result = calibrate(
      p, {{"v_dirac0", 4.0, 20.0}, {"tau_fast", 1e-3, 0.02}}, targets, 600, 7, 1e-4);
  CHECK(result.params.v_dirac0 == doctest::Approx(12.0).epsilon(1e-3));
  CHECK(result.params.tau_fast == doctest::Approx(4e-3).epsilon(1e-3));
  CHECK(result.objective < 1e-8);
  for (std::size_t i = 1; i < result.accepted_objectives.size(); ++i)
    CHECK(result.accepted_objectives[i] <= result.accepted_objectives[i - 1]);
  for (const auto& r : result.residuals) CHECK(std::abs(r.residual) < 1e-3);
}

TEST_CASE("calibrate: satisfied one-sided targets cost nothing") {
  const auto p = base_params();
  const std::vector<CalibrationTarget> targets = {
      {"cap", [](const DeviceParams& q, double) { return q.v_dirac0; },
       TargetKind::AtMost, 20.0, 1.0, 1.0},
      {"floor", [](const DeviceParams& q, double) { return q.v_dirac0; },
       TargetKind::AtLeast, 4.0, 1.0, 1.0},
  };
  const auto result = calibrate(p, {{"v_dirac0", 4.0, 20.0}}, targets, 120, 0, 1e-4);
  CHECK(result.objective == 0.0);
  for (const auto& r : result.residuals) CHECK(r.residual == 0.0);
}

TEST_CASE("calibrate: tiny budgets flag exhaustion but keep the best point") {
  const auto p = base_params();
  const std::vector<CalibrationTarget> targets = {
      equal_target("dirac", [](const DeviceParams& q, double) { return q.v_dirac0; },
                   12.0, 0.5),
  };
  const auto result = calibrate(p, {{"v_dirac0", 4.0, 20.0}}, targets, 5, 0, 1e-4);
  CHECK(result.budget_exhausted);
  CHECK(result.evaluations >= 3);
  CHECK(std::abs(result.params.v_dirac0 - 12.0) <= std::abs(8.0 - 12.0));
}

TEST_CASE("calibrate: a predictor that cannot be evaluated at all propagates") {
  const auto p = base_params();
  const std::vector<CalibrationTarget> targets = {
      {"impossible",
       [](const DeviceParams&, double) -> double {
         throw NoCrossing("no crossover in the bracket");
       },
       TargetKind::Equal, 0.0, 1.0, 1.0},
  };
  CHECK_THROWS_AS(calibrate(p, {{"v_dirac0", 4.0, 20.0}}, targets, 50, 0, 1e-4),
                  NumericalError);
}

TEST_CASE("params files: save/load round-trip preserves the digest") {
  const auto p = base_params();
  const auto path =
      (std::filesystem::temp_directory_path() / "optosyn_params_rt.json").string();
  save_params(p, path);
  const auto q = load_params(path);
  CHECK(params_digest(q) == params_digest(p));
  std::remove(path.c_str());
}

TEST_CASE("params files: strict schema") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto bad1 = (dir / "optosyn_params_bad1.json").string();
  {
    std::ofstream out(bad1);
    out << "{\"v_dirac0\": 8.0}";
  }
  CHECK_THROWS_AS(load_params(bad1), SchemaError);  // missing fields
  const auto good = (dir / "optosyn_params_good.json").string();
  save_params(base_params(), good);
  const auto bad2 = (dir / "optosyn_params_bad2.json").string();
  {
    std::ifstream in(good);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    std::ofstream out(bad2);
    out << text.insert(1, "\"bogus_field\": 1,");
  }
  CHECK_THROWS_AS(load_params(bad2), SchemaError);
  std::remove(bad1.c_str());
  std::remove(bad2.c_str());
  std::remove(good.c_str());
}

TEST_CASE("residual report carries the search record") {
  const auto p = base_params();
  const auto target = equal_target(
      "dirac", [](const DeviceParams& q, double) { return q.v_dirac0; }, 8.0, 1.0);
  const auto result = calibrate(p, {}, {target}, 10, 0, 1e-4);
  const auto report = residual_report_json(result);
  CHECK(report.find("\"objective\"") != std::string::npos);
  CHECK(report.find("\"dirac\"") != std::string::npos);
  CHECK(report.find("\"budget_exhausted\": false") != std::string::npos);
}
