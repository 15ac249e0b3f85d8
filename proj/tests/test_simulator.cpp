#include <doctest.h>

#include <cmath>

#include "optosyn/device.hpp"
#include "optosyn/errors.hpp"
#include "optosyn/simulator.hpp"
#include "optosyn/stimulus.hpp"

using namespace optosyn;

namespace {

DeviceParams test_params() {
  DeviceParams p;
  p.eta = {{405, 1.2e22}, {532, 7e21}};
  return p;
}

StimulusProtocol single_pulse(double power_w, double t_start, double duration,
                              double t_end, double v_g) {
  StimulusProtocol p;
  p.channels = {405};
  p.pulses = {{405, power_w, t_start, duration}};
  p.default_v_g = v_g;
  p.t_end = t_end;
  p.settle_time = 0.1;
  return p;
}

/* invert channel_current for mu_e == mu_h at v_g == v_dirac0, where the
   net density equals the summed pool density */
double invert_density(double i_a, const DeviceParams& p) {
  const double k = (p.width / p.length) * kElementaryCharge * p.v_ds;
  const double s = i_a / k / p.mu_e;
  const double n_net = std::sqrt(std::max(0.0, s * s - p.n_residual * p.n_residual));
  return p.n_clamp * std::atanh(n_net / p.n_clamp);
}

}  // namespace

TEST_CASE("dark protocol holds the equilibrium current for the whole run") {
  auto p = test_params();
  StimulusProtocol proto;
  proto.channels = {405};
  proto.default_v_g = -5.0;
  proto.t_end = 0.2;
  const auto trace = integrate(p, proto, 1e-4);
  REQUIRE(trace.size() == 2001);
  const double i0 = trace.current_a.front();
  for (double i_a : trace.current_a) CHECK(i_a == i0);  // exact fixed point
}

TEST_CASE("post-pulse decay matches the single-pool exponential to 1e-6") {
  auto p = test_params();
  p.alpha_fast = 1.0;
  p.alpha_slow = 0.0;
  p.c_trap0 = 0.0;   // trap pool disabled
  p.mu_e = 0.1;
  p.mu_h = 0.1;
  const double dt = 1e-4;
  const auto proto = single_pulse(5e-5, 0.05, 0.005, 0.3, p.v_dirac0);
  const auto trace = integrate(p, proto, dt);

  const std::size_t i_off = trace.index_at(0.055);
  const double n0 = invert_density(trace.current_a[i_off], p);
  REQUIRE(n0 > 1e14);
  for (std::size_t i = i_off; i < trace.size(); ++i) {
    const double expected = n0 * std::exp(-(trace.time_at(i) - 0.055) / p.tau_fast);
    if (expected < 1e-3 * n0) break;
    const double got = invert_density(trace.current_a[i], p);
    CHECK(std::abs(got - expected) / expected < 1e-6);
  }
}

TEST_CASE("steady state agrees with long integration under constant light") {
  auto p = test_params();
  p.tau_fast = 1e-4;
  p.tau_slow = 1e-3;
  p.tau_trap_hold = 0.1;  // keeps the run short; still 100x tau_slow
  p.tau_trap_reset = 1e-3;
  StimulusProtocol proto;
  proto.channels = {405};
  proto.pulses = {{405, 3e-5, 0.0, 1.0}};
  proto.default_v_g = -10.0;  // capture active
  proto.t_end = 1.0;
  const auto trace = integrate(p, proto, 1e-5);

  /* recover the final state by stepping a copy next to the fixed point */
  const auto ss = steady_state(p, -10.0, {{405, 3e-5}});
  DeviceState probe;
  Illumination light{{405, 3e-5}};
  for (int k = 0; k < 100000; ++k) probe = rk4_step(probe, -10.0, light, 1e-5, p);
  CHECK(std::abs(probe.n_fast - ss.n_fast) / ss.n_fast < 1e-3);
  CHECK(std::abs(probe.n_slow - ss.n_slow) / ss.n_slow < 1e-3);
  CHECK(std::abs(probe.n_trap - ss.n_trap) / ss.n_trap < 1e-3);

  /* and the trace current settles at the fixed-point current */
  const double i_ss = channel_current(ss, -10.0, p);
  CHECK(std::abs(trace.current_a.back() - i_ss) / i_ss < 1e-3);
}

TEST_CASE("steady state in the dark is the zero state") {
  const auto ss = steady_state(test_params(), 0.0, {});
  CHECK(ss.n_fast == 0.0);
  CHECK(ss.n_slow == 0.0);
  CHECK(ss.n_trap == 0.0);
}

TEST_CASE("integration is deterministic run to run") {
  auto p = test_params();
  const auto proto = single_pulse(5e-5, 0.05, 0.005, 0.2, 0.0);
  const auto a = integrate(p, proto, 1e-4);
  const auto b = integrate(p, proto, 1e-4);
  CHECK(a.digest == b.digest);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.current_a[i] == b.current_a[i]);
}

TEST_CASE("no response before the first pulse") {
  auto p = test_params();
  const auto proto = single_pulse(5e-5, 0.05, 0.005, 0.2, 0.0);
  const auto trace = integrate(p, proto, 1e-4);
  const double i0 = trace.current_a.front();
  for (std::size_t i = 0; i <= trace.index_at(0.05); ++i)
    CHECK(trace.current_a[i] == i0);
  CHECK(trace.current_a[trace.index_at(0.06)] != i0);
}

TEST_CASE("off-grid pulse edges are honored independently of dt") {
  auto p = test_params();
  /* edges at 50.3 ms and 60.4 ms never land on either sample grid */
  const auto proto = single_pulse(5e-5, 0.0503, 0.0101, 0.2, 0.0);
  const auto coarse = integrate(p, proto, 5e-4);
  const auto fine = integrate(p, proto, 2.5e-4);
  for (double t : {0.055, 0.06, 0.065, 0.08, 0.1, 0.15}) {
    const double a = coarse.current_a[coarse.index_at(t)];
    const double b = fine.current_a[fine.index_at(t)];
    CHECK(std::abs(a - b) / std::abs(b) < 1e-6);
  }
}

TEST_CASE("protocol v_ds overrides the device default linearly") {
  auto p = test_params();
  auto proto = single_pulse(5e-5, 0.05, 0.005, 0.2, 0.0);
  proto.v_ds = 0.25;
  const auto half = integrate(p, proto, 1e-4);
  proto.v_ds = 0.5;
  const auto full = integrate(p, proto, 1e-4);
  CHECK(half.current_a.front() ==
        doctest::Approx(0.5 * full.current_a.front()).epsilon(1e-15));
}

TEST_CASE("step-size contract is enforced") {
  auto p = test_params();
  p.tau_fast = 6e-3;  // dt must then be <= 0.6 ms
  const auto proto = single_pulse(5e-5, 0.05, 0.005, 0.2, 0.0);
  CHECK_THROWS_AS(integrate(p, proto, 1e-3), StepTooLarge);
  const auto brief = single_pulse(5e-5, 0.05, 4e-4, 0.2, 0.0);  // pulse < 5 dt
  CHECK_THROWS_AS(integrate(p, brief, 1e-4), StepTooLarge);
}

TEST_CASE("t_end must sit on the sample grid") {
  auto p = test_params();
  auto proto = single_pulse(5e-5, 0.05, 0.005, 0.2, 0.0);
  proto.t_end = 0.20005;
  CHECK_THROWS_AS(integrate(p, proto, 1e-4), ValidationError);
}

TEST_CASE("protocol channels need eta coverage") {
  auto p = test_params();
  p.eta.erase(405);
  const auto proto = single_pulse(5e-5, 0.05, 0.005, 0.2, 0.0);
  CHECK_THROWS_WITH_AS(integrate(p, proto, 1e-4), doctest::Contains("405"),
                       ValidationError);
}

TEST_CASE("digest separates runs that differ in any ingredient") {
  auto p = test_params();
  const auto proto = single_pulse(5e-5, 0.05, 0.005, 0.2, 0.0);
  const auto base = protocol_digest(p, proto, 1e-4);
  CHECK(base.size() == 16);
  CHECK(protocol_digest(p, proto, 5e-5) != base);
  auto p2 = p;
  p2.tau_fast *= 1.0000001;
  CHECK(protocol_digest(p2, proto, 1e-4) != base);
  auto proto2 = proto;
  proto2.pulses[0].power_w *= 1.0000001;
  CHECK(protocol_digest(p, proto2, 1e-4) != base);
}

TEST_CASE("trace sample lookup rejects off-grid times") {
  auto p = test_params();
  const auto proto = single_pulse(5e-5, 0.05, 0.005, 0.2, 0.0);
  const auto trace = integrate(p, proto, 1e-4);
  CHECK(trace.index_at(0.05) == 500);
  CHECK_THROWS_AS(trace.index_at(0.05003), ValidationError);
  CHECK_THROWS_AS(trace.index_at(0.3), ValidationError);
}

TEST_CASE("events mark pulse and gate edges in time order") {
  auto p = test_params();
  auto proto = single_pulse(5e-5, 0.05, 0.005, 0.3, 0.0);
  /* segment times exactly representable so the edge times compare == */
  proto.gate_segments = {{40.0, 0.125, 0.125}};
  const auto trace = integrate(p, proto, 1e-4);
  REQUIRE(trace.events.size() == 4);
  CHECK(trace.events[0] == std::pair<double, std::string>{0.05, "pulse_on 405nm"});
  CHECK(trace.events[1] == std::pair<double, std::string>{0.055, "pulse_off 405nm"});
  CHECK(trace.events[2] == std::pair<double, std::string>{0.125, "gate 40 V"});
  CHECK(trace.events[3] == std::pair<double, std::string>{0.25, "gate 0 V"});
}
