#include "optosyn/device.hpp"

#include <cmath>
#include <string>

#include "optosyn/errors.hpp"

namespace optosyn {

namespace {

void require_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ValidationError(std::string("DeviceParams.") + field + " must be finite and > 0");
}

void require_finite(double v, const char* field) {
  if (!std::isfinite(v))
    throw ValidationError(std::string("DeviceParams.") + field + " must be finite");
}

}  // namespace

void DeviceParams::validate() const {
  require_positive(c_ox_over_e, "c_ox_over_e");
  require_finite(v_dirac0, "v_dirac0");
  require_positive(mu_e, "mu_e");
  require_positive(mu_h, "mu_h");
  require_positive(n_residual, "n_residual");
  require_positive(n_clamp, "n_clamp");
  for (const auto& [nm, eta_nm] : eta) {
    if (!(eta_nm > 0.0) || !std::isfinite(eta_nm))
      throw ValidationError("DeviceParams.eta[" + std::to_string(nm) +
                            "] must be finite and > 0");
  }
  if (!(alpha_fast >= 0.0) || !(alpha_slow >= 0.0))
    throw ValidationError("DeviceParams.alpha_fast/alpha_slow must be >= 0");
  if (std::abs(alpha_fast + alpha_slow - 1.0) > 1e-12)
    throw ValidationError("DeviceParams.alpha_fast + alpha_slow must equal 1");
  require_positive(tau_fast, "tau_fast");
  require_positive(tau_slow, "tau_slow");
  if (!(tau_fast < tau_slow))
    throw ValidationError("DeviceParams.tau_fast must be < tau_slow");
  require_positive(n_sat, "n_sat");
  require_positive(n_traps_total, "n_traps_total");
  if (!(c_trap0 >= 0.0) || !std::isfinite(c_trap0))
    throw ValidationError("DeviceParams.c_trap0 must be finite and >= 0");
  require_positive(v_trap_ref, "v_trap_ref");
  require_positive(tau_trap_hold, "tau_trap_hold");
  require_positive(tau_trap_reset, "tau_trap_reset");
  if (!(tau_trap_hold >= 100.0 * tau_slow))
    throw ValidationError("DeviceParams.tau_trap_hold must be >= 100 * tau_slow");
  require_finite(v_reset_threshold, "v_reset_threshold");
  require_positive(width, "width");
  require_positive(length, "length");
  if (!(v_ds >= 0.0) || !std::isfinite(v_ds))
    throw ValidationError("DeviceParams.v_ds must be finite and >= 0");
}

CarrierDensities carrier_densities(double n_net, double n_residual) {
  if (!(n_residual > 0.0))
    throw ValidationError("carrier_densities: n_residual must be > 0");
  const double s = std::sqrt(n_residual * n_residual + n_net * n_net);
  return {0.5 * (s + n_net), 0.5 * (s - n_net)};
}

double effective_net_density(const DeviceState& s, double v_g, const DeviceParams& p) {
  const double n_raw =
      p.c_ox_over_e * (v_g - p.v_dirac0) + (s.n_fast + s.n_slow) + s.n_trap;
  return p.n_clamp * std::tanh(n_raw / p.n_clamp);
}

double channel_current(const DeviceState& s, double v_g, const DeviceParams& p) {
  const auto [n_e, n_h] = carrier_densities(effective_net_density(s, v_g, p), p.n_residual);
  return (p.width / p.length) * kElementaryCharge * (p.mu_e * n_e + p.mu_h * n_h) * p.v_ds;
}

double generation_rate(const Illumination& light, const DeviceParams& p) {
  double g = 0.0;
  for (const auto& [nm, power] : light) g += p.eta.at(nm) * power;
  return g;
}

double trap_capture_rate(double v_g, const DeviceParams& p) {
  return p.c_trap0 * std::max(0.0, -v_g / p.v_trap_ref);
}

double trap_release_tau(double v_g, const DeviceParams& p) {
  return v_g > p.v_reset_threshold ? p.tau_trap_reset : p.tau_trap_hold;
}

StateDerivative state_derivative(const DeviceState& s, double v_g,
                                 const Illumination& light, const DeviceParams& p) {
  const double g = generation_rate(light, p);
  const double fill = std::max(0.0, 1.0 - (s.n_fast + s.n_slow) / p.n_sat);
  const double capture = trap_capture_rate(v_g, p) * (s.n_fast + s.n_slow) *
                         (1.0 - s.n_trap / p.n_traps_total);
  return {
      p.alpha_fast * g * fill - s.n_fast / p.tau_fast,
      p.alpha_slow * g * fill - s.n_slow / p.tau_slow,
      capture - s.n_trap / trap_release_tau(v_g, p),
  };
}

DeviceState photo_pool_fixed_point(const Illumination& light, const DeviceParams& p) {
  /* n_tot = g*tau_mix*fill with fill = 1 - n_tot/n_sat solves in closed form;
     each pool then splits as alpha_i * g * fill * tau_i. */
  const double g = generation_rate(light, p);
  const double tau_mix = p.alpha_fast * p.tau_fast + p.alpha_slow * p.tau_slow;
  const double loading = g * tau_mix;
  const double fill = 1.0 / (1.0 + loading / p.n_sat);
  DeviceState s;
  s.n_fast = p.alpha_fast * g * fill * p.tau_fast;
  s.n_slow = p.alpha_slow * g * fill * p.tau_slow;
  s.n_trap = 0.0;
  return s;
}

double v_cross(const DeviceParams& p, const Illumination& light,
               double v_lo, double v_hi) {
  p.validate();
  if (!(v_lo < v_hi))
    throw ValidationError("v_cross: bracket requires v_lo < v_hi");
  const DeviceState lit = photo_pool_fixed_point(light, p);
  const DeviceState dark{};
  auto gap = [&](double v) {
    return channel_current(lit, v, p) - channel_current(dark, v, p);
  };
  double f_lo = gap(v_lo);
  double f_hi = gap(v_hi);
  if (!(f_lo * f_hi < 0.0))
    throw NoCrossing("v_cross: illuminated and dark currents do not cross in [" +
                     std::to_string(v_lo) + ", " + std::to_string(v_hi) + "] V");
  double lo = v_lo, hi = v_hi;
  for (int i = 0; i < 200 && (hi - lo) > 1e-10 * (1.0 + std::abs(lo) + std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = gap(mid);
    if (f_mid == 0.0) return mid;
    if (f_lo * f_mid < 0.0) {
      hi = mid;
    } else {
      lo = mid;
      f_lo = f_mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace optosyn
