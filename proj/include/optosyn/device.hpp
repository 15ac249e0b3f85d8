#pragma once

#include <map>
#include <utility>

namespace optosyn {

inline constexpr double kElementaryCharge = 1.602176634e-19;  // C

/* incident optical power per wavelength channel: nm -> W, powers >= 0 */
using Illumination = std::map<int, double>;

/* Behavioral parameters of one phototransistor pixel.  Photogenerated
   electrons transfer into the channel and shift its carrier balance;
   a fast and a slow pool capture the two observed recovery times, and
   a gate-controlled trap pool holds charge for long-term retention. */
struct DeviceParams {
  double c_ox_over_e = 7.57e14;  // m^-2 V^-1, gate-induced density per volt
  double v_dirac0 = 8.0;         // V, charge-neutrality gate voltage in dark
  double mu_e = 0.08;            // m^2 V^-1 s^-1, electron mobility
  double mu_h = 0.10;            // m^2 V^-1 s^-1, hole mobility
  double n_residual = 1.0e15;    // m^-2, disorder density floor at neutrality
  double n_clamp = 2.5e17;       // m^-2, soft bound on net density (band filling)

  std::map<int, double> eta;     // m^-2 s^-1 W^-1, photo-transfer rate per channel (nm)

  double alpha_fast = 0.75;      // fraction of generation feeding the fast pool
  double alpha_slow = 0.25;      // fraction feeding the slow pool, sums to 1 with alpha_fast
  double tau_fast = 1.1e-2;      // s, fast pool recovery time
  double tau_slow = 4.5e-2;      // s, slow pool recovery time, > tau_fast
  double n_sat = 1.2e16;         // m^-2, shared pool capacity

  double n_traps_total = 5.0e15;    // m^-2, trap pool capacity
  double c_trap0 = 0.25;            // s^-1, capture coefficient per unit of -v_g/v_trap_ref
  double v_trap_ref = 10.0;         // V, gate scale normalizing trap capture
  double tau_trap_hold = 2000.0;    // s, trap release time at holding gates, >= 100 tau_slow
  double tau_trap_reset = 0.01;     // s, trap release time above the reset threshold
  double v_reset_threshold = 25.0;  // V, gate voltage that switches release to fast

  double width = 90e-6;   // m, channel width
  double length = 30e-6;  // m, channel length
  double v_ds = 0.5;      // V, source-drain bias

  /* throws ValidationError naming the offending field */
  void validate() const;
};

/* Areal pool densities, m^-2.  All three stay within [0, capacity]. */
struct DeviceState {
  double n_fast = 0.0;
  double n_slow = 0.0;
  double n_trap = 0.0;
  double t = 0.0;  // s
};

struct StateDerivative {
  double dn_fast = 0.0;  // m^-2 s^-1
  double dn_slow = 0.0;
  double dn_trap = 0.0;
};

struct CarrierDensities {
  double n_e = 0.0;  // m^-2
  double n_h = 0.0;
};

/* Electron/hole sheet densities of the ambipolar channel for a net
   density n_net; n_e - n_h == n_net and neither falls below the
   disorder floor contribution. */
CarrierDensities carrier_densities(double n_net, double n_residual);

/* Net density seen by the channel: gate term plus photo pools plus
   trapped charge, soft-clamped to +-n_clamp. */
double effective_net_density(const DeviceState& s, double v_g, const DeviceParams& p);

/* Drain current, A; strictly positive whenever v_ds > 0. */
double channel_current(const DeviceState& s, double v_g, const DeviceParams& p);

/* total photo-transfer rate for the given illumination, m^-2 s^-1 */
double generation_rate(const Illumination& light, const DeviceParams& p);

/* s^-1; capture is active only for v_g < 0 */
double trap_capture_rate(double v_g, const DeviceParams& p);

/* s; fast release only above the reset threshold */
double trap_release_tau(double v_g, const DeviceParams& p);

StateDerivative state_derivative(const DeviceState& s, double v_g,
                                 const Illumination& light, const DeviceParams& p);

/* Pool densities at the fixed point of state_derivative under constant
   illumination, trap left at its dark value. */
DeviceState photo_pool_fixed_point(const Illumination& light, const DeviceParams& p);

/* Gate voltage where the steady illuminated transfer curve crosses the
   dark one, found by bisection on [v_lo, v_hi].  Throws NoCrossing when
   the bracket endpoints have equal sign. */
double v_cross(const DeviceParams& p, const Illumination& light,
               double v_lo = -50.0, double v_hi = 50.0);

}  // namespace optosyn
