#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "optosyn/device.hpp"

namespace optosyn {

enum class TargetKind { Equal, AtMost, AtLeast };

/* One calibration objective term.  The residual is the tolerance-scaled
   miss: (predicted - target)/tolerance for Equal, one-sided for the
   inequality kinds (zero inside the admissible region). */
struct CalibrationTarget {
  std::string name;
  std::function<double(const DeviceParams&, double dt)> predictor;
  TargetKind kind = TargetKind::Equal;
  double target_value = 0.0;
  double weight = 1.0;     // multiplies the squared residual
  double tolerance = 1.0;  // > 0, residual scale
};

/* Box constraint on one named parameter field.  lo == hi freezes the
   field at that value; lo < hi frees it for the search. */
struct FieldBound {
  std::string field;
  double lo = 0.0;
  double hi = 0.0;
};

struct TargetResidual {
  std::string name;
  double predicted = 0.0;
  double target = 0.0;
  double residual = 0.0;  // tolerance-scaled miss
};

struct CalibrationResult {
  DeviceParams params;
  std::vector<TargetResidual> residuals;
  double objective = 0.0;
  int evaluations = 0;
  bool budget_exhausted = false;             // ran out of evaluations, kept the best
  std::vector<double> accepted_objectives;   // best objective after each improvement
};

/* Downhill-simplex search over the fields freed by `bounds` (log-scaled
   where the box is positive), minimizing the weighted sum of squared
   residuals.  Predictors that throw a NumericalError mark the candidate
   infeasible rather than aborting the search.  Throws InfeasibleBounds
   when a box is inverted or excludes the initial value. */
CalibrationResult calibrate(const DeviceParams& initial,
                            const std::vector<FieldBound>& bounds,
                            const std::vector<CalibrationTarget>& targets, int budget,
                            std::uint64_t seed, double dt);

/* named access to the tunable scalar fields; alpha_fast keeps the pool
   fractions summing to one, eta_<nm> addresses one channel's efficiency */
double get_field(const DeviceParams& p, const std::string& field);
void set_field(DeviceParams& p, const std::string& field, double value);
std::vector<std::string> calibratable_fields();

/* scalar behavioural predictors used by the default target set */
double predict_ppf_6ms(const DeviceParams& p, double dt);
double predict_v_cross_405_10uw(const DeviceParams& p, double dt);
double predict_weight_vg0(const DeviceParams& p, double dt);
double predict_weight_vg20(const DeviceParams& p, double dt);
double predict_ltp_retention_vg_m20(const DeviceParams& p, double dt);
double predict_stp_residual_vg0(const DeviceParams& p, double dt);

std::vector<CalibrationTarget> default_targets();
std::vector<FieldBound> default_bounds();

/* strict JSON persistence for parameter sets; load validates the result */
DeviceParams load_params(const std::string& path);
void save_params(const DeviceParams& p, const std::string& path);

std::string residual_report_json(const CalibrationResult& result);

}  // namespace optosyn
