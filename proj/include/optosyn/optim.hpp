#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace optosyn {

struct SimplexOptions {
  int max_evals = 2000;
  double f_tol_rel = 1e-12;    // stop when the simplex values collapse
  double x_tol_rel = 1e-10;    // stop when the simplex itself collapses
  double init_step_rel = 0.25; // initial vertex spread per coordinate
  std::uint64_t seed = 0;      // perturbs the initial simplex deterministically
  int restarts = 2;            // re-seeded descents around the best point
};

struct SimplexResult {
  std::vector<double> x;
  double fx = 0.0;
  int evals = 0;
  bool converged = false;
  std::vector<double> accepted;  // best objective after each improving step
};

/* Nelder-Mead downhill simplex with box projection.  Deterministic for a
   fixed seed.  Bounds may be empty (unconstrained) or one [lo, hi] pair
   per coordinate; candidates are projected onto the box. */
SimplexResult minimize_simplex(const std::function<double(std::span<const double>)>& f,
                               std::vector<double> x0, const SimplexOptions& opt,
                               std::span<const std::pair<double, double>> bounds = {});

}  // namespace optosyn
