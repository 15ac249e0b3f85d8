#include "optosyn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "optosyn/errors.hpp"

namespace optosyn {

namespace {

void project(std::vector<double>& x, std::span<const std::pair<double, double>> bounds) {
  if (bounds.empty()) return;
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = std::clamp(x[i], bounds[i].first, bounds[i].second);
}

}  // namespace

SimplexResult minimize_simplex(const std::function<double(std::span<const double>)>& f,
                               std::vector<double> x0, const SimplexOptions& opt,
                               std::span<const std::pair<double, double>> bounds) {
  const std::size_t n = x0.size();
  if (n == 0) throw ValidationError("minimize_simplex: empty parameter vector");
  if (!bounds.empty() && bounds.size() != n)
    throw ValidationError("minimize_simplex: bounds size does not match x0");

  SimplexResult result;
  result.x = x0;
  project(result.x, bounds);

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> jitter(0.75, 1.25);

  auto evaluate = [&](std::vector<double> x) {
    project(x, bounds);
    ++result.evals;
    return std::pair{f(std::span<const double>(x)), std::move(x)};
  };

  auto [f_best, x_best] = evaluate(result.x);
  result.fx = f_best;
  result.x = x_best;
  result.accepted.push_back(result.fx);

  for (int round = 0; round <= opt.restarts; ++round) {
    if (result.evals >= opt.max_evals) break;

    /* simplex around the current best point */
    std::vector<std::vector<double>> xs(n + 1, result.x);
    std::vector<double> fs(n + 1);
    fs[0] = result.fx;
    const double shrink_round = std::pow(0.25, round);
    for (std::size_t i = 0; i < n; ++i) {
      double step = opt.init_step_rel * shrink_round * jitter(rng) *
                    std::max(std::abs(result.x[i]), 1e-8);
      if (!bounds.empty() && result.x[i] + step > bounds[i].second) step = -step;
      xs[i + 1][i] += step;
      auto [fv, xv] = evaluate(xs[i + 1]);
      fs[i + 1] = fv;
      xs[i + 1] = xv;
    }

    while (result.evals < opt.max_evals) {
      /* order vertices best..worst */
      std::vector<std::size_t> order(n + 1);
      for (std::size_t i = 0; i <= n; ++i) order[i] = i;
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
      const std::size_t best = order[0], worst = order[n], second = order[n - 1];

      if (fs[best] < result.fx) {
        result.fx = fs[best];
        result.x = xs[best];
        result.accepted.push_back(result.fx);
      }

      const double f_spread = std::abs(fs[worst] - fs[best]);
      double x_spread = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double scale = std::max(std::abs(xs[best][i]), 1e-8);
        x_spread = std::max(x_spread, std::abs(xs[worst][i] - xs[best][i]) / scale);
      }
      if (f_spread <= opt.f_tol_rel * (std::abs(fs[best]) + 1e-300) ||
          x_spread <= opt.x_tol_rel) {
        result.converged = true;
        break;
      }

      std::vector<double> centroid(n, 0.0);
      for (std::size_t k = 0; k <= n; ++k) {
        if (k == worst) continue;
        for (std::size_t i = 0; i < n; ++i) centroid[i] += xs[k][i];
      }
      for (double& c : centroid) c /= static_cast<double>(n);

      auto blend = [&](double coeff) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i)
          x[i] = centroid[i] + coeff * (centroid[i] - xs[worst][i]);
        return x;
      };

      auto [f_refl, x_refl] = evaluate(blend(1.0));
      if (f_refl < fs[best]) {
        auto [f_exp, x_exp] = evaluate(blend(2.0));
        if (f_exp < f_refl) {
          xs[worst] = x_exp;
          fs[worst] = f_exp;
        } else {
          xs[worst] = x_refl;
          fs[worst] = f_refl;
        }
        continue;
      }
      if (f_refl < fs[second]) {
        xs[worst] = x_refl;
        fs[worst] = f_refl;
        continue;
      }
      auto [f_con, x_con] = evaluate(blend(f_refl < fs[worst] ? 0.5 : -0.5));
      if (f_con < std::min(f_refl, fs[worst])) {
        xs[worst] = x_con;
        fs[worst] = f_con;
        continue;
      }
      /* shrink toward the best vertex */
      for (std::size_t k = 0; k <= n && result.evals < opt.max_evals; ++k) {
        if (k == best) continue;
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i)
          x[i] = xs[best][i] + 0.5 * (xs[k][i] - xs[best][i]);
        auto [fv, xv] = evaluate(x);
        xs[k] = xv;
        fs[k] = fv;
      }
    }

    /* fold in a vertex improved right at the evaluation budget */
    for (std::size_t k = 0; k <= n; ++k) {
      if (fs[k] < result.fx) {
        result.fx = fs[k];
        result.x = xs[k];
        result.accepted.push_back(result.fx);
      }
    }
  }

  return result;
}

}  // namespace optosyn
