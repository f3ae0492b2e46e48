#include "mfdgp/minimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

namespace mfdgp {

namespace {

using Objective = std::function<double(const Eigen::VectorXd&)>;

double gsl_trampoline(const gsl_vector* v, void* params) {
  const auto& f = *static_cast<const Objective*>(params);
  Eigen::VectorXd x(static_cast<Eigen::Index>(v->size));
  for (std::size_t i = 0; i < v->size; ++i) x[static_cast<Eigen::Index>(i)] = gsl_vector_get(v, i);
  double value = f(x);
  // GSL's simplex copes with large finite values but not NaN.
  if (!std::isfinite(value)) return std::numeric_limits<double>::max() / 16;
  return value;
}

struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
struct MinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};

}  // namespace

MinimizeResult nelder_mead(const Objective& f, const Eigen::VectorXd& start, const SimplexOptions& options) {
  const auto n = static_cast<std::size_t>(start.size());
  if (n == 0) return {start, f(start), 0};

  std::unique_ptr<gsl_vector, VectorDeleter> x0(gsl_vector_alloc(n));
  std::unique_ptr<gsl_vector, VectorDeleter> step(gsl_vector_alloc(n));
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(x0.get(), i, start[static_cast<Eigen::Index>(i)]);
    gsl_vector_set(step.get(), i, options.initial_step);
  }

  Objective copy = f;
  gsl_multimin_function fn;
  fn.n = n;
  fn.f = &gsl_trampoline;
  fn.params = &copy;

  std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter> minimizer(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n));
  gsl_multimin_fminimizer_set(minimizer.get(), &fn, x0.get(), step.get());

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (gsl_multimin_fminimizer_iterate(minimizer.get()) != GSL_SUCCESS) break;
    double size = gsl_multimin_fminimizer_size(minimizer.get());
    if (gsl_multimin_test_size(size, options.size_tolerance) == GSL_SUCCESS) break;
  }

  Eigen::VectorXd best(static_cast<Eigen::Index>(n));
  const gsl_vector* xb = gsl_multimin_fminimizer_x(minimizer.get());
  for (std::size_t i = 0; i < n; ++i) best[static_cast<Eigen::Index>(i)] = gsl_vector_get(xb, i);
  return {best, f(best), iter};
}

MinimizeResult pattern_search_max(const Objective& f, const Eigen::VectorXd& start, double initial_step,
                                  double tolerance, int max_evaluations) {
  Eigen::VectorXd x = start.cwiseMax(0.0).cwiseMin(1.0);
  double best = f(x);
  int evaluations = 1;
  double step = initial_step;

  while (step >= tolerance && evaluations < max_evaluations) {
    bool improved = false;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      for (double sign : {1.0, -1.0}) {
        Eigen::VectorXd trial = x;
        trial[i] = std::clamp(x[i] + sign * step, 0.0, 1.0);
        if (trial[i] == x[i]) continue;
        double value = f(trial);
        ++evaluations;
        if (value > best) {
          best = value;
          x = std::move(trial);
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return {x, best, evaluations};
}

}  // namespace mfdgp
