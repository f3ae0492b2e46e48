#pragma once

#include <functional>

#include <Eigen/Core>

namespace mfdgp {

struct SimplexOptions {
  double initial_step = 0.5;
  double size_tolerance = 1e-6;
  int max_iterations = 500;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value;
  int iterations;
};

/// Derivative-free Nelder-Mead minimization (GSL nmsimplex2). The objective may
/// return +inf to reject a point.
MinimizeResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& start,
                           const SimplexOptions& options = {});

/// Compass search maximizing `f` inside the unit box [0,1]^d. Step halves on
/// every failed sweep until it drops below `tolerance`.
MinimizeResult pattern_search_max(const std::function<double(const Eigen::VectorXd&)>& f,
                                  const Eigen::VectorXd& start, double initial_step, double tolerance,
                                  int max_evaluations = 2000);

}  // namespace mfdgp
