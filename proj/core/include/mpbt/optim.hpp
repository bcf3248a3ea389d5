#pragma once

#include <Eigen/Dense>
#include <functional>

namespace mpbt {

struct NelderMeadOptions {
  int max_iterations = 4000;
  double x_tol = 1e-7;        // simplex diameter in parameter space
  double f_tol = 1e-10;       // spread of values across the simplex
  double initial_step = 0.4;  // per-coordinate offset building the simplex
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double fx = 0.0;
  int iterations = 0;
  long evaluations = 0;
  bool converged = false;
};

// Downhill simplex minimizer (reflection 1, expansion 2, contraction 0.5,
// shrink 0.5) for smooth low-dimensional objectives. The objective must
// return +infinity or a huge value outside its domain rather than throw.
NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& start, const NelderMeadOptions& opts = {});

}  // namespace mpbt
