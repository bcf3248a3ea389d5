#pragma once

// Random admissible parameter sets for property tests.

#include <cmath>
#include <stdexcept>

#include "mpbt/params.hpp"
#include "mpbt/rng.hpp"

namespace testsupport {

// Rates log-uniform in [0.05, 2], root distribution from normalized
// exponentials; resamples until the admissibility checks all pass (the
// genericity determinant rarely objects, rate ties never survive).
inline mpbt::ModelParams random_valid_params(int m, mpbt::Rng& rng) {
  const double lo = std::log(0.05), hi = std::log(2.0);
  auto draw_rate = [&] { return std::exp(lo + (hi - lo) * rng.uniform()); };
  for (int attempt = 0; attempt < 200; ++attempt) {
    Eigen::VectorXd lambda(m), pi(m);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) lambda(i) = draw_rate();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        if (i != j) s(i, j) = draw_rate();
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
      pi(i) = rng.std_exponential() + 1e-12;
      total += pi(i);
    }
    pi /= total;
    pi(m - 1) += 1.0 - pi.sum();  // absorb normalization roundoff
    const mpbt::ModelParams params = mpbt::ModelParams::create(pi, lambda, s);
    if (mpbt::validate(params).all_passed()) return params;
  }
  throw std::runtime_error("random_valid_params: no admissible draw in 200 tries");
}

}  // namespace testsupport
