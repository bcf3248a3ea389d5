#include "mpbt/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mpbt/errors.hpp"

namespace mpbt {

NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& start, const NelderMeadOptions& opts) {
  const int n = static_cast<int>(start.size());
  if (n < 1) throw StructureError("nelder_mead: empty start point");

  NelderMeadResult res;
  res.x = start;

  std::vector<Eigen::VectorXd> pts;
  std::vector<double> vals;
  pts.reserve(static_cast<std::size_t>(n) + 1);
  long evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = objective(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  pts.push_back(start);
  vals.push_back(eval(start));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd p = start;
    p(i) += opts.initial_step;
    pts.push_back(std::move(p));
    vals.push_back(eval(pts.back()));
  }

  std::vector<int> order(static_cast<std::size_t>(n) + 1);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return vals[static_cast<std::size_t>(a)] <
                                         vals[static_cast<std::size_t>(b)]; });
    const int best = order.front();
    const int worst = order.back();
    const int second_worst = order[order.size() - 2];

    res.x = pts[static_cast<std::size_t>(best)];
    res.fx = vals[static_cast<std::size_t>(best)];
    res.iterations = iter;

    // Convergence: simplex small in both value spread and extent.
    double diameter = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      diameter = std::max(
          diameter, (pts[i] - pts[static_cast<std::size_t>(best)])
                        .cwiseAbs()
                        .maxCoeff());
    const double spread = vals[static_cast<std::size_t>(worst)] -
                          vals[static_cast<std::size_t>(best)];
    if (diameter <= opts.x_tol &&
        (spread <= opts.f_tol * (1.0 + std::abs(res.fx)) ||
         !std::isfinite(spread))) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= n; ++i)
      if (order[static_cast<std::size_t>(i)] != worst)
        centroid += pts[static_cast<std::size_t>(
            order[static_cast<std::size_t>(i)])];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd& xw = pts[static_cast<std::size_t>(worst)];
    const Eigen::VectorXd xr = centroid + (centroid - xw);
    const double fr = eval(xr);

    if (fr < vals[static_cast<std::size_t>(best)]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - xw);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[static_cast<std::size_t>(worst)] = xe;
        vals[static_cast<std::size_t>(worst)] = fe;
      } else {
        pts[static_cast<std::size_t>(worst)] = xr;
        vals[static_cast<std::size_t>(worst)] = fr;
      }
    } else if (fr < vals[static_cast<std::size_t>(second_worst)]) {
      pts[static_cast<std::size_t>(worst)] = xr;
      vals[static_cast<std::size_t>(worst)] = fr;
    } else {
      const bool outside = fr < vals[static_cast<std::size_t>(worst)];
      const Eigen::VectorXd xc =
          outside ? (centroid + 0.5 * (xr - centroid)).eval()
                  : (centroid + 0.5 * (xw - centroid)).eval();
      const double fc = eval(xc);
      const double bar =
          outside ? fr : vals[static_cast<std::size_t>(worst)];
      if (fc <= bar) {
        pts[static_cast<std::size_t>(worst)] = xc;
        vals[static_cast<std::size_t>(worst)] = fc;
      } else {
        // Shrink toward the best point.
        for (int i = 0; i <= n; ++i) {
          const int idx = order[static_cast<std::size_t>(i)];
          if (idx == best) continue;
          pts[static_cast<std::size_t>(idx)] =
              pts[static_cast<std::size_t>(best)] +
              0.5 * (pts[static_cast<std::size_t>(idx)] -
                     pts[static_cast<std::size_t>(best)]);
          vals[static_cast<std::size_t>(idx)] =
              eval(pts[static_cast<std::size_t>(idx)]);
        }
      }
    }
  }

  // Final ranking in case the loop ended on budget.
  std::size_t best = 0;
  for (std::size_t i = 1; i < vals.size(); ++i)
    if (vals[i] < vals[best]) best = i;
  res.x = pts[best];
  res.fx = vals[best];
  res.evaluations = evals;
  return res;
}

}  // namespace mpbt
