#include "mpbt/edge_process.hpp"

#include <cmath>

#include "mpbt/errors.hpp"
#include "mpbt/linalg.hpp"

namespace mpbt {

namespace {

void require_tau(double tau, const char* who) {
  if (!(tau >= 0.0))
    throw StructureError(std::string(who) + ": tau must be nonnegative");
}

}  // namespace

Eigen::MatrixXd transition_matrix(const ModelParams& params, double tau) {
  require_tau(tau, "transition_matrix");
  const int m = params.m;
  const DerivedMatrices d = derive(params);
  const Eigen::MatrixXd Ut = d.U * tau;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  P.topLeftCorner(m, m) = matrix_exp(Ut);
  P.topRightCorner(m, m) = phi(Ut) * d.D * tau;
  P.bottomRightCorner(m, m) = Eigen::MatrixXd::Identity(m, m);
  return P;
}

Eigen::VectorXd speciation_cdf(const ModelParams& params, double tau) {
  require_tau(tau, "speciation_cdf");
  const DerivedMatrices d = derive(params);
  return Eigen::VectorXd::Ones(params.m) -
         matrix_exp(d.U, tau) * Eigen::VectorXd::Ones(params.m);
}

Eigen::VectorXd speciation_density(const ModelParams& params, double tau) {
  require_tau(tau, "speciation_density");
  const DerivedMatrices d = derive(params);
  return matrix_exp(d.U, tau) * params.lambda;
}

Eigen::MatrixXd absorption_probs(const ModelParams& params) {
  const DerivedMatrices d = derive(params);
  // U is strictly diagonally dominant by the speciation rates when every
  // lambda_i > 0, so the solve is safe for admissible parameters.
  return -d.U.partialPivLu().solve(d.D);
}

Eigen::MatrixXd joint_parent_density(const ModelParams& params, double tau) {
  require_tau(tau, "joint_parent_density");
  const DerivedMatrices d = derive(params);
  return matrix_exp(d.U, tau) * d.D;
}

EdgeSampler::EdgeSampler(const ModelParams& params) : m_(params.m) {
  total_rate_.resize(m_);
  inv_total_rate_.resize(m_);
  cut_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
  for (int i = 0; i < m_; ++i) {
    double total = params.lambda(i);
    for (int j = 0; j < m_; ++j)
      if (j != i) total += params.S(i, j);
    total_rate_[i] = total;
    inv_total_rate_[i] = 1.0 / total;
    // Jump CDF for one uniform draw: [0, cut[i*m+i]) speciates, then
    // successive switch targets. cut at the row's own index holds the
    // speciation probability since i -> i is not a jump.
    double acc = total > 0.0 ? params.lambda(i) / total : 1.0;
    cut_[static_cast<std::size_t>(i) * m_ + i] = acc;
    for (int j = 0; j < m_; ++j) {
      if (j == i) continue;
      acc += total > 0.0 ? params.S(i, j) / total : 0.0;
      cut_[static_cast<std::size_t>(i) * m_ + j] = acc;
    }
  }
}

template <typename OnSegment>
EdgeSampler::Outcome EdgeSampler::walk(int start_type, double horizon, Rng& rng,
                                       OnSegment&& on_segment) const {
  if (start_type < 0 || start_type >= m_)
    throw StructureError("sample_edge: start type out of range");
  if (!(horizon > 0.0))
    throw StructureError("sample_edge: horizon must be positive");

  int type = start_type;
  double t = 0.0;
  for (;;) {
    const double wait = rng.std_exponential() * inv_total_rate_[type];
    const double event = t + wait;
    if (!(event < horizon)) {
      on_segment(type, horizon - t);
      return {horizon, EdgeOutcome::Truncated, type};
    }
    const double u = rng.uniform();
    const double* row = cut_.data() + static_cast<std::size_t>(type) * m_;
    if (u < row[type]) {
      on_segment(type, event - t);
      return {event, EdgeOutcome::Speciated, type};
    }
    // u is uniform past the speciation cut; scan the switch cuts. The
    // row's final cut is 1 up to roundoff, so clamp to the last target.
    int next = type;
    for (int j = 0; j < m_; ++j) {
      if (j == type) continue;
      next = j;
      if (u < row[j]) break;
    }
    on_segment(type, event - t);
    t = event;
    type = next;
  }
}

EdgeRealization EdgeSampler::sample(int start_type, double horizon,
                                    Rng& rng) const {
  EdgeRealization out;
  const Outcome res = walk(start_type, horizon, rng,
                           [&out](int type, double duration) {
                             out.segments.push_back({type, duration});
                           });
  out.length = res.length;
  out.outcome = res.outcome;
  out.end_type = res.end_type;
  return out;
}

EdgeSampler::Outcome EdgeSampler::sample_outcome(int start_type, double horizon,
                                                 Rng& rng) const {
  return walk(start_type, horizon, rng, [](int, double) {});
}

EdgeRealization sample_edge(const ModelParams& params, int start_type,
                            double horizon, Rng& rng) {
  return EdgeSampler(params).sample(start_type, horizon, rng);
}

}  // namespace mpbt
