#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "mpbt/params.hpp"
#include "mpbt/rng.hpp"

namespace mpbt {

// Horizon value meaning "run until the edge speciates".
inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

enum class EdgeOutcome { Speciated, Truncated };

// One constant-type stretch of an edge.
struct Segment {
  int type = 0;
  double duration = 0.0;
};

// A sampled edge: its total length, whether it ended by speciating or by
// hitting the horizon, the type at the end, and the type history.
struct EdgeRealization {
  double length = 0.0;
  EdgeOutcome outcome = EdgeOutcome::Truncated;
  int end_type = 0;
  std::vector<Segment> segments;

  bool speciated() const { return outcome == EdgeOutcome::Speciated; }
};

// Transition matrix of the 2m-state edge chain over elapsed time tau.
// Block form [exp(U tau), phi(U tau) D tau; 0, I]: the top-left block is
// "still unbranched, type moved i -> j", the top-right "branched at some
// point, with type j at the branching moment".
Eigen::MatrixXd transition_matrix(const ModelParams& params, double tau);

// Per-starting-type distribution of the waiting time to speciation:
// F_i(tau) = 1 - (exp(U tau) 1)_i and its density (exp(U tau) lambda)_i.
Eigen::VectorXd speciation_cdf(const ModelParams& params, double tau);
Eigen::VectorXd speciation_density(const ModelParams& params, double tau);

// Limit tau -> inf of the branched block: entry (i, j) is the probability
// an edge starting in type i eventually speciates while in type j.
// Equals -U^{-1} D; rows sum to one when every type can reach speciation.
Eigen::MatrixXd absorption_probs(const ModelParams& params);

// Joint density over (length tau, type j at speciation) for an edge
// starting in type i: entry (i, j) of exp(U tau) D.
Eigen::MatrixXd joint_parent_density(const ModelParams& params, double tau);

// Simulates edges by competing exponentials: in type i the next event
// arrives at rate lambda_i + sum_j s_ij and is a speciation with
// probability lambda_i over that total. Precomputes the per-type jump
// table once so the per-edge cost is a handful of draws.
class EdgeSampler {
 public:
  explicit EdgeSampler(const ModelParams& params);

  // Full realization including the segment history.
  EdgeRealization sample(int start_type, double horizon, Rng& rng) const;

  // Same walk without storing segments, for counting-only simulations.
  struct Outcome {
    double length = 0.0;
    EdgeOutcome outcome = EdgeOutcome::Truncated;
    int end_type = 0;
  };
  Outcome sample_outcome(int start_type, double horizon, Rng& rng) const;

  int types() const { return m_; }

 private:
  template <typename OnSegment>
  Outcome walk(int start_type, double horizon, Rng& rng,
               OnSegment&& on_segment) const;

  int m_ = 0;
  std::vector<double> total_rate_;      // lambda_i + sum_{j != i} s_ij
  std::vector<double> inv_total_rate_;  // 1 / total_rate_
  std::vector<double> cut_;             // row-major per-type jump CDF cuts
};

// One-shot convenience wrapper around EdgeSampler.
EdgeRealization sample_edge(const ModelParams& params, int start_type,
                            double horizon, Rng& rng);

}  // namespace mpbt
