#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mpbt/edge_process.hpp"
#include "mpbt/params.hpp"
#include "mpbt/rng.hpp"
#include "mpbt/tree_sim.hpp"

namespace mpbt {

// Lengths around one interior node: the residual of the focal edge past
// the sampling time (l0) and its two child edge lengths (l1, l2), the
// children ordered uniformly at random. Hidden types are carried along
// when the source knows them (simulated trees, analytic draws); they are
// diagnostics only and never serialized into the observable CSV.
struct EdgeTriple {
  double l0 = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  bool has_hidden = false;
  int hidden_start_type = -1;  // type of the focal edge at the sampling time
  int hidden_end_type = -1;    // type at the focal edge's speciation
};

enum class ExtractMode {
  OnePerTree,   // one uniform pick among edges alive at t; may yield nothing
  AllEligible,  // every eligible triple; correlated within a tree
};

// Harvests triples from a tree at time t (requires 0 < t < depth).
// An edge alive at t is eligible when it speciates before the depth
// horizon and both children do too, with child lengths strictly below
// depth - t - l0. The rng drives the uniform pick and child ordering.
std::vector<EdgeTriple> extract_triples(const ColoredTree& tree, double t,
                                        ExtractMode mode, Rng& rng);

// Depth-limit law of the triple around a uniformly chosen edge: the cdf
//   sum_ij u_i ((exp(U tau0) - I) U^{-1} D)_{ij} F_j(tau1) F_j(tau2)
// and its density sum_ij u_i (exp(U tau0) D)_{ij} f_j(tau1) f_j(tau2),
// where f_j is the type-j speciation density. Negative arguments are
// rejected.
double g_infinity_cdf(const ModelParams& params, double tau0, double tau1,
                      double tau2);
double g_infinity_density(const ModelParams& params, double tau0, double tau1,
                          double tau2);

// The same law decomposed over the hidden speciation type j: weight_j is
// the probability the focal edge speciates in type j, the parent law
// governs l0 given j, and both child lengths follow the type-j waiting
// time law F_j independently.
class MixtureSpec {
 public:
  const Eigen::VectorXd& weights() const { return weights_; }
  int components() const { return static_cast<int>(weights_.size()); }

  double parent_density(int j, double tau) const;
  double parent_cdf(int j, double tau) const;
  double child_density(int j, double tau) const;
  double child_cdf(int j, double tau) const;

 private:
  friend MixtureSpec mixture_components(const ModelParams& params);
  Eigen::VectorXd weights_;
  Eigen::VectorXd u_;
  Eigen::MatrixXd U_;
  Eigen::MatrixXd D_;
  Eigen::VectorXd lambda_;
};

MixtureSpec mixture_components(const ModelParams& params);

// Exact draw from the depth-limit law: start type ~ u, one unbounded
// edge for (l0, speciation type j), two unbounded edges from j for the
// child lengths. Hidden fields are populated.
EdgeTriple sample_triple_analytic(const ModelParams& params, Rng& rng);

// Bulk sampler reusing the jump tables across draws.
class AnalyticTripleSampler {
 public:
  explicit AnalyticTripleSampler(const ModelParams& params);
  EdgeTriple sample(Rng& rng) const;

 private:
  EdgeSampler sampler_;
  Eigen::VectorXd u_cum_;
};

// Fast repeated density evaluation for likelihood work: diagonalizes U
// once and evaluates the density as short sums of exponentials. Falls
// back to the matrix-exponential route when U resists diagonalization.
// Agrees with g_infinity_density to tight relative tolerance.
class GDensityEvaluator {
 public:
  explicit GDensityEvaluator(const ModelParams& params);

  double density(double l0, double l1, double l2) const;
  bool spectral() const { return spectral_; }

 private:
  double density_direct(double l0, double l1, double l2) const;

  int m_ = 0;
  bool spectral_ = false;
  bool real_spectrum_ = false;

  // real spectral path: rho eigenvalues, folded factor tables
  Eigen::VectorXd rho_;
  Eigen::MatrixXd qf_;  // (a_a * W_aj) with a = u^T V, W = V^{-1} D
  Eigen::MatrixXd vf_;  // (V_ja * c_a) with c = V^{-1} lambda
  // complex spectral path
  Eigen::VectorXcd rho_c_;
  Eigen::MatrixXcd qf_c_;
  Eigen::MatrixXcd vf_c_;
  // fallback path
  Eigen::MatrixXd U_;
  Eigen::MatrixXd D_;
  Eigen::VectorXd u_;
  Eigen::VectorXd lambda_;
};

// CSV round trip: header "l0,l1,l2", one triple per row, %.12g. Hidden
// fields are never written.
void write_triples_csv(const std::string& path,
                       const std::vector<EdgeTriple>& triples);
std::vector<EdgeTriple> read_triples_csv(const std::string& path);

}  // namespace mpbt
