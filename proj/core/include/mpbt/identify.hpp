#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mpbt/gdist.hpp"
#include "mpbt/optim.hpp"
#include "mpbt/params.hpp"
#include "mpbt/rng.hpp"

namespace mpbt {

// Relabels the types: entry k of the result is entry sigma[k] of the
// input, so lambda'_k = lambda_{sigma(k)}, S'_{kl} = S_{sigma(k),sigma(l)},
// pi'_k = pi_{sigma(k)}. sigma must be a bijection on {0..m-1}.
ModelParams apply_permutation(const ModelParams& params,
                              const std::vector<int>& sigma);

// Fixes the relabeling gauge: returns the permuted params whose
// speciation rates ascend, together with the sigma used. Ties in lambda
// (relative gap below 1e-12) are an error since the gauge is then
// ill-defined.
std::pair<ModelParams, std::vector<int>> canonicalize(
    const ModelParams& params);

// -sum log density over the triples, densities floored at 1e-300; the
// floor counter (if given) receives the number of floored evaluations.
// Throws on empty input.
double negative_loglik(const std::vector<EdgeTriple>& triples,
                       const ModelParams& params,
                       std::int64_t* floored = nullptr);

struct FitResult {
  ModelParams params_hat;      // canonicalized; pi uniform (not estimated)
  bool pi_identified = false;  // always false: one tree cannot pin pi down
  double loglik = 0.0;
  std::int64_t n_triples = 0;
  int starts = 0;
  int best_start_index = -1;
  bool converged = false;
  std::vector<int> permutation;  // applied during canonicalization
  std::int64_t floored_evaluations = 0;
  bool near_tie_warning = false;  // fitted rates nearly tied; gauge unstable
  long total_evaluations = 0;
};

struct FitConfig {
  NelderMeadOptions optimizer;
  bool polish = true;          // rerun the simplex once from the best point
  double init_low = 1e-2;      // multi-start log-uniform range for rates
  double init_high = 10.0;
  int max_threads = 0;         // 0: hardware concurrency
};

// Maximum likelihood over (lambda, s) through log-rate coordinates
// theta in R^{m^2}: first the m log lambdas, then the off-diagonal log
// switching rates row by row. Multi-start: n_starts random inits drawn
// log-uniform from [init_low, init_high]; the best optimum wins and is
// canonicalized. Throws ConvergenceError when every start exhausts its
// budget.
FitResult fit_mle(const std::vector<EdgeTriple>& triples, int m, int n_starts,
                  Rng& rng, const FitConfig& config = {});

// Same, but from caller-supplied start points in theta coordinates.
FitResult fit_mle_from_starts(const std::vector<EdgeTriple>& triples, int m,
                              const std::vector<Eigen::VectorXd>& starts,
                              const FitConfig& config = {});

// theta <-> params helpers (pi set uniform; layout documented above).
Eigen::VectorXd params_to_theta(const ModelParams& params);
ModelParams theta_to_params(const Eigen::VectorXd& theta, int m);

// Where the triples for a recovery experiment come from.
struct TripleSource {
  enum class Kind { Analytic, SimulatedTrees };
  Kind kind = Kind::Analytic;
  double depth = 0.0;            // tree depth for SimulatedTrees
  double time_fraction = 0.5;    // extraction time as a fraction of depth
  ExtractMode mode = ExtractMode::AllEligible;
  std::int64_t max_trees = 1000000;
  double max_expected_lineages = 1e6;

  static TripleSource analytic() { return {}; }
  static TripleSource simulated(double depth,
                                ExtractMode mode = ExtractMode::AllEligible) {
    TripleSource src;
    src.kind = Kind::SimulatedTrees;
    src.depth = depth;
    src.mode = mode;
    return src;
  }
};

struct RecoveryReport {
  ModelParams true_canonical;
  ModelParams fit_canonical;
  Eigen::VectorXd lambda_rel_err;
  Eigen::MatrixXd s_rel_err;  // off-diagonal entries; diagonal zero
  double max_rel_err = 0.0;
  std::int64_t n_triples = 0;
  std::int64_t trees_used = 0;
  FitResult fit;
};

// End-to-end check that fitting recovers known truth: generate n_triples
// from the source (exact sampler, or repeated tree simulation with
// extraction at time_fraction * depth), fit with n_starts, canonicalize
// both sides, and report coordinatewise relative errors.
RecoveryReport recovery_experiment(const ModelParams& truth,
                                   std::int64_t n_triples,
                                   const TripleSource& source, int n_starts,
                                   std::uint64_t seed,
                                   const FitConfig& config = {});

}  // namespace mpbt
