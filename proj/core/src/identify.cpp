#include "mpbt/identify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mpbt/errors.hpp"
#include "mpbt/parallel.hpp"
#include "mpbt/tree_sim.hpp"

namespace mpbt {

namespace {

constexpr double kDensityFloor = 1e-300;
constexpr double kThetaBound = 50.0;  // |log rate| beyond this is rejected
constexpr double kHugeObjective = 1e100;

void require_permutation(const std::vector<int>& sigma, int m) {
  if (static_cast<int>(sigma.size()) != m)
    throw StructureError("permutation size does not match type count");
  std::vector<bool> seen(static_cast<std::size_t>(m), false);
  for (int v : sigma) {
    if (v < 0 || v >= m || seen[static_cast<std::size_t>(v)])
      throw StructureError("not a permutation of 0..m-1");
    seen[static_cast<std::size_t>(v)] = true;
  }
}

}  // namespace

ModelParams apply_permutation(const ModelParams& params,
                              const std::vector<int>& sigma) {
  const int m = params.m;
  require_permutation(sigma, m);
  Eigen::VectorXd pi(m), lambda(m);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < m; ++k) {
    pi(k) = params.pi(sigma[static_cast<std::size_t>(k)]);
    lambda(k) = params.lambda(sigma[static_cast<std::size_t>(k)]);
    for (int l = 0; l < m; ++l)
      if (k != l)
        s(k, l) = params.S(sigma[static_cast<std::size_t>(k)],
                           sigma[static_cast<std::size_t>(l)]);
  }
  return ModelParams::create(pi, lambda, s);
}

std::pair<ModelParams, std::vector<int>> canonicalize(
    const ModelParams& params) {
  const int m = params.m;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const double gap = std::abs(params.lambda(i) - params.lambda(j));
      const double scale = std::max(
          {std::abs(params.lambda(i)), std::abs(params.lambda(j)), 1e-30});
      if (gap <= 1e-12 * scale) {
        std::ostringstream msg;
        msg << "canonicalize: speciation rates " << i << " and " << j
            << " are tied (" << params.lambda(i)
            << "); ordering by rate is ill-defined";
        throw StructureError(msg.str());
      }
    }
  std::vector<int> sigma(static_cast<std::size_t>(m));
  std::iota(sigma.begin(), sigma.end(), 0);
  std::sort(sigma.begin(), sigma.end(), [&](int a, int b) {
    return params.lambda(a) < params.lambda(b);
  });
  return {apply_permutation(params, sigma), sigma};
}

namespace {

double nll_with_evaluator(const GDensityEvaluator& eval,
                          const std::vector<EdgeTriple>& triples,
                          std::int64_t* floored) {
  double total = 0.0;
  std::int64_t floor_hits = 0;
  for (const auto& tr : triples) {
    double d = eval.density(tr.l0, tr.l1, tr.l2);
    if (!(d >= kDensityFloor)) {  // catches tiny, negative-roundoff, NaN
      d = kDensityFloor;
      ++floor_hits;
    }
    total -= std::log(d);
  }
  if (floored) *floored = floor_hits;
  return total;
}

}  // namespace

double negative_loglik(const std::vector<EdgeTriple>& triples,
                       const ModelParams& params, std::int64_t* floored) {
  if (triples.empty())
    throw StructureError("negative_loglik: no triples given");
  return nll_with_evaluator(GDensityEvaluator(params), triples, floored);
}

Eigen::VectorXd params_to_theta(const ModelParams& params) {
  const int m = params.m;
  Eigen::VectorXd theta(m * m);
  int at = 0;
  for (int i = 0; i < m; ++i) theta(at++) = std::log(params.lambda(i));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i != j) theta(at++) = std::log(params.S(i, j));
  return theta;
}

ModelParams theta_to_params(const Eigen::VectorXd& theta, int m) {
  if (theta.size() != static_cast<Eigen::Index>(m) * m)
    throw StructureError("theta must have m*m entries");
  Eigen::VectorXd lambda(m);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
  int at = 0;
  for (int i = 0; i < m; ++i) lambda(i) = std::exp(theta(at++));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i != j) s(i, j) = std::exp(theta(at++));
  return ModelParams::create(Eigen::VectorXd::Constant(m, 1.0 / m), lambda, s);
}

namespace {

struct StartOutcome {
  NelderMeadResult run;
  bool usable = false;
};

FitResult run_fit(const std::vector<EdgeTriple>& triples, int m,
                  const std::vector<Eigen::VectorXd>& starts,
                  const FitConfig& config) {
  if (triples.empty()) throw StructureError("fit_mle: no triples given");
  if (m < 1) throw StructureError("fit_mle: need m >= 1");
  if (starts.empty()) throw StructureError("fit_mle: need at least one start");

  auto objective = [&](const Eigen::VectorXd& theta) -> double {
    if (theta.cwiseAbs().maxCoeff() > kThetaBound) return kHugeObjective;
    try {
      const ModelParams candidate = theta_to_params(theta, m);
      return nll_with_evaluator(GDensityEvaluator(candidate), triples,
                                nullptr);
    } catch (const Error&) {
      return kHugeObjective;
    }
  };

  std::vector<StartOutcome> outcomes(starts.size());
  parallel_for(
      static_cast<std::int64_t>(starts.size()),
      [&](std::int64_t k) {
        auto& slot = outcomes[static_cast<std::size_t>(k)];
        slot.run = nelder_mead(objective, starts[static_cast<std::size_t>(k)],
                               config.optimizer);
        slot.usable = std::isfinite(slot.run.fx);
      },
      config.max_threads);

  int best = -1;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    if (!outcomes[k].usable) continue;
    if (best < 0 ||
        outcomes[k].run.fx < outcomes[static_cast<std::size_t>(best)].run.fx)
      best = static_cast<int>(k);
  }

  bool any_converged = false;
  long total_evals = 0;
  for (const auto& o : outcomes) {
    any_converged = any_converged || (o.usable && o.run.converged);
    total_evals += o.run.evaluations;
  }
  if (best < 0 || !any_converged) {
    std::ostringstream msg;
    msg << "fit_mle: none of " << starts.size()
        << " starts converged within "
        << config.optimizer.max_iterations << " iterations";
    if (best >= 0)
      msg << "; best objective reached "
          << outcomes[static_cast<std::size_t>(best)].run.fx;
    throw ConvergenceError(
        msg.str(),
        best >= 0 ? outcomes[static_cast<std::size_t>(best)].run.fx
                  : std::numeric_limits<double>::quiet_NaN());
  }

  NelderMeadResult winner = outcomes[static_cast<std::size_t>(best)].run;
  if (config.polish) {
    NelderMeadOptions polish_opts = config.optimizer;
    polish_opts.initial_step = 0.05;
    const NelderMeadResult polished =
        nelder_mead(objective, winner.x, polish_opts);
    total_evals += polished.evaluations;
    if (polished.fx <= winner.fx) {
      const bool was_converged = winner.converged;
      winner = polished;
      winner.converged = winner.converged || was_converged;
    }
  }

  FitResult result;
  const ModelParams raw = theta_to_params(winner.x, m);
  auto [canon, sigma] = canonicalize(raw);
  result.params_hat = canon;
  result.permutation = sigma;
  result.loglik = -winner.fx;
  result.n_triples = static_cast<std::int64_t>(triples.size());
  result.starts = static_cast<int>(starts.size());
  result.best_start_index = best;
  result.converged = winner.converged;
  result.total_evaluations = total_evals;
  nll_with_evaluator(GDensityEvaluator(canon), triples,
                     &result.floored_evaluations);

  for (int i = 0; i + 1 < m; ++i) {
    const double lo = result.params_hat.lambda(i);
    const double hi = result.params_hat.lambda(i + 1);
    if (hi - lo <= 1e-3 * std::max(hi, 1e-30)) result.near_tie_warning = true;
  }
  return result;
}

}  // namespace

FitResult fit_mle(const std::vector<EdgeTriple>& triples, int m, int n_starts,
                  Rng& rng, const FitConfig& config) {
  if (n_starts < 1) throw StructureError("fit_mle: need n_starts >= 1");
  const double lo = std::log(config.init_low);
  const double hi = std::log(config.init_high);
  std::vector<Eigen::VectorXd> starts;
  starts.reserve(static_cast<std::size_t>(n_starts));
  for (int k = 0; k < n_starts; ++k) {
    Eigen::VectorXd theta(m * m);
    for (Eigen::Index i = 0; i < theta.size(); ++i)
      theta(i) = lo + (hi - lo) * rng.uniform();
    starts.push_back(std::move(theta));
  }
  return run_fit(triples, m, starts, config);
}

FitResult fit_mle_from_starts(const std::vector<EdgeTriple>& triples, int m,
                              const std::vector<Eigen::VectorXd>& starts,
                              const FitConfig& config) {
  return run_fit(triples, m, starts, config);
}

RecoveryReport recovery_experiment(const ModelParams& truth,
                                   std::int64_t n_triples,
                                   const TripleSource& source, int n_starts,
                                   std::uint64_t seed,
                                   const FitConfig& config) {
  if (n_triples < 1)
    throw StructureError("recovery_experiment: need n_triples >= 1");

  std::vector<EdgeTriple> triples;
  std::int64_t trees_used = 0;

  if (source.kind == TripleSource::Kind::Analytic) {
    triples.reserve(static_cast<std::size_t>(n_triples));
    const AnalyticTripleSampler sampler(truth);
    Rng rng(seed, 0);
    for (std::int64_t i = 0; i < n_triples; ++i)
      triples.push_back(sampler.sample(rng));
  } else {
    if (!(source.depth > 0.0))
      throw StructureError("recovery_experiment: tree source needs depth > 0");
    SimOptions sim;
    sim.max_expected_lineages = source.max_expected_lineages;
    const double t = source.time_fraction * source.depth;
    for (std::int64_t k = 0; k < source.max_trees &&
                             static_cast<std::int64_t>(triples.size()) <
                                 n_triples;
         ++k) {
      Rng rng(seed, 2 + static_cast<std::uint64_t>(k));
      const ColoredTree tree = simulate_tree(truth, source.depth, rng, sim);
      auto batch = extract_triples(tree, t, source.mode, rng);
      ++trees_used;
      for (auto& tr : batch) {
        triples.push_back(tr);
        if (static_cast<std::int64_t>(triples.size()) >= n_triples) break;
      }
    }
    if (triples.empty())
      throw StructureError(
          "recovery_experiment: no eligible triples harvested; increase "
          "max_trees or depth");
  }

  Rng fit_rng(seed, 1);
  RecoveryReport report;
  report.fit = fit_mle(triples, truth.m, n_starts, fit_rng, config);
  report.true_canonical = canonicalize(truth).first;
  report.fit_canonical = report.fit.params_hat;
  report.n_triples = static_cast<std::int64_t>(triples.size());
  report.trees_used = trees_used;

  const int m = truth.m;
  report.lambda_rel_err.resize(m);
  report.s_rel_err = Eigen::MatrixXd::Zero(m, m);
  double worst = 0.0;
  for (int i = 0; i < m; ++i) {
    const double denom = std::abs(report.true_canonical.lambda(i));
    report.lambda_rel_err(i) =
        std::abs(report.fit_canonical.lambda(i) -
                 report.true_canonical.lambda(i)) /
        std::max(denom, 1e-30);
    worst = std::max(worst, report.lambda_rel_err(i));
  }
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      const double denom = std::abs(report.true_canonical.S(i, j));
      report.s_rel_err(i, j) =
          std::abs(report.fit_canonical.S(i, j) -
                   report.true_canonical.S(i, j)) /
          std::max(denom, 1e-30);
      worst = std::max(worst, report.s_rel_err(i, j));
    }
  report.max_rel_err = worst;
  return report;
}

}  // namespace mpbt
