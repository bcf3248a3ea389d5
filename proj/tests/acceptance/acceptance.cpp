// Acceptance gate: one line per criterion, each with its tolerance pinned
// in code and the measured quantities printed alongside. Exits with the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "mpbt/edge_process.hpp"
#include "mpbt/errors.hpp"
#include "mpbt/gdist.hpp"
#include "mpbt/identify.hpp"
#include "mpbt/linalg.hpp"
#include "mpbt/params.hpp"
#include "mpbt/rng.hpp"
#include "mpbt/tree_sim.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/random_params.hpp"
#include "support/stats.hpp"

using namespace mpbt;
using testsupport::random_valid_params;
using testsupport::reference_params;

namespace {

struct Outcome {
  bool passed = false;
  std::string note;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0,
                double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c, d);
  return buf;
}

std::vector<ModelParams> shared_param_draws() {
  // 100 admissible parameter sets cycling the type counts 1, 2, 3, 5.
  static const std::vector<ModelParams> draws = [] {
    Rng rng(42);
    const int ms[4] = {1, 2, 3, 5};
    std::vector<ModelParams> out;
    out.reserve(100);
    for (int k = 0; k < 100; ++k)
      out.push_back(random_valid_params(ms[k % 4], rng));
    return out;
  }();
  return draws;
}

// 1. The edge-process transition kernel agrees with a direct exponential
// of the full generator, entrywise within 1e-9, across 100 random
// parameter sets and three horizons.
Outcome criterion_transition_kernel() {
  const double tol = 1e-9;
  double worst = 0.0;
  for (const ModelParams& p : shared_param_draws()) {
    const DerivedMatrices d = derive(p);
    for (double tau : {0.1, 1.0, 10.0}) {
      const Eigen::MatrixXd got = transition_matrix(p, tau);
      const Eigen::MatrixXd want = testsupport::taylor_exp(d.Q * tau);
      worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= tol, fmt("max deviation %.3g (tol %.0e)", worst, tol)};
}

// 2. Speciation-type distributions: rows sum to one within 1e-10 on the
// shared draws; the reference parameter set matches its known matrix to
// 1e-5.
Outcome criterion_absorption() {
  double worst_row = 0.0;
  for (const ModelParams& p : shared_param_draws()) {
    const Eigen::MatrixXd b = absorption_probs(p);
    for (int i = 0; i < p.m; ++i)
      worst_row = std::max(worst_row, std::abs(b.row(i).sum() - 1.0));
  }
  const Eigen::MatrixXd ref = absorption_probs(reference_params());
  Eigen::MatrixXd expected(2, 2);
  expected << 0.58333, 0.41667, 0.16667, 0.83333;
  const double ref_dev = (ref - expected).cwiseAbs().maxCoeff();
  const bool ok = worst_row <= 1e-10 && ref_dev <= 1e-5;
  return {ok, fmt("max row-sum deviation %.3g (tol 1e-10), reference "
                  "deviation %.3g (tol 1e-5)",
                  worst_row, ref_dev)};
}

// 3. Waiting-time laws are proper: F_i(50 / min lambda) >= 1 - 1e-6 on
// the shared draws.
Outcome criterion_properness() {
  double worst = 1.0;
  for (const ModelParams& p : shared_param_draws()) {
    const Eigen::VectorXd f = speciation_cdf(p, 50.0 / p.lambda.minCoeff());
    worst = std::min(worst, f.minCoeff());
  }
  return {worst >= 1.0 - 1e-6,
          fmt("min terminal cdf %.12f (needs >= 1 - 1e-6)", worst)};
}

// 4. Genericity determinant: the two-type determinant equals the rate gap
// to 1e-12; with three types and one shared switching rate it vanishes
// exactly when rates tie (1e3-point sweep plus constructed ties), and the
// magnitude at rates (1,2,3) is 2 within 1e-9.
Outcome criterion_genericity() {
  Rng rng(4001);
  double worst_gap = 0.0;
  for (int k = 0; k < 100; ++k) {
    const ModelParams p = random_valid_params(2, rng);
    worst_gap = std::max(
        worst_gap,
        std::abs(genericity_det(p) - (p.lambda(0) - p.lambda(1))));
  }

  auto equal_s = [](double l1, double l2, double l3, double s) {
    Eigen::VectorXd pi(3), lam(3);
    pi << 1.0 / 3, 1.0 / 3, 1.0 / 3;
    lam << l1, l2, l3;
    return ModelParams::create(pi, lam, Eigen::MatrixXd::Constant(3, 3, s));
  };
  double worst_sweep = 0.0;
  for (int k = 0; k < 1000; ++k) {
    double l[3];
    // enforce pairwise gaps so "distinct" has a quantitative meaning
    for (;;) {
      for (double& x : l) x = 0.05 + 1.95 * rng.uniform();
      const double g01 = std::abs(l[0] - l[1]);
      const double g02 = std::abs(l[0] - l[2]);
      const double g12 = std::abs(l[1] - l[2]);
      if (g01 > 1e-3 && g02 > 1e-3 && g12 > 1e-3) break;
    }
    const double s = 0.05 + rng.uniform();
    const double det = genericity_det(equal_s(l[0], l[1], l[2], s));
    // closed product: zero exactly at ties, independent of s
    const double expected = (l[0] - l[1]) * (l[0] - l[2]) * (l[1] - l[2]);
    worst_sweep = std::max(
        worst_sweep,
        std::abs(det - expected) / std::max(1.0, std::abs(expected)));
  }
  double worst_tie = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double a = 0.05 + 1.95 * rng.uniform();
    const double b = 0.05 + 1.95 * rng.uniform();
    const double s = 0.05 + rng.uniform();
    const int which = static_cast<int>(rng.below(3));
    const double det =
        which == 0   ? genericity_det(equal_s(a, a, b, s))
        : which == 1 ? genericity_det(equal_s(a, b, a, s))
                     : genericity_det(equal_s(b, a, a, s));
    worst_tie = std::max(worst_tie, std::abs(det));
  }
  const double mag = std::abs(genericity_det(equal_s(1.0, 2.0, 3.0, 0.1)));

  const bool ok = worst_gap <= 1e-12 && worst_sweep <= 1e-9 &&
                  worst_tie <= 1e-10 && std::abs(mag - 2.0) <= 1e-9;
  return {ok, fmt("two-type gap error %.2g (tol 1e-12), sweep error %.2g "
                  "(tol 1e-9), tie residual %.2g, |det(1,2,3)| = %.12f",
                  worst_gap, worst_sweep, worst_tie, mag)};
}

// 5. Stable type frequencies: the growth rate and left eigenvector match
// their frozen values, and the mean simulated type frequencies at depth
// 40 sit within 0.02 of the eigenvector. Runtime must stay under two
// minutes.
Outcome criterion_stable_frequencies() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelParams p = reference_params();
  const DerivedMatrices d = derive(p);
  const LeadingEigenpair lead = leading_left_eigenpair(d.A);
  const testsupport::Eig2 oracle = testsupport::leading_left_2x2(d.A);

  const double omega_err = std::abs(lead.value - 0.356155);
  const double u_err = std::max(std::abs(lead.left(0) - 0.35961),
                                std::abs(lead.left(1) - 0.64039));
  const double oracle_err = std::max(std::abs(lead.value - oracle.value),
                                     (lead.left - oracle.left).cwiseAbs().maxCoeff());

  SimOptions opts;
  opts.max_expected_lineages = 1e7;  // exp(omega * 40) is about 1.5e6
  Eigen::VectorXd mean_freq = Eigen::VectorXd::Zero(2);
  const int trees = 1000;
  for (int k = 0; k < trees; ++k) {
    Rng rng(5000, static_cast<std::uint64_t>(k));
    mean_freq += simulate_leaf_type_counts(p, 40.0, rng, opts).freqs;
  }
  mean_freq /= static_cast<double>(trees);
  const double sim_err = (mean_freq - lead.left).cwiseAbs().maxCoeff();

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  const bool ok = omega_err <= 1e-5 && u_err <= 1e-4 && oracle_err <= 1e-10 &&
                  sim_err <= 0.02 && secs < 120.0;
  return {ok, fmt("omega err %.2g (tol 1e-5), u err %.2g (tol 1e-4), mean "
                  "R_T gap %.4f (tol 0.02), %.0fs (cap 120)",
                  omega_err, u_err, sim_err, secs)};
}

// 6. Depth-limit law: triples harvested one-per-tree from 1e4 trees of
// depth 30 (sampling time 15) against 1e4 exact draws, two-sample KS per
// margin below 0.025; and the exact sampler's empirical cdf sits within
// three binomial standard errors of g_infinity_cdf at 20 points.
//
// Known to fail at this depth: the exact finite-depth law sits 0.10-0.13
// from the limit per margin (eligibility truncation, plus the mean type
// composition of a uniformly picked edge converging only at the
// within-tree averaging rate ~ e^{-omega t/2}). The harvest itself was
// validated against the exact finite-depth conditional law per hidden
// type; see the tree-pipeline test in the gdist suite. The threshold is
// kept as pinned.
Outcome criterion_depth_limit_law() {
  const ModelParams p = reference_params();

  std::vector<double> emp[3];
  const int trees = 10000;
  for (int k = 0; k < trees; ++k) {
    Rng rng(6000, static_cast<std::uint64_t>(k));
    const ColoredTree tree = simulate_tree(p, 30.0, rng);
    const std::vector<EdgeTriple> ts =
        extract_triples(tree, 15.0, ExtractMode::OnePerTree, rng);
    for (const EdgeTriple& t : ts) {
      emp[0].push_back(t.l0);
      emp[1].push_back(t.l1);
      emp[2].push_back(t.l2);
    }
  }

  const AnalyticTripleSampler sampler(p);
  Rng rng(6500);
  const int n_exact = 10000;
  std::vector<double> exact[3];
  std::vector<EdgeTriple> exact_triples;
  exact_triples.reserve(n_exact);
  for (int k = 0; k < n_exact; ++k) {
    const EdgeTriple t = sampler.sample(rng);
    exact_triples.push_back(t);
    exact[0].push_back(t.l0);
    exact[1].push_back(t.l1);
    exact[2].push_back(t.l2);
  }

  double ks[3];
  for (int i = 0; i < 3; ++i)
    ks[i] = testsupport::ks_two_sample(emp[i], exact[i]);

  double worst_z = 0.0;
  Rng point_rng(6600);
  for (int k = 0; k < 20; ++k) {
    const double a = 0.3 + 7.7 * point_rng.uniform();
    const double b = 0.3 + 7.7 * point_rng.uniform();
    const double c = 0.3 + 7.7 * point_rng.uniform();
    const double cdf = g_infinity_cdf(p, a, b, c);
    int below = 0;
    for (const EdgeTriple& t : exact_triples)
      if (t.l0 <= a && t.l1 <= b && t.l2 <= c) ++below;
    const double phat = static_cast<double>(below) / n_exact;
    const double se = std::sqrt(std::max(cdf * (1.0 - cdf), 1e-12) /
                                static_cast<double>(n_exact));
    worst_z = std::max(worst_z, std::abs(phat - cdf) / se);
  }

  const bool ok = ks[0] < 0.025 && ks[1] < 0.025 && ks[2] < 0.025 &&
                  worst_z <= 3.0;
  return {ok,
          fmt("trees harvested %.0f; KS l0 %.4f, l1 %.4f, l2 %.4f (tol "
              "0.025); ",
              static_cast<double>(emp[0].size()), ks[0], ks[1], ks[2]) +
              fmt("worst |z| %.2f (tol 3)", worst_z)};
}

// 7. Recovery: fitting 1e5 exact triples with 20 starts lands within 10%
// of the canonical truth, label-swapped initializations meet at the same
// canonical optimum within 1e-4, and the whole thing stays under ten
// minutes.
Outcome criterion_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelParams truth = reference_params();

  const AnalyticTripleSampler sampler(truth);
  Rng data_rng(7000);
  std::vector<EdgeTriple> triples;
  triples.reserve(100000);
  for (int k = 0; k < 100000; ++k) triples.push_back(sampler.sample(data_rng));

  Rng fit_rng(7001);
  const FitResult fit = fit_mle(triples, 2, 20, fit_rng);
  const ModelParams truth_c = canonicalize(truth).first;
  double max_rel = 0.0;
  for (int i = 0; i < 2; ++i)
    max_rel = std::max(max_rel,
                       std::abs(fit.params_hat.lambda(i) - truth_c.lambda(i)) /
                           truth_c.lambda(i));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      if (i != j)
        max_rel = std::max(max_rel,
                           std::abs(fit.params_hat.S(i, j) - truth_c.S(i, j)) /
                               truth_c.S(i, j));

  const FitResult from_truth = fit_mle_from_starts(
      triples, 2, {params_to_theta(truth)});
  const FitResult from_swapped = fit_mle_from_starts(
      triples, 2, {params_to_theta(apply_permutation(truth, {1, 0}))});
  const double swap_gap = std::max(
      (from_truth.params_hat.lambda - from_swapped.params_hat.lambda)
          .cwiseAbs()
          .maxCoeff(),
      (from_truth.params_hat.S - from_swapped.params_hat.S)
          .cwiseAbs()
          .maxCoeff());

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  const bool ok =
      max_rel < 0.10 && swap_gap < 1e-4 && fit.converged && secs < 600.0;
  return {ok, fmt("max rel err %.4f (tol 0.10), swapped-start gap %.2g "
                  "(tol 1e-4), %.0fs (cap 600)",
                  max_rel, swap_gap, secs)};
}

// 8. Relabeling invariance: the density and the likelihood are invariant
// under every permutation of the types (pointwise 1e-10; likelihood on a
// fixed thousand-triple set to 1e-8).
Outcome criterion_invariance() {
  std::vector<std::vector<std::vector<int>>> perms_by_m = {
      {{0}},
      {{0, 1}, {1, 0}},
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

  Rng rng(8000);
  double worst_density = 0.0;
  double worst_nll = 0.0;
  for (int m = 1; m <= 3; ++m) {
    for (int rep = 0; rep < 4; ++rep) {
      const ModelParams p = random_valid_params(m, rng);
      const AnalyticTripleSampler sampler(p);
      Rng triple_rng(8100 + static_cast<std::uint64_t>(m * 10 + rep));
      std::vector<EdgeTriple> triples;
      triples.reserve(1000);
      for (int k = 0; k < 1000; ++k)
        triples.push_back(sampler.sample(triple_rng));
      const double base_nll = negative_loglik(triples, p);

      for (const auto& sigma : perms_by_m[static_cast<std::size_t>(m - 1)]) {
        const ModelParams q = apply_permutation(p, sigma);
        for (int k = 0; k < 100; ++k) {
          const double a = 5.0 * rng.uniform();
          const double b = 5.0 * rng.uniform();
          const double c = 5.0 * rng.uniform();
          const double f = g_infinity_density(p, a, b, c);
          const double g = g_infinity_density(q, a, b, c);
          worst_density = std::max(
              worst_density, std::abs(f - g) / std::max(1.0, std::abs(f)));
        }
        worst_nll = std::max(
            worst_nll, std::abs(negative_loglik(triples, q) - base_nll));
      }
    }
  }
  const bool ok = worst_density <= 1e-10 && worst_nll <= 1e-8;
  return {ok, fmt("max density deviation %.2g (tol 1e-10), max likelihood "
                  "deviation %.2g (tol 1e-8)",
                  worst_density, worst_nll)};
}

// 9. Rate ordering from one tree: across 20 seeds, fitting the triples of
// a single depth-30 tree ranks the canonical rates like the truth in at
// least 18 runs (nearest-rate assignment must be the identity).
//
// Known to fail at this depth: about a quarter of single trees hold
// fewer than 4 eligible triples at the halfway line (automatic misses),
// and on fittable trees the finite-depth truncation inflates both rates
// so the smaller one lands near the decision midpoint. The measured
// global optimum beats the truth by tens of nats on such data, so this
// is a property of the data, not of the optimizer. The threshold is
// kept as pinned.
Outcome criterion_ordering() {
  const ModelParams truth = reference_params();
  const ModelParams truth_c = canonicalize(truth).first;
  int matched = 0;
  int attempted = 0;
  for (int seed = 0; seed < 20; ++seed) {
    ++attempted;
    try {
      Rng rng(9000, static_cast<std::uint64_t>(seed));
      const ColoredTree tree = simulate_tree(truth, 30.0, rng);
      const std::vector<EdgeTriple> triples =
          extract_triples(tree, 15.0, ExtractMode::AllEligible, rng);
      if (triples.size() < 4) continue;
      Rng fit_rng(9500, static_cast<std::uint64_t>(seed));
      const FitResult fit = fit_mle(triples, 2, 8, fit_rng);
      bool identity = true;
      for (int i = 0; i < 2; ++i) {
        int nearest = 0;
        double best = std::abs(fit.params_hat.lambda(i) - truth_c.lambda(0));
        for (int j = 1; j < 2; ++j) {
          const double gap =
              std::abs(fit.params_hat.lambda(i) - truth_c.lambda(j));
          if (gap < best) {
            best = gap;
            nearest = j;
          }
        }
        if (nearest != i) identity = false;
      }
      if (identity) ++matched;
    } catch (const Error&) {
      // a failed fit counts as a miss
    }
  }
  return {matched >= 18, fmt("ordering matched in %.0f of %.0f seeds "
                             "(needs 18)",
                             static_cast<double>(matched),
                             static_cast<double>(attempted))};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* label;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "transition kernel matches a direct exponential",
       criterion_transition_kernel},
      {2, "speciation-type distributions are stochastic and exact",
       criterion_absorption},
      {3, "waiting-time laws are proper", criterion_properness},
      {4, "genericity determinant factorizes over rate gaps",
       criterion_genericity},
      {5, "stable type frequencies match simulation",
       criterion_stable_frequencies},
      {6, "harvested triples follow the depth-limit law",
       criterion_depth_limit_law},
      {7, "recovery identifies the rates up to relabeling",
       criterion_recovery},
      {8, "density and likelihood are relabeling invariant",
       criterion_invariance},
      {9, "single-tree fits rank the rates correctly", criterion_ordering},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::printf("[%s] %d: %s (%.1fs) :: %s\n",
                outcome.passed ? "PASS" : "FAIL", c.id, c.label, secs,
                outcome.note.c_str());
    std::fflush(stdout);
    if (!outcome.passed) ++failures;
  }
  std::printf("%d of %zu criteria passed\n",
              static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures;
}
