#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace mpbt {

// Model parameters for the multitype pure-birth process with m hidden
// types: per-type speciation rates lambda, a type-switching rate matrix S
// whose off-diagonal entries are the switching rates and whose diagonal
// makes rows sum to zero, and a root type distribution pi.
struct ModelParams {
  int m = 0;
  Eigen::VectorXd pi;
  Eigen::VectorXd lambda;
  Eigen::MatrixXd S;  // rows sum to zero; off-diagonal entries >= 0

  // Builds a parameter set from the free quantities. Only the off-diagonal
  // part of s_offdiag is read; diagonals are recomputed as negated row sums.
  // Throws StructureError on dimension mismatch, negative rates, negative
  // pi entries, or pi not summing to one (tolerance 1e-12).
  static ModelParams create(const Eigen::VectorXd& pi,
                            const Eigen::VectorXd& lambda,
                            const Eigen::MatrixXd& s_offdiag);
};

// Matrices derived from the parameters. States of the lineage-type chain
// come in "unbranched" and "branched" flavours, giving the 2m x 2m
// generator Q with block rows [U D; 0 0], where D = diag(lambda),
// U = S - D, and A = S + D drives total lineage growth.
struct DerivedMatrices {
  Eigen::MatrixXd D;
  Eigen::MatrixXd U;
  Eigen::MatrixXd A;
  Eigen::MatrixXd Q;
};

DerivedMatrices derive(const ModelParams& params);

// One named admissibility check with its outcome.
struct AssumptionCheck {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<AssumptionCheck> checks;
  bool all_passed() const;
};

// Runs the four admissibility checks:
//   1. every speciation rate strictly positive,
//   2. every switching rate strictly positive (vacuous for m == 1),
//   3. the moment matrix [1, U1, ..., U^{m-1}1] is nonsingular
//      (|det| > tol relative to column norms),
//   4. speciation rates pairwise distinct (relative gap > tol).
ValidationReport validate(const ModelParams& params, double tol = 1e-9);

// Columns 1, U1, U^2 1, ..., U^{m-1} 1. Its determinant being nonzero is
// what makes the per-type speciation-time distributions linearly
// independent, hence the mixture identifiable.
Eigen::MatrixXd genericity_matrix(const ModelParams& params);
double genericity_det(const ModelParams& params);

// JSON round trip. Object layout:
//   {"m": 2, "pi": [..], "lambda": [..], "s_offdiag": [[..], [..]]}
// s_offdiag diagonal entries are ignored on read and written as zero.
// Parse failures raise IoError with a line/column locator.
ModelParams params_from_json(const std::string& text);
std::string params_to_json(const ModelParams& params);
ModelParams load_params(const std::string& path);
void save_params(const ModelParams& params, const std::string& path);

}  // namespace mpbt
