#pragma once

#include <Eigen/Dense>

namespace mpbt {

// Dense matrix exponential via Pade approximation with scaling and
// squaring (degree-13 approximant, standard backward-error bound).
// Requires a square matrix with finite entries.
Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& A);

// exp(A * t) convenience overload.
Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& A, double t);

// phi(A) = sum_{n>=0} A^n / (n+1)!, the entire function with
// phi(A) * A = exp(A) - I. Solved through exp when A is safely
// invertible, otherwise by a scaled series with the doubling identity
// phi(2B) = (exp(B) + I) phi(B) / 2.
Eigen::MatrixXd phi(const Eigen::MatrixXd& A);

struct PowerIterationOptions {
  double tol = 1e-13;       // residual tolerance, relative to ||A||_inf
  long max_iterations = 100000;
};

struct LeadingEigenpair {
  double value = 0.0;           // dominant eigenvalue
  Eigen::VectorXd left;         // left eigenvector, entries >= 0, sums to 1
  double residual = 0.0;        // ||left^T A - value * left^T||_inf at exit
  int iterations = 0;
};

// Dominant eigenvalue and normalized left eigenvector of a matrix with
// nonnegative off-diagonal entries (an ML-matrix), by shifted power
// iteration on A^T: the shift k = max_i |A_ii| + 1 makes A + kI
// entrywise nonnegative so the Perron root is the dominant one.
// Throws StructureError on negative off-diagonals and ConvergenceError
// (carrying the final residual) if the budget runs out.
LeadingEigenpair leading_left_eigenpair(const Eigen::MatrixXd& A,
                                        const PowerIterationOptions& opts = {});

}  // namespace mpbt
