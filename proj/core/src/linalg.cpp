#include "mpbt/linalg.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mpbt/errors.hpp"

namespace mpbt {

namespace {

void require_square_finite(const Eigen::MatrixXd& A, const char* who) {
  if (A.rows() != A.cols())
    throw StructureError(std::string(who) + ": matrix must be square, got " +
                         std::to_string(A.rows()) + "x" +
                         std::to_string(A.cols()));
  if (!A.allFinite())
    throw StructureError(std::string(who) + ": matrix has nonfinite entries");
}

// Degree-13 Pade coefficients for exp. The approximant stays within unit
// roundoff of exp as long as ||A||_1 <= theta13.
constexpr double kTheta13 = 5.371920351148152;
constexpr double kPade13[] = {64764752532480000.0, 32382376266240000.0,
                              7771770303897600.0,  1187353796428800.0,
                              129060195264000.0,   10559470521600.0,
                              670442572800.0,      33522128640.0,
                              1323241920.0,        40840800.0,
                              960960.0,            16380.0,
                              182.0,               1.0};

Eigen::MatrixXd pade13(const Eigen::MatrixXd& A) {
  const Eigen::Index n = A.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd A2 = A * A;
  const Eigen::MatrixXd A4 = A2 * A2;
  const Eigen::MatrixXd A6 = A2 * A4;
  const double* b = kPade13;
  const Eigen::MatrixXd W1 = b[13] * A6 + b[11] * A4 + b[9] * A2;
  const Eigen::MatrixXd W2 = b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I;
  const Eigen::MatrixXd Z1 = b[12] * A6 + b[10] * A4 + b[8] * A2;
  const Eigen::MatrixXd Z2 = b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
  const Eigen::MatrixXd P = A * (A6 * W1 + W2);  // odd part
  const Eigen::MatrixXd V = A6 * Z1 + Z2;        // even part
  return (V - P).partialPivLu().solve(V + P);
}

}  // namespace

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& A) {
  require_square_finite(A, "matrix_exp");
  const double norm = A.cwiseAbs().colwise().sum().maxCoeff();  // 1-norm
  int squarings = 0;
  if (norm > kTheta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / kTheta13)));
  }
  Eigen::MatrixXd E = pade13(A / std::exp2(squarings));
  for (int s = 0; s < squarings; ++s) E = E * E;
  return E;
}

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& A, double t) {
  return matrix_exp((A * t).eval());
}

Eigen::MatrixXd phi(const Eigen::MatrixXd& A) {
  require_square_finite(A, "phi");
  const Eigen::Index n = A.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  // When A is comfortably invertible, phi(A) = A^{-1} (exp(A) - I).
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const double norm = A.cwiseAbs().colwise().sum().maxCoeff();
  if (norm > 1e-8) {
    const Eigen::MatrixXd residual = lu.solve(A) - I;
    if (residual.cwiseAbs().maxCoeff() < 1e-8)
      return lu.solve(matrix_exp(A) - I);
  }

  // Otherwise scale down until the Taylor series converges fast, sum it,
  // and climb back up with phi(2B) = (exp(B) + I) phi(B) / 2.
  int doublings = 0;
  double scaled = norm;
  while (scaled > 0.25) {
    scaled *= 0.5;
    ++doublings;
  }
  Eigen::MatrixXd B = A / std::exp2(doublings);
  Eigen::MatrixXd term = I;
  Eigen::MatrixXd sum = I;  // n = 0 term: I / 1!
  for (int k = 1; k <= 30; ++k) {
    term = (term * B) / static_cast<double>(k + 1);
    sum += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18) break;
  }
  for (int d = 0; d < doublings; ++d) {
    sum = 0.5 * ((matrix_exp(B) + I) * sum).eval();
    B *= 2.0;
  }
  return sum;
}

LeadingEigenpair leading_left_eigenpair(const Eigen::MatrixXd& A,
                                        const PowerIterationOptions& opts) {
  require_square_finite(A, "leading_left_eigenpair");
  const Eigen::Index n = A.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && A(i, j) < 0.0)
        throw StructureError(
            "leading_left_eigenpair: off-diagonal entries must be "
            "nonnegative");

  const double anorm = std::max(A.cwiseAbs().rowwise().sum().maxCoeff(), 1e-30);
  if (n == 1) {
    LeadingEigenpair out;
    out.value = A(0, 0);
    out.left = Eigen::VectorXd::Ones(1);
    out.residual = 0.0;
    out.iterations = 0;
    return out;
  }

  // Shift so the iteration matrix is entrywise nonnegative; the Perron
  // root of A + kI is then its dominant eigenvalue and the eigenvector
  // can be kept normalized in the 1-norm with positive entries.
  double shift = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    shift = std::max(shift, std::abs(A(i, i)));
  shift += 1.0;
  const Eigen::MatrixXd Bt = (A + shift * Eigen::MatrixXd::Identity(n, n))
                                 .transpose();

  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  LeadingEigenpair out;
  for (long it = 1; it <= opts.max_iterations; ++it) {
    Eigen::VectorXd y = Bt * x;
    const double total = y.sum();  // positive: y >= 0, irreducible path mass
    if (!(total > 0.0) || !y.allFinite())
      throw ConvergenceError(
          "leading_left_eigenpair: iteration collapsed (matrix may be "
          "reducible)",
          std::numeric_limits<double>::quiet_NaN());
    x = y / total;
    out.value = total - shift;
    out.residual = ((A.transpose() * x) - out.value * x).cwiseAbs().maxCoeff();
    out.iterations = static_cast<int>(it);
    if (out.residual <= opts.tol * anorm) {
      out.left = x;
      return out;
    }
  }
  std::ostringstream msg;
  msg << "leading_left_eigenpair: no convergence in " << opts.max_iterations
      << " iterations, residual " << out.residual << " (target "
      << opts.tol * anorm << ")";
  throw ConvergenceError(msg.str(), out.residual);
}

}  // namespace mpbt
