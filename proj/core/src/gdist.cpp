#include "mpbt/gdist.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "mpbt/errors.hpp"
#include "mpbt/linalg.hpp"

namespace mpbt {

namespace {

void require_taus(double t0, double t1, double t2, const char* who) {
  if (!(t0 >= 0.0) || !(t1 >= 0.0) || !(t2 >= 0.0))
    throw StructureError(std::string(who) + ": lengths must be nonnegative");
}

Eigen::VectorXd leading_u(const ModelParams& params) {
  return leading_left_eigenpair(derive(params).A).left;
}

}  // namespace

std::vector<EdgeTriple> extract_triples(const ColoredTree& tree, double t,
                                        ExtractMode mode, Rng& rng) {
  if (!(t > 0.0) || !(t < tree.depth))
    throw StructureError("extract_triples: need 0 < t < depth");

  // Edges alive at t: parent born at or before t, endpoint strictly after.
  std::vector<std::int64_t> alive;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    if (n.is_root()) continue;
    const double pt = tree.nodes[static_cast<std::size_t>(n.parent)].time;
    if (pt <= t && t < n.time) alive.push_back(static_cast<std::int64_t>(i));
  }
  if (alive.empty())
    throw StructureError(
        "extract_triples: no edges alive at the requested time");

  auto type_at = [&](const ColoredTree::Node& n, double offset) {
    double acc = 0.0;
    for (const auto& seg : n.edge.segments) {
      acc += seg.duration;
      if (offset < acc) return seg.type;
    }
    return n.edge.end_type;
  };

  auto build = [&](std::int64_t id) -> std::pair<bool, EdgeTriple> {
    const auto& n = tree.nodes[static_cast<std::size_t>(id)];
    if (!n.edge.speciated()) return {false, {}};
    const double l0 = n.time - t;
    const double budget = tree.depth - t - l0;
    const auto& c0 = tree.nodes[static_cast<std::size_t>(n.children[0])];
    const auto& c1 = tree.nodes[static_cast<std::size_t>(n.children[1])];
    if (!c0.edge.speciated() || !c1.edge.speciated()) return {false, {}};
    if (!(c0.edge.length < budget) || !(c1.edge.length < budget))
      return {false, {}};
    EdgeTriple triple;
    triple.l0 = l0;
    triple.l1 = c0.edge.length;
    triple.l2 = c1.edge.length;
    if (rng.uniform() < 0.5) std::swap(triple.l1, triple.l2);
    triple.has_hidden = true;
    const double pt = tree.nodes[static_cast<std::size_t>(n.parent)].time;
    triple.hidden_start_type = type_at(n, t - pt);
    triple.hidden_end_type = n.edge.end_type;
    return {true, triple};
  };

  std::vector<EdgeTriple> out;
  if (mode == ExtractMode::OnePerTree) {
    const std::int64_t pick =
        alive[static_cast<std::size_t>(rng.below(alive.size()))];
    auto [ok, triple] = build(pick);
    if (ok) out.push_back(triple);
  } else {
    for (std::int64_t id : alive) {
      auto [ok, triple] = build(id);
      if (ok) out.push_back(triple);
    }
  }
  return out;
}

double g_infinity_cdf(const ModelParams& params, double tau0, double tau1,
                      double tau2) {
  require_taus(tau0, tau1, tau2, "g_infinity_cdf");
  // the margins are continuous, so the cdf vanishes exactly on the boundary
  if (tau0 == 0.0 || tau1 == 0.0 || tau2 == 0.0) return 0.0;
  const DerivedMatrices d = derive(params);
  const Eigen::VectorXd u = leading_u(params);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(params.m);
  // Branched block of the edge-chain transition matrix at tau0.
  const Eigen::MatrixXd P01 =
      d.U.partialPivLu().solve(matrix_exp(d.U, tau0) - Eigen::MatrixXd::Identity(
                                                           params.m, params.m)) *
      d.D;
  const Eigen::VectorXd F1 = ones - matrix_exp(d.U, tau1) * ones;
  const Eigen::VectorXd F2 = ones - matrix_exp(d.U, tau2) * ones;
  double value = 0.0;
  // grouping the child factors keeps the result symmetric in tau1, tau2
  for (int j = 0; j < params.m; ++j)
    value += (u.transpose() * P01.col(j)).value() * (F1(j) * F2(j));
  return value;
}

double g_infinity_density(const ModelParams& params, double tau0, double tau1,
                          double tau2) {
  require_taus(tau0, tau1, tau2, "g_infinity_density");
  const DerivedMatrices d = derive(params);
  const Eigen::VectorXd u = leading_u(params);
  const Eigen::RowVectorXd w = u.transpose() * matrix_exp(d.U, tau0) * d.D;
  const Eigen::VectorXd f1 = matrix_exp(d.U, tau1) * params.lambda;
  const Eigen::VectorXd f2 = matrix_exp(d.U, tau2) * params.lambda;
  double value = 0.0;
  for (int j = 0; j < params.m; ++j) value += w(j) * (f1(j) * f2(j));
  return value;
}

double MixtureSpec::parent_density(int j, double tau) const {
  const Eigen::VectorXd col = matrix_exp(U_, tau) * D_.col(j);
  return u_.dot(col) / weights_(j);
}

double MixtureSpec::parent_cdf(int j, double tau) const {
  const int m = static_cast<int>(u_.size());
  const Eigen::MatrixXd P01 =
      U_.partialPivLu().solve(matrix_exp(U_, tau) -
                              Eigen::MatrixXd::Identity(m, m)) *
      D_;
  return u_.dot(P01.col(j)) / weights_(j);
}

double MixtureSpec::child_density(int j, double tau) const {
  return (matrix_exp(U_, tau) * lambda_)(j);
}

double MixtureSpec::child_cdf(int j, double tau) const {
  const int m = static_cast<int>(u_.size());
  return 1.0 - (matrix_exp(U_, tau) * Eigen::VectorXd::Ones(m))(j);
}

MixtureSpec mixture_components(const ModelParams& params) {
  const DerivedMatrices d = derive(params);
  MixtureSpec spec;
  spec.u_ = leading_u(params);
  spec.U_ = d.U;
  spec.D_ = d.D;
  spec.lambda_ = params.lambda;
  const Eigen::MatrixXd absorb = -d.U.partialPivLu().solve(d.D);
  spec.weights_ = absorb.transpose() * spec.u_;
  return spec;
}

AnalyticTripleSampler::AnalyticTripleSampler(const ModelParams& params)
    : sampler_(params) {
  const Eigen::VectorXd u = leading_u(params);
  u_cum_.resize(u.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    acc += u(i);
    u_cum_(i) = acc;
  }
}

EdgeTriple AnalyticTripleSampler::sample(Rng& rng) const {
  const double pick = rng.uniform();
  int start = static_cast<int>(u_cum_.size()) - 1;
  for (Eigen::Index i = 0; i < u_cum_.size(); ++i) {
    if (pick < u_cum_(i)) {
      start = static_cast<int>(i);
      break;
    }
  }
  const auto focal = sampler_.sample_outcome(start, kUnbounded, rng);
  const int j = focal.end_type;
  const auto child1 = sampler_.sample_outcome(j, kUnbounded, rng);
  const auto child2 = sampler_.sample_outcome(j, kUnbounded, rng);
  EdgeTriple triple;
  triple.l0 = focal.length;
  triple.l1 = child1.length;
  triple.l2 = child2.length;
  triple.has_hidden = true;
  triple.hidden_start_type = start;
  triple.hidden_end_type = j;
  return triple;
}

EdgeTriple sample_triple_analytic(const ModelParams& params, Rng& rng) {
  return AnalyticTripleSampler(params).sample(rng);
}

GDensityEvaluator::GDensityEvaluator(const ModelParams& params)
    : m_(params.m) {
  const DerivedMatrices d = derive(params);
  U_ = d.U;
  D_ = d.D;
  u_ = leading_u(params);
  lambda_ = params.lambda;

  Eigen::EigenSolver<Eigen::MatrixXd> es(U_);
  if (es.info() != Eigen::Success) return;
  const Eigen::VectorXcd rho = es.eigenvalues();
  const Eigen::MatrixXcd V = es.eigenvectors();
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(V);
  if (!lu.isInvertible()) return;
  const Eigen::MatrixXcd Vinv = lu.inverse();

  // Reject ill-conditioned eigenbases; the fallback stays exact.
  const double cond = V.cwiseAbs().colwise().sum().maxCoeff() *
                      Vinv.cwiseAbs().colwise().sum().maxCoeff();
  if (!(cond < 1e10)) return;
  const double recon =
      (V * rho.asDiagonal() * Vinv - U_.cast<std::complex<double>>())
          .cwiseAbs()
          .maxCoeff();
  if (!(recon < 1e-9 * std::max(1.0, U_.cwiseAbs().maxCoeff()))) return;

  const Eigen::RowVectorXcd a =
      u_.transpose().cast<std::complex<double>>() * V;
  const Eigen::MatrixXcd W = Vinv * D_.cast<std::complex<double>>();
  const Eigen::VectorXcd c = Vinv * lambda_.cast<std::complex<double>>();

  rho_c_ = rho;
  // qf_(a, j) = a_a W_aj so q_j(tau0) = sum_a exp(rho_a tau0) qf_(a, j);
  // vf_(j, a) = V_ja c_a so f_j(tau) = sum_a exp(rho_a tau) vf_(j, a).
  qf_c_ = a.transpose().asDiagonal() * W;
  vf_c_ = V * c.asDiagonal();

  double max_imag = 0.0;
  for (Eigen::Index i = 0; i < rho.size(); ++i)
    max_imag = std::max(max_imag, std::abs(rho(i).imag()));
  if (max_imag < 1e-12 * std::max(1.0, U_.cwiseAbs().maxCoeff())) {
    real_spectrum_ = true;
    rho_ = rho.real();
    qf_ = qf_c_.real();
    vf_ = vf_c_.real();
  }
  spectral_ = true;
}

double GDensityEvaluator::density_direct(double l0, double l1,
                                         double l2) const {
  const Eigen::RowVectorXd w = u_.transpose() * matrix_exp(U_, l0) * D_;
  const Eigen::VectorXd f1 = matrix_exp(U_, l1) * lambda_;
  const Eigen::VectorXd f2 = matrix_exp(U_, l2) * lambda_;
  double value = 0.0;
  for (int j = 0; j < m_; ++j) value += w(j) * f1(j) * f2(j);
  return value;
}

double GDensityEvaluator::density(double l0, double l1, double l2) const {
  if (!(l0 >= 0.0) || !(l1 >= 0.0) || !(l2 >= 0.0))
    throw StructureError("density: lengths must be nonnegative");
  if (!spectral_) return density_direct(l0, l1, l2);

  if (real_spectrum_ && m_ <= 64) {
    double E0[64], E1[64], E2[64];
    for (int a = 0; a < m_; ++a) {
      E0[a] = std::exp(rho_(a) * l0);
      E1[a] = std::exp(rho_(a) * l1);
      E2[a] = std::exp(rho_(a) * l2);
    }
    double value = 0.0;
    for (int j = 0; j < m_; ++j) {
      double q = 0.0, f1 = 0.0, f2 = 0.0;
      for (int a = 0; a < m_; ++a) {
        q += E0[a] * qf_(a, j);
        f1 += E1[a] * vf_(j, a);
        f2 += E2[a] * vf_(j, a);
      }
      value += q * f1 * f2;
    }
    return value;
  }

  std::complex<double> value = 0.0;
  for (int j = 0; j < m_; ++j) {
    std::complex<double> q = 0.0, f1 = 0.0, f2 = 0.0;
    for (int a = 0; a < m_; ++a) {
      q += std::exp(rho_c_(a) * l0) * qf_c_(a, j);
      f1 += std::exp(rho_c_(a) * l1) * vf_c_(j, a);
      f2 += std::exp(rho_c_(a) * l2) * vf_c_(j, a);
    }
    value += q * f1 * f2;
  }
  return value.real();
}

void write_triples_csv(const std::string& path,
                       const std::vector<EdgeTriple>& triples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write triple CSV: " + path);
  out << "l0,l1,l2\n";
  char buf[128];
  for (const auto& tr : triples) {
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g\n", tr.l0, tr.l1,
                  tr.l2);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<EdgeTriple> read_triples_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open triple CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty triple CSV: " + path);
  // Tolerate a UTF-8 BOM and trailing carriage returns.
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
    line.erase(0, 3);
  while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
    line.pop_back();
  if (line != "l0,l1,l2")
    throw IoError("triple CSV must start with header 'l0,l1,l2', got '" +
                  line + "'");
  std::vector<EdgeTriple> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (line.empty()) continue;
    EdgeTriple tr;
    char extra;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf%c", &tr.l0, &tr.l1, &tr.l2,
                    &extra) != 3)
      throw IoError("triple CSV line " + std::to_string(lineno) +
                    " is malformed: '" + line + "'");
    for (double v : {tr.l0, tr.l1, tr.l2})
      if (!std::isfinite(v) || v < 0.0)
        throw IoError("triple CSV line " + std::to_string(lineno) +
                      " holds a negative or non-finite length: '" + line +
                      "'");
    out.push_back(tr);
  }
  return out;
}

}  // namespace mpbt
