#include "mpbt/params.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mpbt/errors.hpp"
#include "json.hpp"

namespace mpbt {

namespace {

using nlohmann::json;

std::string index_list(const std::vector<int>& idx) {
  std::ostringstream out;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) out << ", ";
    out << idx[i];
  }
  return out.str();
}

}  // namespace

ModelParams ModelParams::create(const Eigen::VectorXd& pi,
                                const Eigen::VectorXd& lambda,
                                const Eigen::MatrixXd& s_offdiag) {
  const int m = static_cast<int>(lambda.size());
  if (m < 1) throw StructureError("need at least one type, got m = 0");
  if (pi.size() != m)
    throw StructureError("pi has " + std::to_string(pi.size()) +
                         " entries but lambda has " + std::to_string(m));
  if (s_offdiag.rows() != m || s_offdiag.cols() != m)
    throw StructureError("s_offdiag must be " + std::to_string(m) + "x" +
                         std::to_string(m) + ", got " +
                         std::to_string(s_offdiag.rows()) + "x" +
                         std::to_string(s_offdiag.cols()));
  for (int i = 0; i < m; ++i) {
    if (!(lambda(i) >= 0.0) || !std::isfinite(lambda(i)))
      throw StructureError("lambda[" + std::to_string(i) +
                           "] must be finite and nonnegative");
    if (!(pi(i) >= 0.0) || !std::isfinite(pi(i)))
      throw StructureError("pi[" + std::to_string(i) +
                           "] must be finite and nonnegative");
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      if (!(s_offdiag(i, j) >= 0.0) || !std::isfinite(s_offdiag(i, j)))
        throw StructureError("switching rate s[" + std::to_string(i) + "][" +
                             std::to_string(j) +
                             "] must be finite and nonnegative");
    }
  }
  const double total = pi.sum();
  if (std::abs(total - 1.0) > 1e-12)
    throw StructureError("pi must sum to 1, got " + std::to_string(total));

  ModelParams p;
  p.m = m;
  p.pi = pi;
  p.lambda = lambda;
  p.S = s_offdiag;
  for (int i = 0; i < m; ++i) {
    double row = 0.0;
    for (int j = 0; j < m; ++j)
      if (j != i) row += s_offdiag(i, j);
    p.S(i, i) = -row;
  }
  return p;
}

DerivedMatrices derive(const ModelParams& params) {
  const int m = params.m;
  DerivedMatrices d;
  d.D = params.lambda.asDiagonal();
  d.U = params.S - d.D;
  d.A = params.S + d.D;
  d.Q = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  d.Q.topLeftCorner(m, m) = d.U;
  d.Q.topRightCorner(m, m) = d.D;
  return d;
}

bool ValidationReport::all_passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

ValidationReport validate(const ModelParams& params, double tol) {
  const int m = params.m;
  ValidationReport report;

  {
    AssumptionCheck c{1, "speciation rates positive", true, ""};
    std::vector<int> bad;
    for (int i = 0; i < m; ++i)
      if (!(params.lambda(i) > 0.0)) bad.push_back(i);
    if (!bad.empty()) {
      c.passed = false;
      c.detail = "nonpositive lambda at indices " + index_list(bad);
    }
    report.checks.push_back(std::move(c));
  }

  {
    AssumptionCheck c{2, "switching rates positive", true, ""};
    std::vector<int> bad;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        if (i != j && !(params.S(i, j) > 0.0)) bad.push_back(i * m + j);
    if (!bad.empty()) {
      c.passed = false;
      c.detail = "nonpositive switching rate at flat indices " + index_list(bad);
    }
    report.checks.push_back(std::move(c));
  }

  {
    AssumptionCheck c{3, "moment matrix nonsingular", true, ""};
    const Eigen::MatrixXd M = genericity_matrix(params);
    double scale = 1.0;
    for (int j = 0; j < m; ++j) scale *= std::max(M.col(j).norm(), 1e-30);
    const double det = M.determinant();
    if (!(std::abs(det) > tol * scale)) {
      std::ostringstream detail;
      detail << "det = " << det << ", threshold = " << tol * scale;
      c.passed = false;
      c.detail = detail.str();
    }
    report.checks.push_back(std::move(c));
  }

  {
    AssumptionCheck c{4, "speciation rates distinct", true, ""};
    std::vector<int> bad;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        const double gap = std::abs(params.lambda(i) - params.lambda(j));
        const double scale =
            std::max(std::abs(params.lambda(i)), std::abs(params.lambda(j)));
        if (!(gap > tol * std::max(scale, 1e-30))) {
          bad.push_back(i);
          bad.push_back(j);
        }
      }
    if (!bad.empty()) {
      c.passed = false;
      c.detail = "tied rate pairs at indices " + index_list(bad);
    }
    report.checks.push_back(std::move(c));
  }

  return report;
}

Eigen::MatrixXd genericity_matrix(const ModelParams& params) {
  const int m = params.m;
  const Eigen::MatrixXd U = derive(params).U;
  Eigen::MatrixXd M(m, m);
  Eigen::VectorXd col = Eigen::VectorXd::Ones(m);
  for (int j = 0; j < m; ++j) {
    M.col(j) = col;
    if (j + 1 < m) col = U * col;
  }
  return M;
}

double genericity_det(const ModelParams& params) {
  return genericity_matrix(params).determinant();
}

namespace {

// Turns a byte offset from the JSON parser into "line L, column C".
std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

Eigen::VectorXd vector_field(const json& j, const char* key) {
  const auto& arr = j.at(key);
  if (!arr.is_array()) throw IoError(std::string(key) + " must be an array");
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  return v;
}

}  // namespace

ModelParams params_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError("parameter JSON parse error at " + locate(text, e.byte) +
                  ": " + e.what());
  }
  try {
    const int m = j.at("m").get<int>();
    const Eigen::VectorXd pi = vector_field(j, "pi");
    const Eigen::VectorXd lambda = vector_field(j, "lambda");
    const auto& rows = j.at("s_offdiag");
    if (!rows.is_array() || rows.size() != static_cast<std::size_t>(m))
      throw IoError("s_offdiag must be an array of " + std::to_string(m) +
                    " rows");
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      const auto& row = rows[static_cast<std::size_t>(i)];
      if (!row.is_array() || row.size() != static_cast<std::size_t>(m))
        throw IoError("s_offdiag row " + std::to_string(i) + " must have " +
                      std::to_string(m) + " entries");
      for (int c = 0; c < m; ++c)
        s(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    if (lambda.size() != m || pi.size() != m)
      throw StructureError("pi and lambda must each have m = " +
                           std::to_string(m) + " entries");
    return ModelParams::create(pi, lambda, s);
  } catch (const json::exception& e) {
    throw IoError(std::string("parameter JSON missing or mistyped field: ") +
                  e.what());
  }
}

std::string params_to_json(const ModelParams& params) {
  json j;
  j["m"] = params.m;
  j["pi"] = std::vector<double>(params.pi.data(), params.pi.data() + params.m);
  j["lambda"] =
      std::vector<double>(params.lambda.data(), params.lambda.data() + params.m);
  json rows = json::array();
  for (int i = 0; i < params.m; ++i) {
    json row = json::array();
    for (int c = 0; c < params.m; ++c)
      row.push_back(i == c ? 0.0 : params.S(i, c));
    rows.push_back(std::move(row));
  }
  j["s_offdiag"] = std::move(rows);
  return j.dump(2) + "\n";
}

ModelParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open parameter file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return params_from_json(buf.str());
}

void save_params(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write parameter file: " + path);
  out << params_to_json(params);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace mpbt
