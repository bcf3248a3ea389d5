// Command line front end: validate parameter files, simulate trees,
// harvest triples, tabulate the depth-limit density, fit, and run
// recovery experiments. Exit codes: 0 success, 1 validation or growth
// guard refusal, 2 I/O or parse failure, 3 optimizer non-convergence.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mpbt/edge_process.hpp"
#include "mpbt/errors.hpp"
#include "mpbt/gdist.hpp"
#include "mpbt/identify.hpp"
#include "mpbt/linalg.hpp"
#include "mpbt/params.hpp"
#include "mpbt/rng.hpp"
#include "mpbt/tree_sim.hpp"

namespace {

using nlohmann::json;
using namespace mpbt;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitConvergence = 3;

json params_json(const ModelParams& p) { return json::parse(params_to_json(p)); }

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

// The lineage cap: explicit flag wins, then the MPBT_MAX_LINEAGES
// environment variable, then the library default.
double resolve_max_lineages(bool flag_set, double flag_value) {
  if (flag_set) return flag_value;
  if (const char* env = std::getenv("MPBT_MAX_LINEAGES")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end == env || *end != '\0' || !(v > 0.0))
      throw IoError("MPBT_MAX_LINEAGES must be a positive number, got: " +
                    std::string(env));
    return v;
  }
  return SimOptions{}.max_expected_lineages;
}

std::uint64_t resolve_seed(bool seed_set, std::uint64_t seed) {
  if (seed_set) return seed;
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

ExtractMode parse_mode(const std::string& mode) {
  if (mode == "one-per-tree") return ExtractMode::OnePerTree;
  if (mode == "all-eligible") return ExtractMode::AllEligible;
  throw IoError("unknown mode: " + mode);
}

struct ValidateArgs {
  std::string params_path;
  std::string out_path;
};

int run_validate(const ValidateArgs& args) {
  const ModelParams params = load_params(args.params_path);
  const ValidationReport report = validate(params);
  json checks = json::array();
  for (const AssumptionCheck& c : report.checks) {
    std::printf("%s  %s%s%s\n", c.passed ? "pass" : "FAIL", c.name.c_str(),
                c.detail.empty() ? "" : ": ", c.detail.c_str());
    checks.push_back({{"id", c.id},
                      {"name", c.name},
                      {"passed", c.passed},
                      {"detail", c.detail}});
  }
  if (!args.out_path.empty()) {
    const json doc = {{"config", {{"params", args.params_path}}},
                      {"params", params_json(params)},
                      {"checks", checks},
                      {"all_passed", report.all_passed()}};
    write_text(args.out_path, doc.dump(2) + "\n");
  }
  return report.all_passed() ? kExitOk : kExitValidation;
}

struct SimulateArgs {
  std::string params_path;
  double depth = 0.0;
  int replicates = 1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  bool bifurcating_root = false;
  double max_lineages = 0.0;
  bool max_lineages_set = false;
};

int run_simulate(const SimulateArgs& args) {
  const ModelParams params = load_params(args.params_path);
  SimOptions opts;
  opts.max_expected_lineages =
      resolve_max_lineages(args.max_lineages_set, args.max_lineages);
  opts.bifurcating_root = args.bifurcating_root;
  const std::uint64_t seed = resolve_seed(args.seed_set, args.seed);

  std::filesystem::create_directories(args.out_dir);
  std::string newick;
  std::string colored = "[\n";
  Rng rng(seed);
  double leaf_total = 0.0;
  Eigen::VectorXd freq_total = Eigen::VectorXd::Zero(params.m);
  for (int k = 0; k < args.replicates; ++k) {
    const ColoredTree tree = simulate_tree(params, args.depth, rng, opts);
    newick += to_newick(uncolor(tree));
    newick += '\n';
    if (k > 0) colored += ",\n";
    colored += colored_tree_to_json(tree);
    leaf_total += static_cast<double>(tree.leaf_count());
    freq_total += type_counts(tree, args.depth).freqs;
  }
  colored += "\n]\n";

  const DerivedMatrices derived = derive(params);
  const LeadingEigenpair growth = leading_left_eigenpair(derived.A);
  const double n = static_cast<double>(args.replicates);
  const json summary = {
      {"config",
       {{"params", args.params_path},
        {"depth", args.depth},
        {"replicates", args.replicates},
        {"bifurcating_root", args.bifurcating_root},
        {"max_expected_lineages", opts.max_expected_lineages}}},
      {"params", params_json(params)},
      {"seed", seed},
      {"mean_leaf_count", leaf_total / n},
      {"mean_type_freqs", vector_json(freq_total / n)},
      {"analytic_stable_freqs", vector_json(growth.left)},
      {"growth_rate", growth.value}};

  const std::filesystem::path dir(args.out_dir);
  write_text((dir / "trees.nwk").string(), newick);
  write_text((dir / "colored.json").string(), colored);
  write_text((dir / "summary.json").string(), summary.dump(2) + "\n");
  return kExitOk;
}

struct TriplesArgs {
  std::string params_path;
  double depth = 0.0;
  double time = 0.0;
  int replicates = 1;
  std::string mode = "one-per-tree";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_path;
  double max_lineages = 0.0;
  bool max_lineages_set = false;
};

int run_triples(const TriplesArgs& args) {
  const ModelParams params = load_params(args.params_path);
  const ExtractMode mode = parse_mode(args.mode);
  if (!(args.time > 0.0) || !(args.time < args.depth))
    throw StructureError("--time must lie strictly between 0 and --depth");
  SimOptions opts;
  opts.max_expected_lineages =
      resolve_max_lineages(args.max_lineages_set, args.max_lineages);
  const std::uint64_t seed = resolve_seed(args.seed_set, args.seed);

  Rng rng(seed);
  std::vector<EdgeTriple> triples;
  for (int k = 0; k < args.replicates; ++k) {
    const ColoredTree tree = simulate_tree(params, args.depth, rng, opts);
    const std::vector<EdgeTriple> got =
        extract_triples(tree, args.time, mode, rng);
    triples.insert(triples.end(), got.begin(), got.end());
  }
  write_triples_csv(args.out_path, triples);

  const json meta = {{"config",
                      {{"params", args.params_path},
                       {"depth", args.depth},
                       {"time", args.time},
                       {"replicates", args.replicates},
                       {"mode", args.mode},
                       {"max_expected_lineages", opts.max_expected_lineages}}},
                     {"params", params_json(params)},
                     {"seed", seed},
                     {"trees_used", args.replicates},
                     {"n_triples", triples.size()}};
  write_text(args.out_path + ".meta.json", meta.dump(2) + "\n");
  return kExitOk;
}

struct DensityArgs {
  std::string params_path;
  double grid_max = 0.0;
  int grid_steps = 25;
  std::string out_path;
};

int run_density(const DensityArgs& args) {
  const ModelParams params = load_params(args.params_path);
  if (!(args.grid_max > 0.0))
    throw StructureError("--grid-max must be positive");
  if (args.grid_steps < 2)
    throw StructureError("--grid-steps must be at least 2");
  const GDensityEvaluator evaluator(params);

  const int k = args.grid_steps;
  const double h = args.grid_max / (k - 1);
  std::string csv = "tau0,tau1,tau2,pdf,cdf\n";
  csv.reserve(static_cast<std::size_t>(k) * k * k * 64 + 64);
  char line[192];
  for (int i = 0; i < k; ++i) {
    const double t0 = i * h;
    for (int j = 0; j < k; ++j) {
      const double t1 = j * h;
      for (int l = 0; l < k; ++l) {
        const double t2 = l * h;
        const double pdf = evaluator.density(t0, t1, t2);
        const double cdf = g_infinity_cdf(params, t0, t1, t2);
        std::snprintf(line, sizeof(line), "%.12g,%.12g,%.12g,%.12g,%.12g\n",
                      t0, t1, t2, pdf, cdf);
        csv += line;
      }
    }
  }
  write_text(args.out_path, csv);

  const json meta = {{"config",
                      {{"params", args.params_path},
                       {"grid_max", args.grid_max},
                       {"grid_steps", args.grid_steps}}},
                     {"params", params_json(params)},
                     {"rows", k * k * k}};
  write_text(args.out_path + ".meta.json", meta.dump(2) + "\n");
  return kExitOk;
}

struct FitArgs {
  std::string triples_path;
  int types = 0;
  int starts = 10;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_path;
  int max_iterations = 0;
};

int run_fit(const FitArgs& args) {
  const std::vector<EdgeTriple> triples = read_triples_csv(args.triples_path);
  const std::uint64_t seed = resolve_seed(args.seed_set, args.seed);
  FitConfig config;
  if (args.max_iterations > 0)
    config.optimizer.max_iterations = args.max_iterations;

  Rng rng(seed);
  const auto t0 = std::chrono::steady_clock::now();
  const FitResult fit = fit_mle(triples, args.types, args.starts, rng, config);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const json doc = {
      {"config",
       {{"triples", args.triples_path},
        {"types", args.types},
        {"starts", args.starts},
        {"max_iterations", config.optimizer.max_iterations}}},
      {"seed", seed},
      {"n_triples", fit.n_triples},
      {"lambda", vector_json(fit.params_hat.lambda)},
      {"s", matrix_json(fit.params_hat.S)},
      {"pi", vector_json(fit.params_hat.pi)},
      {"pi_identified", fit.pi_identified},
      {"loglik", fit.loglik},
      {"converged", fit.converged},
      {"n_starts", fit.starts},
      {"best_start_index", fit.best_start_index},
      {"permutation", fit.permutation},
      {"floored_evaluations", fit.floored_evaluations},
      {"near_tie_warning", fit.near_tie_warning},
      {"total_evaluations", fit.total_evaluations},
      {"wall_time_sec", wall}};
  write_text(args.out_path, doc.dump(2) + "\n");
  return kExitOk;
}

struct RecoverArgs {
  std::string params_path;
  std::int64_t n_triples = 0;
  std::string source = "analytic";
  double depth = 0.0;
  double time_fraction = 0.5;
  std::string mode = "all-eligible";
  int starts = 10;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_path;
  std::int64_t max_trees = 1000000;
  double max_lineages = 0.0;
  bool max_lineages_set = false;
};

int run_recover(const RecoverArgs& args) {
  const ModelParams truth = load_params(args.params_path);
  const std::uint64_t seed = resolve_seed(args.seed_set, args.seed);

  TripleSource source;
  if (args.source == "analytic") {
    source = TripleSource::analytic();
  } else if (args.source == "trees") {
    source = TripleSource::simulated(args.depth, parse_mode(args.mode));
    source.time_fraction = args.time_fraction;
    source.max_trees = args.max_trees;
    source.max_expected_lineages =
        resolve_max_lineages(args.max_lineages_set, args.max_lineages);
  } else {
    throw IoError("unknown source: " + args.source);
  }

  const auto t0 = std::chrono::steady_clock::now();
  const RecoveryReport report =
      recovery_experiment(truth, args.n_triples, source, args.starts, seed);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const json doc = {
      {"config",
       {{"params", args.params_path},
        {"n_triples", args.n_triples},
        {"source", args.source},
        {"depth", args.depth},
        {"time_fraction", args.time_fraction},
        {"mode", args.mode},
        {"starts", args.starts},
        {"max_trees", args.max_trees}}},
      {"seed", seed},
      {"true_canonical", params_json(report.true_canonical)},
      {"fit_canonical", params_json(report.fit_canonical)},
      {"lambda_rel_err", vector_json(report.lambda_rel_err)},
      {"s_rel_err", matrix_json(report.s_rel_err)},
      {"max_rel_err", report.max_rel_err},
      {"n_triples", report.n_triples},
      {"trees_used", report.trees_used},
      {"converged", report.fit.converged},
      {"near_tie_warning", report.fit.near_tie_warning},
      {"wall_time_sec", wall}};
  write_text(args.out_path, doc.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multitype pure-birth trees: simulation, analytics, fitting"};
  app.require_subcommand(1);

  ValidateArgs validate_args;
  CLI::App* validate_cmd =
      app.add_subcommand("validate", "check a parameter file's assumptions");
  validate_cmd->add_option("--params", validate_args.params_path)->required();
  validate_cmd->add_option("--out", validate_args.out_path);

  SimulateArgs sim_args;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "grow trees to a depth");
  sim_cmd->add_option("--params", sim_args.params_path)->required();
  sim_cmd->add_option("--depth", sim_args.depth)->required();
  sim_cmd->add_option("--replicates", sim_args.replicates)
      ->check(CLI::PositiveNumber);
  CLI::Option* sim_seed = sim_cmd->add_option("--seed", sim_args.seed);
  sim_cmd->add_option("--out", sim_args.out_dir)->required();
  sim_cmd->add_flag("--bifurcating-root", sim_args.bifurcating_root);
  CLI::Option* sim_cap =
      sim_cmd->add_option("--max-lineages", sim_args.max_lineages);

  TriplesArgs triples_args;
  CLI::App* triples_cmd =
      app.add_subcommand("triples", "harvest length triples from trees");
  triples_cmd->add_option("--params", triples_args.params_path)->required();
  triples_cmd->add_option("--depth", triples_args.depth)->required();
  triples_cmd->add_option("--time", triples_args.time)->required();
  triples_cmd->add_option("--replicates", triples_args.replicates)
      ->check(CLI::PositiveNumber);
  triples_cmd->add_option("--mode", triples_args.mode)
      ->check(CLI::IsMember({"one-per-tree", "all-eligible"}));
  CLI::Option* triples_seed =
      triples_cmd->add_option("--seed", triples_args.seed);
  triples_cmd->add_option("--out", triples_args.out_path)->required();
  CLI::Option* triples_cap =
      triples_cmd->add_option("--max-lineages", triples_args.max_lineages);

  DensityArgs density_args;
  CLI::App* density_cmd =
      app.add_subcommand("density", "tabulate the depth-limit law on a grid");
  density_cmd->add_option("--params", density_args.params_path)->required();
  density_cmd->add_option("--grid-max", density_args.grid_max)->required();
  density_cmd->add_option("--grid-steps", density_args.grid_steps);
  density_cmd->add_option("--out", density_args.out_path)->required();

  FitArgs fit_args;
  CLI::App* fit_cmd =
      app.add_subcommand("fit", "maximum likelihood from a triples CSV");
  fit_cmd->add_option("--triples", fit_args.triples_path)->required();
  fit_cmd->add_option("--types", fit_args.types)->required()
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--starts", fit_args.starts)->check(CLI::PositiveNumber);
  CLI::Option* fit_seed = fit_cmd->add_option("--seed", fit_args.seed);
  fit_cmd->add_option("--out", fit_args.out_path)->required();
  fit_cmd->add_option("--max-iterations", fit_args.max_iterations);

  RecoverArgs recover_args;
  CLI::App* recover_cmd =
      app.add_subcommand("recover", "end-to-end parameter recovery check");
  recover_cmd->add_option("--params", recover_args.params_path)->required();
  recover_cmd->add_option("--n-triples", recover_args.n_triples)->required();
  recover_cmd->add_option("--source", recover_args.source)
      ->check(CLI::IsMember({"analytic", "trees"}));
  recover_cmd->add_option("--depth", recover_args.depth);
  recover_cmd->add_option("--time-fraction", recover_args.time_fraction);
  recover_cmd->add_option("--mode", recover_args.mode)
      ->check(CLI::IsMember({"one-per-tree", "all-eligible"}));
  recover_cmd->add_option("--starts", recover_args.starts)
      ->check(CLI::PositiveNumber);
  CLI::Option* recover_seed =
      recover_cmd->add_option("--seed", recover_args.seed);
  recover_cmd->add_option("--out", recover_args.out_path)->required();
  recover_cmd->add_option("--max-trees", recover_args.max_trees);
  CLI::Option* recover_cap =
      recover_cmd->add_option("--max-lineages", recover_args.max_lineages);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitIo;
  }

  sim_args.seed_set = sim_seed->count() > 0;
  sim_args.max_lineages_set = sim_cap->count() > 0;
  triples_args.seed_set = triples_seed->count() > 0;
  triples_args.max_lineages_set = triples_cap->count() > 0;
  fit_args.seed_set = fit_seed->count() > 0;
  recover_args.seed_set = recover_seed->count() > 0;
  recover_args.max_lineages_set = recover_cap->count() > 0;

  try {
    if (validate_cmd->parsed()) return run_validate(validate_args);
    if (sim_cmd->parsed()) return run_simulate(sim_args);
    if (triples_cmd->parsed()) return run_triples(triples_args);
    if (density_cmd->parsed()) return run_density(density_args);
    if (fit_cmd->parsed()) return run_fit(fit_args);
    if (recover_cmd->parsed()) return run_recover(recover_args);
  } catch (const GrowthGuardError& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ConvergenceError& e) {
    std::cerr << "no convergence: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const StructureError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
