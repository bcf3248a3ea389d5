#include "mpbt/tree_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mpbt/errors.hpp"
#include "mpbt/linalg.hpp"
#include "json.hpp"

namespace mpbt {

namespace {

// Growth guard shared by both simulation paths. Returns the hard cap on
// created nodes; throws if the expectation already exceeds the soft cap.
std::int64_t growth_guard(const ModelParams& params, double depth,
                          const SimOptions& opts) {
  if (!(depth > 0.0) || !std::isfinite(depth))
    throw StructureError("simulate_tree: depth must be positive and finite");
  const DerivedMatrices d = derive(params);
  const double omega = leading_left_eigenpair(d.A).value;
  const double roots = opts.bifurcating_root ? 2.0 : 1.0;
  const double expected = roots * std::exp(omega * depth);
  if (expected > opts.max_expected_lineages) {
    std::ostringstream msg;
    msg << "refusing to simulate: expected lineage count " << expected
        << " at depth " << depth << " exceeds cap " << opts.max_expected_lineages
        << " (raise SimOptions::max_expected_lineages or MPBT_MAX_LINEAGES)";
    throw GrowthGuardError(msg.str(), expected, opts.max_expected_lineages);
  }
  const double hard = 64.0 * std::max(expected, 1.0) + 4096.0;
  return static_cast<std::int64_t>(std::min(hard, 9.2e18));
}

int draw_root_type(const ModelParams& params, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (int i = 0; i < params.m; ++i) {
    acc += params.pi(i);
    if (u < acc) return i;
  }
  return params.m - 1;
}

[[noreturn]] void throw_hard_cap(std::int64_t hard_cap, double cap) {
  throw GrowthGuardError(
      "simulation exceeded the hard node limit of " + std::to_string(hard_cap) +
          "; the realized tree is far beyond its expected size",
      static_cast<double>(hard_cap), cap);
}

}  // namespace

std::int64_t ColoredTree::leaf_count() const {
  std::int64_t n = 0;
  for (const auto& node : nodes)
    if (node.is_leaf()) ++n;
  return n;
}

ColoredTree simulate_tree(const ModelParams& params, double depth, Rng& rng,
                          const SimOptions& opts) {
  const std::int64_t hard_cap = growth_guard(params, depth, opts);
  const EdgeSampler sampler(params);

  ColoredTree tree;
  tree.depth = depth;
  tree.bifurcating_root = opts.bifurcating_root;
  tree.types = params.m;
  tree.nodes.push_back({});  // root at time 0

  // Sampled edges wait in an arena; the heap orders (end time, sequence)
  // so ties at the depth horizon pop in creation order.
  struct Pending {
    double end_time;
    std::int64_t parent;
    EdgeRealization edge;
  };
  std::vector<Pending> arena;
  using Key = std::pair<double, std::size_t>;
  std::vector<Key> heap;
  auto later = [](const Key& a, const Key& b) { return a > b; };

  auto push_edge = [&](std::int64_t parent, double birth, int start_type) {
    EdgeRealization edge = sampler.sample(start_type, depth - birth, rng);
    const double end =
        edge.speciated() ? birth + edge.length : depth;
    arena.push_back({end, parent, std::move(edge)});
    heap.emplace_back(end, arena.size() - 1);
    std::push_heap(heap.begin(), heap.end(), later);
  };

  const int root_type = draw_root_type(params, rng);
  push_edge(0, 0.0, root_type);
  if (opts.bifurcating_root) push_edge(0, 0.0, root_type);

  while (!heap.empty()) {
    std::pop_heap(heap.begin(), heap.end(), later);
    const std::size_t slot = heap.back().second;
    heap.pop_back();
    Pending pending = std::move(arena[slot]);

    const std::int64_t id = static_cast<std::int64_t>(tree.nodes.size());
    if (id > hard_cap) throw_hard_cap(hard_cap, opts.max_expected_lineages);
    ColoredTree::Node node;
    node.parent = pending.parent;
    node.time = pending.end_time;
    node.edge = std::move(pending.edge);
    auto& parent_children = tree.nodes[static_cast<std::size_t>(pending.parent)]
                                .children;
    if (parent_children[0] < 0)
      parent_children[0] = id;
    else
      parent_children[1] = id;
    const bool speciated = node.edge.speciated();
    const int type_here = node.edge.end_type;
    tree.nodes.push_back(std::move(node));
    if (speciated) {
      push_edge(id, tree.nodes.back().time, type_here);
      push_edge(id, tree.nodes.back().time, type_here);
    }
  }
  return tree;
}

MetricTree uncolor(const ColoredTree& tree) {
  MetricTree out;
  out.depth = tree.depth;
  out.nodes.resize(tree.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    out.nodes[i].parent = n.parent;
    out.nodes[i].time = n.time;
    out.nodes[i].children = n.children;
    out.nodes[i].branch_length = n.is_root() ? 0.0 : n.edge.length;
  }
  return out;
}

TypeCount type_counts(const ColoredTree& tree, double t) {
  if (!(t >= 0.0) || !(t <= tree.depth))
    throw StructureError("type_counts: t must lie in [0, depth]");
  TypeCount out;
  out.t = t;
  out.counts = Eigen::VectorXi::Zero(tree.types);
  for (const auto& node : tree.nodes) {
    if (node.is_root()) continue;
    const double pt = tree.nodes[static_cast<std::size_t>(node.parent)].time;
    const double ct = node.time;
    const bool alive_now = pt <= t && t < ct;
    const bool counted_at_end = node.is_leaf() && t == ct;
    if (!alive_now && !counted_at_end) continue;
    const double offset = t - pt;
    int type = node.edge.end_type;
    double acc = 0.0;
    for (const auto& seg : node.edge.segments) {
      acc += seg.duration;
      if (offset < acc) {
        type = seg.type;
        break;
      }
    }
    out.counts(type) += 1;
  }
  const double total = static_cast<double>(out.counts.sum());
  out.freqs = total > 0.0 ? (out.counts.cast<double>() / total).eval()
                          : Eigen::VectorXd::Zero(tree.types).eval();
  return out;
}

JumpDistribution jump_distribution(const ModelParams& params, int type) {
  if (type < 0 || type >= params.m)
    throw StructureError("jump_distribution: type out of range");
  JumpDistribution out;
  out.switch_probs = Eigen::VectorXd::Zero(params.m);
  double total = params.lambda(type);
  for (int j = 0; j < params.m; ++j)
    if (j != type) total += params.S(type, j);
  out.total_rate = total;
  if (total > 0.0) {
    out.speciate_prob = params.lambda(type) / total;
    for (int j = 0; j < params.m; ++j)
      if (j != type) out.switch_probs(j) = params.S(type, j) / total;
  } else {
    out.speciate_prob = 1.0;
  }
  return out;
}

TypeCount simulate_leaf_type_counts(const ModelParams& params, double depth,
                                    Rng& rng, const SimOptions& opts) {
  const std::int64_t hard_cap = growth_guard(params, depth, opts);
  const EdgeSampler sampler(params);

  TypeCount out;
  out.t = depth;
  out.counts = Eigen::VectorXi::Zero(params.m);

  struct Job {
    double birth;
    int type;
  };
  std::vector<Job> stack;
  const int root_type = draw_root_type(params, rng);
  stack.push_back({0.0, root_type});
  if (opts.bifurcating_root) stack.push_back({0.0, root_type});

  std::int64_t edges = 0;
  while (!stack.empty()) {
    const Job job = stack.back();
    stack.pop_back();
    if (++edges > hard_cap) throw_hard_cap(hard_cap, opts.max_expected_lineages);
    const auto res = sampler.sample_outcome(job.type, depth - job.birth, rng);
    if (res.outcome == EdgeOutcome::Speciated) {
      const double birth = job.birth + res.length;
      stack.push_back({birth, res.end_type});
      stack.push_back({birth, res.end_type});
    } else {
      out.counts(res.end_type) += 1;
    }
  }
  const double total = static_cast<double>(out.counts.sum());
  out.freqs = total > 0.0 ? (out.counts.cast<double>() / total).eval()
                          : Eigen::VectorXd::Zero(params.m).eval();
  return out;
}

std::string to_newick(const MetricTree& tree) {
  if (tree.nodes.empty()) throw StructureError("to_newick: empty tree");
  std::string out;
  out.reserve(tree.nodes.size() * 16);

  char buf[64];
  auto append_length = [&](double len) {
    std::snprintf(buf, sizeof(buf), ":%.12g", len);
    out += buf;
  };

  // Explicit stack; entries are (node, phase): phase 0 opens, 1 closes.
  struct Item {
    std::int64_t node;
    int phase;
  };
  std::vector<Item> work;

  auto push_children = [&](std::int64_t id) {
    const auto& n = tree.nodes[static_cast<std::size_t>(id)];
    // Reverse order so children emit left to right.
    if (n.children[1] >= 0) work.push_back({n.children[1], 0});
    if (n.children[0] >= 0) work.push_back({n.children[0], 0});
  };

  out += '(';
  work.push_back({0, 1});
  push_children(0);
  bool first_in_group = true;
  while (!work.empty()) {
    const Item item = work.back();
    work.pop_back();
    const auto& n = tree.nodes[static_cast<std::size_t>(item.node)];
    if (item.phase == 1) {
      if (item.node == 0) break;  // root group closed below
      out += ')';
      append_length(n.branch_length);
      first_in_group = false;
      continue;
    }
    if (!first_in_group) out += ',';
    first_in_group = true;
    if (n.children[0] < 0 && n.children[1] < 0) {
      out += 't' + std::to_string(item.node);
      append_length(n.branch_length);
      first_in_group = false;
      continue;
    }
    out += '(';
    work.push_back({item.node, 1});
    push_children(item.node);
  }
  out += ");";
  return out;
}

namespace {

using nlohmann::json;

json edge_to_json(const EdgeRealization& edge) {
  json segs = json::array();
  for (const auto& s : edge.segments)
    segs.push_back(json::array({s.type, s.duration}));
  return json{{"length", edge.length},
              {"outcome", edge.speciated() ? "speciated" : "truncated"},
              {"end_type", edge.end_type},
              {"segments", std::move(segs)}};
}

EdgeRealization edge_from_json(const json& j) {
  EdgeRealization edge;
  edge.length = j.at("length").get<double>();
  const std::string outcome = j.at("outcome").get<std::string>();
  if (outcome == "speciated")
    edge.outcome = EdgeOutcome::Speciated;
  else if (outcome == "truncated")
    edge.outcome = EdgeOutcome::Truncated;
  else
    throw IoError("tree JSON: unknown edge outcome '" + outcome + "'");
  edge.end_type = j.at("end_type").get<int>();
  for (const auto& s : j.at("segments")) {
    if (!s.is_array() || s.size() != 2)
      throw IoError("tree JSON: segment must be [type, duration]");
    edge.segments.push_back({s[0].get<int>(), s[1].get<double>()});
  }
  return edge;
}

}  // namespace

std::string colored_tree_to_json(const ColoredTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    json jn{{"parent", n.parent},
            {"time", n.time},
            {"children", json::array({n.children[0], n.children[1]})}};
    if (!n.is_root()) jn["edge"] = edge_to_json(n.edge);
    nodes.push_back(std::move(jn));
  }
  json j{{"depth", tree.depth},
         {"bifurcating_root", tree.bifurcating_root},
         {"types", tree.types},
         {"nodes", std::move(nodes)}};
  return j.dump();
}

ColoredTree colored_tree_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("tree JSON parse error: ") + e.what());
  }
  try {
    ColoredTree tree;
    tree.depth = j.at("depth").get<double>();
    tree.bifurcating_root = j.at("bifurcating_root").get<bool>();
    tree.types = j.at("types").get<int>();
    const auto& nodes = j.at("nodes");
    if (!nodes.is_array() || nodes.empty())
      throw IoError("tree JSON: nodes must be a nonempty array");
    tree.nodes.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& jn = nodes[i];
      ColoredTree::Node n;
      n.parent = jn.at("parent").get<std::int64_t>();
      n.time = jn.at("time").get<double>();
      const auto& ch = jn.at("children");
      if (!ch.is_array() || ch.size() != 2)
        throw IoError("tree JSON: children must have two entries");
      n.children = {ch[0].get<std::int64_t>(), ch[1].get<std::int64_t>()};
      if (n.parent >= 0) {
        if (static_cast<std::size_t>(n.parent) >= i)
          throw IoError("tree JSON: parent indices must precede children");
        n.edge = edge_from_json(jn.at("edge"));
      } else if (i != 0) {
        throw IoError("tree JSON: only node 0 may be the root");
      }
      tree.nodes.push_back(std::move(n));
    }
    return tree;
  } catch (const json::exception& e) {
    throw IoError(std::string("tree JSON missing or mistyped field: ") +
                  e.what());
  }
}

}  // namespace mpbt
