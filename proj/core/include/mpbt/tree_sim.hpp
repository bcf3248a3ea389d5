#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mpbt/edge_process.hpp"
#include "mpbt/params.hpp"
#include "mpbt/rng.hpp"

namespace mpbt {

// A simulated tree with full type histories on every edge. Node 0 is the
// root at time 0; nodes are stored in nondecreasing time order. Every
// other node carries the edge from its parent. Leaves are the nodes whose
// edges were truncated at the simulation depth.
struct ColoredTree {
  struct Node {
    std::int64_t parent = -1;
    double time = 0.0;
    std::array<std::int64_t, 2> children{-1, -1};
    EdgeRealization edge;  // empty for the root

    bool is_root() const { return parent < 0; }
    bool is_leaf() const { return children[0] < 0 && children[1] < 0; }
  };

  double depth = 0.0;
  bool bifurcating_root = false;
  int types = 0;
  std::vector<Node> nodes;

  std::int64_t leaf_count() const;
};

// The same shape with types erased: what an observer of the tree sees.
struct MetricTree {
  struct Node {
    std::int64_t parent = -1;
    double time = 0.0;
    std::array<std::int64_t, 2> children{-1, -1};
    double branch_length = 0.0;
  };

  double depth = 0.0;
  std::vector<Node> nodes;
};

struct SimOptions {
  // Refuse to simulate when the expected number of lineages at the target
  // depth exceeds this cap; a hard node limit of 64x the expectation stops
  // runs that beat astronomical odds anyway.
  double max_expected_lineages = 1e6;
  bool bifurcating_root = false;
};

// Grows a tree to the given depth: a root lineage (or two, sharing the
// root type, when bifurcating_root is set) whose edges speciate and
// switch types per the edge process. Events are processed through a
// time-ordered queue, so node indices are chronological.
// Throws GrowthGuardError when the growth guard triggers.
ColoredTree simulate_tree(const ModelParams& params, double depth, Rng& rng,
                          const SimOptions& opts = {});

MetricTree uncolor(const ColoredTree& tree);

// Lineage counts per type at tree time t (right-continuous: at a
// speciation time both children count). t must lie in [0, depth];
// at t == depth the types of the surviving lineages are counted.
struct TypeCount {
  double t = 0.0;
  Eigen::VectorXi counts;
  Eigen::VectorXd freqs;  // counts normalized to sum 1
};

TypeCount type_counts(const ColoredTree& tree, double t);

// The embedded jump chain at one type: total event rate, probability the
// event is a speciation, and the distribution over switch targets.
struct JumpDistribution {
  double total_rate = 0.0;
  double speciate_prob = 0.0;
  Eigen::VectorXd switch_probs;
};

JumpDistribution jump_distribution(const ModelParams& params, int type);

// Simulates the same process but keeps only the per-type counts of
// lineages alive at the target depth, never materializing the tree.
// Distributionally identical to counting leaf types on simulate_tree
// output; draws differ because edges are visited depth-first.
TypeCount simulate_leaf_type_counts(const ModelParams& params, double depth,
                                    Rng& rng, const SimOptions& opts = {});

// Newick serialization of the uncolored shape. Leaves are labeled t<index>,
// internal nodes are unlabeled; branch lengths printed with %.12g.
std::string to_newick(const MetricTree& tree);

// JSON round trip for colored trees, schema:
//   {"depth": .., "bifurcating_root": .., "types": m, "nodes": [
//      {"parent": -1, "time": 0, "children": [..]},
//      {"parent": 0, "time": .., "children": [..],
//       "edge": {"length": .., "outcome": "speciated"|"truncated",
//                "end_type": .., "segments": [[type, duration], ..]}}, ..]}
std::string colored_tree_to_json(const ColoredTree& tree);
ColoredTree colored_tree_from_json(const std::string& text);

}  // namespace mpbt
