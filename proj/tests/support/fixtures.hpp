#pragma once

// Shared parameter sets and hand-built trees for tests.

#include <Eigen/Dense>

#include "mpbt/params.hpp"
#include "mpbt/tree_sim.hpp"

namespace testsupport {

// The two-type reference parameter set used throughout:
// lambda = (0.1, 0.5), s12 = 0.1, s21 = 0.2, uniform root distribution.
inline mpbt::ModelParams reference_params() {
  Eigen::VectorXd pi(2), lambda(2);
  pi << 0.5, 0.5;
  lambda << 0.1, 0.5;
  Eigen::MatrixXd s(2, 2);
  s << 0.0, 0.1, 0.2, 0.0;
  return mpbt::ModelParams::create(pi, lambda, s);
}

inline mpbt::ModelParams single_type_params(double lambda_rate) {
  Eigen::VectorXd pi(1), lambda(1);
  pi << 1.0;
  lambda << lambda_rate;
  return mpbt::ModelParams::create(pi, lambda, Eigen::MatrixXd::Zero(1, 1));
}

// Appends a node under `parent` whose edge has one constant-type segment.
// Speciated edges end by branching; truncated ones run to the tree depth.
inline std::int64_t add_node(mpbt::ColoredTree& tree, std::int64_t parent,
                             double length, bool speciated, int type) {
  mpbt::ColoredTree::Node node;
  node.parent = parent;
  const double birth = tree.nodes[static_cast<std::size_t>(parent)].time;
  node.time = speciated ? birth + length : tree.depth;
  node.edge.length = speciated ? length : tree.depth - birth;
  node.edge.outcome = speciated ? mpbt::EdgeOutcome::Speciated
                                : mpbt::EdgeOutcome::Truncated;
  node.edge.end_type = type;
  node.edge.segments = {{type, node.edge.length}};
  const std::int64_t id = static_cast<std::int64_t>(tree.nodes.size());
  auto& slots = tree.nodes[static_cast<std::size_t>(parent)].children;
  if (slots[0] < 0)
    slots[0] = id;
  else
    slots[1] = id;
  tree.nodes.push_back(std::move(node));
  return id;
}

inline mpbt::ColoredTree empty_tree(double depth, int types) {
  mpbt::ColoredTree tree;
  tree.depth = depth;
  tree.types = types;
  tree.nodes.push_back({});
  return tree;
}

// Root edge speciating at time 3, two child edges of the given lengths
// (speciated), grandchildren truncated at the depth horizon.
inline mpbt::ColoredTree chain_tree(double depth, double child1,
                                    double child2) {
  mpbt::ColoredTree tree = empty_tree(depth, 1);
  const std::int64_t focal = add_node(tree, 0, 3.0, true, 0);
  const std::int64_t a = add_node(tree, focal, child1, true, 0);
  const std::int64_t b = add_node(tree, focal, child2, true, 0);
  add_node(tree, a, 0.0, false, 0);
  add_node(tree, a, 0.0, false, 0);
  add_node(tree, b, 0.0, false, 0);
  add_node(tree, b, 0.0, false, 0);
  return tree;
}

}  // namespace testsupport
