#include "pgma/graph.hpp"

#include "pgma/errors.hpp"

#include <algorithm>
#include <numeric>

namespace pgma::graph {

bool Adjacency::has_edge(Index source, Index target) const {
  const auto& nb = in_neighbors[target];
  return std::find(nb.begin(), nb.end(), source) != nb.end();
}

Eigen::MatrixXi Adjacency::dense() const {
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(nodes, nodes);
  for (Index i = 0; i < nodes; ++i) {
    for (auto j : in_neighbors[i]) a(j, i) = 1;
  }
  return a;
}

Index Adjacency::edge_count() const {
  Index total = 0;
  for (const auto& nb : in_neighbors) total += static_cast<Index>(nb.size());
  return total;
}

Eigen::MatrixXd cosine_similarity(const Eigen::MatrixXd& embeddings) {
  const Eigen::VectorXd norms = embeddings.rowwise().norm();
  for (Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) > 0.0)) throw DataError("embedding row of node " + std::to_string(i) + " has zero norm");
  }
  const Eigen::MatrixXd unit = norms.cwiseInverse().asDiagonal() * embeddings;
  Eigen::MatrixXd sim = unit * unit.transpose();
  // Symmetrize and pin the diagonal against rounding.
  sim = (0.5 * (sim + sim.transpose())).eval();
  sim.diagonal().setOnes();
  return sim.cwiseMax(-1.0).cwiseMin(1.0);
}

Adjacency topk_adjacency(const Eigen::MatrixXd& similarity, Index k) {
  const Index n = similarity.rows();
  if (similarity.cols() != n) throw DataError("similarity matrix must be square");
  if (k < 1 || k > n - 1) {
    throw ConfigError("neighbor budget k=" + std::to_string(k) + " must lie in [1, " + std::to_string(n - 1) + "]");
  }
  Adjacency adj;
  adj.nodes = n;
  adj.k = k;
  adj.in_neighbors.resize(n);
  std::vector<Index> candidates;
  for (Index i = 0; i < n; ++i) {
    candidates.clear();
    for (Index j = 0; j < n; ++j) {
      if (j != i) candidates.push_back(j);
    }
    // E is symmetric, so column i and row i agree; read E(j, i) as written.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](Index a, Index b) { return similarity(a, i) > similarity(b, i); });
    candidates.resize(k);
    adj.in_neighbors[i] = candidates;
  }
  return adj;
}

std::vector<Adjacency> build_slot_graphs(const std::vector<Eigen::MatrixXd>& slot_embeddings, Index k) {
  std::vector<Adjacency> graphs;
  graphs.reserve(slot_embeddings.size());
  for (const auto& m : slot_embeddings) {
    const Index n = m.rows();
    if (n == 1) {
      Adjacency single;
      single.nodes = 1;
      single.in_neighbors.resize(1);
      graphs.push_back(std::move(single));
      continue;
    }
    graphs.push_back(topk_adjacency(cosine_similarity(m), std::min(k, n - 1)));
  }
  return graphs;
}

Index assign_slot(Index window_start, Index period, Index slots) {
  if (period < 1 || slots < 1) throw ConfigError("slot assignment needs period >= 1 and slots >= 1");
  Index phase = window_start % period;
  if (phase < 0) phase += period;
  return (phase * slots) / period;
}

}  // namespace pgma::graph
