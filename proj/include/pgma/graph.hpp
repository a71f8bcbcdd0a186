#pragma once

#include <Eigen/Dense>

#include <vector>

namespace pgma::graph {

using Eigen::Index;

/// Directed neighbor structure. in_neighbors[i] lists the sources j with
/// A[j][i] = 1, strongest similarity first (ties by index). The order depends
/// only on similarity values, which keeps downstream sums permutation-exact.
/// Self-loops are never stored.
struct Adjacency {
  Index nodes = 0;
  Index k = 0;
  std::vector<std::vector<Index>> in_neighbors;

  bool has_edge(Index source, Index target) const;
  /// Dense 0/1 matrix, entry (j, i) = A[j][i].
  Eigen::MatrixXi dense() const;
  Index edge_count() const;

  friend bool operator==(const Adjacency&, const Adjacency&) = default;
};

/// Row-wise cosine similarity of the node embeddings. Throws DataError naming
/// the node when a row has zero norm.
Eigen::MatrixXd cosine_similarity(const Eigen::MatrixXd& embeddings);

/// For every target i keeps the k most similar sources j != i. Ties go to the
/// lower source index. Requires 1 <= k <= N - 1.
Adjacency topk_adjacency(const Eigen::MatrixXd& similarity, Index k);

/// One adjacency per slot. k is clamped to N - 1; a single-node graph gets
/// no edges.
std::vector<Adjacency> build_slot_graphs(const std::vector<Eigen::MatrixXd>& slot_embeddings, Index k);

/// Phase bin of a window start within the period: floor((start mod p) * G / p).
Index assign_slot(Index window_start, Index period, Index slots);

}  // namespace pgma::graph
