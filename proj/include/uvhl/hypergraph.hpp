#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace uvhl {

/// Vertex set of one hyperedge: the centroid first, then its neighbors in
/// increasing distance.
struct Hyperedge {
  std::vector<Eigen::Index> vertices;
  int group = 0;

  Eigen::Index centroid() const { return vertices.front(); }
  bool contains(Eigen::Index v) const;
};

/// For every vertex, all other vertices sorted by Euclidean distance
/// (ties toward the lower index). Lets callers cut kNN sets for many k cheaply.
using NeighborRanking = std::vector<std::vector<Eigen::Index>>;

NeighborRanking rank_neighbors(const Eigen::MatrixXd& features);

/// One hyperedge per vertex: the vertex plus its k_nn nearest neighbors.
std::vector<Hyperedge> knn_hyperedges(const Eigen::MatrixXd& features, int k_nn, int group = 0);
std::vector<Hyperedge> knn_hyperedges(const NeighborRanking& ranking, int k_nn, int group = 0);

struct Hypergraph {
  Eigen::Index n = 0;
  std::vector<Hyperedge> edges;
  Eigen::SparseMatrix<double> incidence;  // H, n x m
  Eigen::VectorXd edge_weights;           // diagonal of W
  Eigen::VectorXd vertex_weights;         // diagonal of U
  Eigen::VectorXd vertex_degrees;         // diagonal of Dv
  Eigen::VectorXd edge_degrees;           // diagonal of De

  Eigen::Index num_edges() const { return static_cast<Eigen::Index>(edges.size()); }
};

/// Concatenates the edge groups in order and fills H(v, e) = U_v for v in e.
/// Edge weights default to one.
Hypergraph build_incidence(std::span<const std::vector<Hyperedge>> edge_groups,
                           const Eigen::VectorXd& vertex_weights,
                           const std::optional<Eigen::VectorXd>& edge_weights = std::nullopt);

/// Θ_U = Dv^{-1/2} H W De^{-1} Hᵀ Dv^{-1/2}.
Eigen::MatrixXd theta(const Hypergraph& hg);

/// Sparse triplet dump of H: `row,col,value`.
void write_incidence_csv(const Hypergraph& hg, const std::filesystem::path& path);

}  // namespace uvhl
