#include "uvhl/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "uvhl/error.hpp"

namespace uvhl {

bool Hyperedge::contains(Eigen::Index v) const {
  return std::find(vertices.begin(), vertices.end(), v) != vertices.end();
}

NeighborRanking rank_neighbors(const Eigen::MatrixXd& features) {
  const Eigen::Index n = features.rows();
  if (!features.allFinite()) throw ArgumentError("rank_neighbors: non-finite features");
  // Pairwise squared distances, computed by direct differences so exact ties stay exact.
  Eigen::MatrixXd dist(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (features.row(i) - features.row(j)).squaredNorm();
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  NeighborRanking ranking(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& order = ranking[static_cast<std::size_t>(i)];
    order.reserve(static_cast<std::size_t>(n - 1));
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return dist(i, a) < dist(i, b); });
  }
  return ranking;
}

std::vector<Hyperedge> knn_hyperedges(const NeighborRanking& ranking, int k_nn, int group) {
  const auto n = static_cast<Eigen::Index>(ranking.size());
  if (k_nn < 1) throw ArgumentError("knn_hyperedges: k_nn must be at least 1");
  if (k_nn >= n)
    throw ArgumentError("knn_hyperedges: k_nn = " + std::to_string(k_nn) +
                        " needs more than that many vertices (n = " + std::to_string(n) + ")");
  std::vector<Hyperedge> edges;
  edges.reserve(ranking.size());
  for (Eigen::Index p = 0; p < n; ++p) {
    Hyperedge e;
    e.group = group;
    e.vertices.reserve(static_cast<std::size_t>(k_nn) + 1);
    e.vertices.push_back(p);
    const auto& order = ranking[static_cast<std::size_t>(p)];
    e.vertices.insert(e.vertices.end(), order.begin(), order.begin() + k_nn);
    edges.push_back(std::move(e));
  }
  return edges;
}

std::vector<Hyperedge> knn_hyperedges(const Eigen::MatrixXd& features, int k_nn, int group) {
  if (k_nn < 1) throw ArgumentError("knn_hyperedges: k_nn must be at least 1");
  if (k_nn >= features.rows())
    throw ArgumentError("knn_hyperedges: k_nn = " + std::to_string(k_nn) +
                        " needs more than that many vertices (n = " +
                        std::to_string(features.rows()) + ")");
  return knn_hyperedges(rank_neighbors(features), k_nn, group);
}

Hypergraph build_incidence(std::span<const std::vector<Hyperedge>> edge_groups,
                           const Eigen::VectorXd& vertex_weights,
                           const std::optional<Eigen::VectorXd>& edge_weights) {
  Hypergraph hg;
  hg.n = vertex_weights.size();
  for (const auto& group : edge_groups) hg.edges.insert(hg.edges.end(), group.begin(), group.end());
  const Eigen::Index m = hg.num_edges();
  if (m == 0) throw ArgumentError("build_incidence: no hyperedges");
  if (!vertex_weights.allFinite() || (vertex_weights.array() <= 0.0).any())
    throw ArgumentError("build_incidence: vertex weights must be positive and finite");

  if (edge_weights) {
    if (edge_weights->size() != m) throw ShapeError("build_incidence: edge weight count mismatch");
    if ((edge_weights->array() <= 0.0).any()) throw ArgumentError("build_incidence: edge weights must be positive");
    hg.edge_weights = *edge_weights;
  } else {
    hg.edge_weights = Eigen::VectorXd::Ones(m);
  }
  hg.vertex_weights = vertex_weights;

  std::vector<Eigen::Triplet<double>> triplets;
  hg.vertex_degrees = Eigen::VectorXd::Zero(hg.n);
  hg.edge_degrees = Eigen::VectorXd::Zero(m);
  for (Eigen::Index e = 0; e < m; ++e) {
    const auto& members = hg.edges[static_cast<std::size_t>(e)].vertices;
    auto sorted = members;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ConstructionError("build_incidence: vertex repeated within hyperedge " + std::to_string(e));
    for (Eigen::Index v : members) {
      if (v < 0 || v >= hg.n) throw ArgumentError("build_incidence: edge references unknown vertex");
      const double h = vertex_weights(v);
      triplets.emplace_back(v, e, h);
      hg.vertex_degrees(v) += hg.edge_weights(e) * h;
      hg.edge_degrees(e) += h;
    }
  }
  hg.incidence.resize(hg.n, m);
  hg.incidence.setFromTriplets(triplets.begin(), triplets.end());
  for (Eigen::Index v = 0; v < hg.n; ++v)
    if (!(hg.vertex_degrees(v) > 0.0))
      throw ConstructionError("build_incidence: vertex " + std::to_string(v) + " has zero degree");
  for (Eigen::Index e = 0; e < m; ++e)
    if (!(hg.edge_degrees(e) > 0.0))
      throw ConstructionError("build_incidence: hyperedge " + std::to_string(e) + " has zero degree");
  return hg;
}

Eigen::MatrixXd theta(const Hypergraph& hg) {
  for (Eigen::Index v = 0; v < hg.n; ++v)
    if (!(hg.vertex_degrees(v) > 0.0))
      throw SingularityError("theta: vertex " + std::to_string(v) + " has zero degree", INFINITY);
  for (Eigen::Index e = 0; e < hg.num_edges(); ++e)
    if (!(hg.edge_degrees(e) > 0.0))
      throw SingularityError("theta: hyperedge " + std::to_string(e) + " has zero degree", INFINITY);

  const Eigen::VectorXd inv_sqrt_dv = hg.vertex_degrees.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(hg.n, hg.n);
  // Each edge contributes w_e / De_e · h_i h_j to every member pair (i, j).
  for (Eigen::Index e = 0; e < hg.num_edges(); ++e) {
    const auto& members = hg.edges[static_cast<std::size_t>(e)].vertices;
    const double scale = hg.edge_weights(e) / hg.edge_degrees(e);
    for (Eigen::Index i : members) {
      const double hi = hg.vertex_weights(i) * inv_sqrt_dv(i) * scale;
      for (Eigen::Index j : members) out(i, j) += hi * hg.vertex_weights(j) * inv_sqrt_dv(j);
    }
  }
  // Symmetrize away rounding differences between (i, j) and (j, i) accumulation.
  return 0.5 * (out + out.transpose());
}

void write_incidence_csv(const Hypergraph& hg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "row,col,value\n";
  out.precision(17);
  for (Eigen::Index e = 0; e < hg.incidence.outerSize(); ++e)
    for (Eigen::SparseMatrix<double>::InnerIterator it(hg.incidence, e); it; ++it)
      out << it.row() << ',' << it.col() << ',' << it.value() << '\n';
}

}  // namespace uvhl
