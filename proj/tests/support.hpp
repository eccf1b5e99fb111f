#pragma once

// Reference implementations used as oracles by the unit and acceptance tests.
// Everything here is written from the formulas directly with dense matrices
// and no shared code paths with the library.

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "uvhl/data.hpp"
#include "uvhl/hypergraph.hpp"
#include "uvhl/random.hpp"

namespace uvhl::testing {

/// For each vertex, the vertex followed by its k closest others, found by full sort.
inline std::vector<std::vector<Eigen::Index>> brute_force_knn(const Eigen::MatrixXd& X, int k) {
  std::vector<std::vector<Eigen::Index>> out;
  for (Eigen::Index v = 0; v < X.rows(); ++v) {
    std::vector<std::pair<double, Eigen::Index>> d;
    for (Eigen::Index u = 0; u < X.rows(); ++u)
      if (u != v) d.emplace_back((X.row(u) - X.row(v)).squaredNorm(), u);
    std::sort(d.begin(), d.end());
    std::vector<Eigen::Index> e = {v};
    for (int i = 0; i < k; ++i) e.push_back(d[static_cast<std::size_t>(i)].second);
    out.push_back(e);
  }
  return out;
}

/// Dense 0/1 incidence matrix over all groups (one column per hyperedge).
inline Eigen::MatrixXd binary_incidence(const std::vector<Eigen::MatrixXd>& groups, int k) {
  const Eigen::Index n = groups.front().rows();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n * static_cast<Eigen::Index>(groups.size()));
  Eigen::Index col = 0;
  for (const auto& X : groups)
    for (const auto& e : brute_force_knn(X, k)) {
      for (Eigen::Index v : e) H(v, col) = 1.0;
      ++col;
    }
  return H;
}

/// Classical unweighted hypergraph operator Dv^{-1/2} H De^{-1} Hᵀ Dv^{-1/2}, unit edge weights.
inline Eigen::MatrixXd classical_theta(const Eigen::MatrixXd& H) {
  const Eigen::VectorXd dv = H.rowwise().sum();
  const Eigen::VectorXd de = H.colwise().sum().transpose();
  const Eigen::MatrixXd left = dv.cwiseSqrt().cwiseInverse().asDiagonal() * H;
  return left * de.cwiseInverse().asDiagonal() * left.transpose();
}

/// Classical transductive solve: F = argmin tr(Fᵀ(I − Θ)F) + λ‖F − Y‖², i.e.
/// ((1 + λ)I − Θ) F = λY, solved with partial-pivot LU.
inline Eigen::MatrixXd classical_solve(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& Y, double lambda) {
  const Eigen::Index n = theta.rows();
  const Eigen::MatrixXd A = (1.0 + lambda) * Eigen::MatrixXd::Identity(n, n) - theta;
  return A.partialPivLu().solve(lambda * Y);
}

/// Same objective as the library, summed entry by entry.
inline double objective_by_loops(const Eigen::MatrixXd& F, const Eigen::MatrixXd& theta,
                                 const Eigen::VectorXd& u, const Eigen::MatrixXd& Y, double lambda) {
  const Eigen::Index n = F.rows();
  double smooth = 0.0;
  double fit = 0.0;
  for (Eigen::Index c = 0; c < F.cols(); ++c) {
    for (Eigen::Index i = 0; i < n; ++i) {
      smooth += u(i) * F(i, c) * F(i, c);
      for (Eigen::Index j = 0; j < n; ++j) smooth -= u(i) * theta(i, j) * u(j) * F(i, c) * F(j, c);
      const double r = F(i, c) - Y(i, c);
      fit += u(i) * u(i) * r * r;
    }
  }
  return smooth + lambda * fit;
}

struct RandomInstance {
  std::vector<Eigen::MatrixXd> groups;
  int k = 1;
  Eigen::VectorXd u;
  Eigen::MatrixXd Y;
  std::vector<Label> labels;
  double lambda = 1.0;
};

/// Random features in 1 to 3 groups, random k, weights in (0, 1), a random
/// labeled subset containing both classes.
inline RandomInstance random_instance(Rng& rng, Eigen::Index n_max = 50) {
  RandomInstance inst;
  const auto n = std::uniform_int_distribution<Eigen::Index>(4, n_max)(rng);
  const int n_groups = std::uniform_int_distribution<int>(1, 3)(rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int g = 0; g < n_groups; ++g) {
    const int d = std::uniform_int_distribution<int>(1, 5)(rng);
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = normal(rng);
    inst.groups.push_back(X);
  }
  inst.k = std::uniform_int_distribution<int>(1, static_cast<int>(std::min<Eigen::Index>(n - 1, 8)))(rng);
  std::uniform_real_distribution<double> weight(0.02, 0.999);
  inst.u.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) inst.u(i) = weight(rng);
  std::bernoulli_distribution labeled(0.6);
  inst.labels.assign(static_cast<std::size_t>(n), Label::kUnlabeled);
  inst.labels[0] = Label::kCovid;
  inst.labels[1] = Label::kCap;
  for (Eigen::Index i = 2; i < n; ++i)
    if (labeled(rng)) inst.labels[static_cast<std::size_t>(i)] = i % 2 == 0 ? Label::kCovid : Label::kCap;
  std::shuffle(inst.labels.begin(), inst.labels.end(), rng);
  inst.Y = Eigen::MatrixXd::Zero(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    if (inst.labels[static_cast<std::size_t>(i)] != Label::kUnlabeled)
      inst.Y(i, class_index(inst.labels[static_cast<std::size_t>(i)])) = 1.0;
  inst.lambda = std::exp(std::uniform_real_distribution<double>(std::log(0.1), std::log(10.0))(rng));
  return inst;
}

/// Library hypergraph for an instance with the given vertex weights.
inline Hypergraph instance_hypergraph(const RandomInstance& inst, const Eigen::VectorXd& u) {
  std::vector<std::vector<Hyperedge>> groups;
  for (std::size_t g = 0; g < inst.groups.size(); ++g)
    groups.push_back(knn_hyperedges(inst.groups[g], inst.k, static_cast<int>(g)));
  return build_incidence(groups, u);
}

}  // namespace uvhl::testing
