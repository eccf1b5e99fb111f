#include <algorithm>
#include <numeric>

#include "uvhl/error.hpp"
#include "uvhl/eval.hpp"

namespace uvhl {

std::string_view method_name(WeightingMethod m) {
  switch (m) {
    case WeightingMethod::kUvhl:
      return "uvhl";
    case WeightingMethod::kEqualWeight:
      return "equal-weight";
    case WeightingMethod::kAleatoricOnly:
      return "aleatoric-only";
    case WeightingMethod::kEpistemicOnly:
      return "epistemic-only";
  }
  return "uvhl";
}

std::optional<WeightingMethod> parse_method(std::string_view s) {
  for (auto m : {WeightingMethod::kUvhl, WeightingMethod::kEqualWeight,
                 WeightingMethod::kAleatoricOnly, WeightingMethod::kEpistemicOnly})
    if (method_name(m) == s) return m;
  return std::nullopt;
}

std::vector<int> default_k_pool() {
  std::vector<int> pool(19);
  std::iota(pool.begin(), pool.end(), 2);
  return pool;
}

VertexWeights equal_vertex_weights(Eigen::Index n) {
  VertexWeights vw;
  vw.weights = Eigen::VectorXd::Ones(n);
  vw.lambda_u = 0.0;
  return vw;
}

VertexWeights compute_vertex_weights(WeightingMethod method, const UncertaintyScores& scores,
                                     double lambda_u) {
  if (method == WeightingMethod::kEqualWeight) {
    auto vw = equal_vertex_weights(scores.aleatoric.size());
    vw.aleatoric = scores.aleatoric;
    vw.epistemic = scores.epistemic;
    return vw;
  }
  Eigen::VectorXd basis;
  switch (method) {
    case WeightingMethod::kAleatoricOnly:
      basis = scores.aleatoric;
      break;
    case WeightingMethod::kEpistemicOnly:
      basis = scores.epistemic - scores.aleatoric;
      break;
    default:
      basis = scores.epistemic;
      break;
  }
  VertexWeights vw = normalize_scores(basis, lambda_u);
  vw.aleatoric = scores.aleatoric;
  vw.epistemic = scores.epistemic;
  return vw;
}

Eigen::MatrixXd propagate(std::span<const NeighborRanking> rankings, int k_nn,
                          const Eigen::VectorXd& weights, std::span<const Label> labels,
                          double lambda_r) {
  if (rankings.empty()) throw ArgumentError("propagate: no feature groups");
  std::vector<std::vector<Hyperedge>> groups;
  for (std::size_t g = 0; g < rankings.size(); ++g)
    groups.push_back(knn_hyperedges(rankings[g], k_nn, static_cast<int>(g)));
  const Hypergraph hg = build_incidence(groups, weights);
  return solve_closed_form(theta(hg), weights, initial_labels(labels), lambda_r);
}

Eigen::MatrixXd propagate(const Eigen::MatrixXd& features, std::span<const ColumnRange> groups,
                          int k_nn, const Eigen::VectorXd& weights, std::span<const Label> labels,
                          double lambda_r) {
  std::vector<NeighborRanking> rankings;
  for (const auto& g : groups) rankings.push_back(rank_neighbors(features.middleCols(g.begin, g.size)));
  return propagate(rankings, k_nn, weights, labels, lambda_r);
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, std::span<const Eigen::Index> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& v, std::span<const Eigen::Index> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = v(rows[r]);
  return out;
}

}  // namespace

int select_k(const Eigen::MatrixXd& train_features, std::span<const ColumnRange> groups,
             std::span<const Label> train_labels, const UncertaintyScores* scores,
             std::span<const int> pool, int inner_folds, const UvhlConfig& config,
             std::uint64_t seed) {
  if (pool.empty()) throw ArgumentError("select_k: empty candidate pool");
  const Eigen::Index n = train_features.rows();
  if (static_cast<Eigen::Index>(train_labels.size()) != n)
    throw ShapeError("select_k: labels do not match training rows");
  std::vector<int> candidates(pool.begin(), pool.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  if (candidates.size() == 1) return candidates.front();

  std::vector<NeighborRanking> rankings;
  for (const auto& g : groups)
    rankings.push_back(rank_neighbors(train_features.middleCols(g.begin, g.size)));

  VertexWeights weights = equal_vertex_weights(n);
  if (config.method != WeightingMethod::kEqualWeight) {
    if (!scores) throw ArgumentError("select_k: uncertainty scores required for weighted methods");
    weights = compute_vertex_weights(config.method, *scores, config.lambda_u);
  }

  const FoldPlan plan = stratified_kfold(train_labels, inner_folds, seed);
  std::vector<std::vector<Label>> masked(static_cast<std::size_t>(inner_folds));
  std::vector<std::vector<Eigen::Index>> held_out(static_cast<std::size_t>(inner_folds));
  for (int f = 0; f < inner_folds; ++f) {
    masked[f].assign(train_labels.begin(), train_labels.end());
    held_out[f] = plan.members(f);
    for (Eigen::Index i : held_out[f]) masked[f][static_cast<std::size_t>(i)] = Label::kUnlabeled;
  }

  int best_k = -1;
  double best_acc = -1.0;
  for (int k : candidates) {
    if (k < 1 || k >= n) continue;
    long correct = 0;
    long total = 0;
    for (int f = 0; f < inner_folds; ++f) {
      const Eigen::MatrixXd F = propagate(rankings, k, weights.weights, masked[f], config.lambda_r);
      const auto pred = predict_labels(F, held_out[f], config.tie_break);
      for (std::size_t j = 0; j < pred.size(); ++j)
        correct += pred[j] == train_labels[static_cast<std::size_t>(held_out[f][j])];
      total += static_cast<long>(pred.size());
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(total);
    if (acc > best_acc) {
      best_acc = acc;
      best_k = k;
    }
  }
  if (best_k < 0) throw ArgumentError("select_k: no candidate k is smaller than the training set");
  return best_k;
}

TransductiveRun run_transductive(const Eigen::MatrixXd& raw_features,
                                 std::span<const ColumnRange> groups, std::span<const Label> labels,
                                 std::span<const Eigen::Index> train_rows, std::optional<int> k_nn,
                                 std::span<const int> k_pool, int inner_folds,
                                 const UvhlConfig& config, std::uint64_t seed) {
  const Eigen::Index n = raw_features.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw ShapeError("run_transductive: label count mismatch");
  if (train_rows.empty()) throw ArgumentError("run_transductive: no training rows");
  std::vector<Label> train_labels;
  std::vector<Label> seed_labels(static_cast<std::size_t>(n), Label::kUnlabeled);
  for (Eigen::Index i : train_rows) {
    if (i < 0 || i >= n || !is_labeled(labels[static_cast<std::size_t>(i)]))
      throw ArgumentError("run_transductive: training rows must be labeled and in range");
    train_labels.push_back(labels[static_cast<std::size_t>(i)]);
    seed_labels[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)];
  }

  TransductiveRun run;
  run.normalization = fit_normalization(raw_features, train_rows);
  const Eigen::MatrixXd X = apply_normalization(run.normalization, raw_features);
  const Eigen::MatrixXd X_train = take_rows(X, train_rows);

  std::optional<UncertaintyScores> scores;
  if (config.method == WeightingMethod::kEqualWeight) {
    run.weights = equal_vertex_weights(n);
  } else {
    MlpConfig mlp = config.mlp;
    mlp.seed = derive_seed(seed, {1});
    const UncertaintyModel model = train(X_train, train_labels, mlp);
    scores = score_cases(model, X, config.mc_passes, derive_seed(seed, {2}));
    run.weights = compute_vertex_weights(config.method, *scores, config.lambda_u);
  }

  if (k_nn) {
    run.k_nn = *k_nn;
  } else {
    std::optional<UncertaintyScores> train_scores;
    if (scores) train_scores = UncertaintyScores{take(scores->aleatoric, train_rows), take(scores->epistemic, train_rows)};
    run.k_nn = select_k(X_train, groups, train_labels, train_scores ? &*train_scores : nullptr, k_pool,
                        inner_folds, config, derive_seed(seed, {3}));
  }
  run.F = propagate(X, groups, run.k_nn, run.weights.weights, seed_labels, config.lambda_r);
  return run;
}

}  // namespace uvhl
