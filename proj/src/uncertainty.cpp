#include <algorithm>
#include <cmath>
#include <limits>

#include "uvhl/error.hpp"
#include "uvhl/uncertainty.hpp"

namespace uvhl {

double attenuated_loss(const Eigen::Vector2d& prob, double alpha, int label) {
  if (label < 0 || label >= kNumClasses) throw ArgumentError("attenuated_loss: label out of range");
  const double ce = -std::log(std::max(prob(label), kProbabilityFloor));
  return 0.5 * std::exp(-alpha) * ce + 0.5 * alpha;
}

std::vector<Prediction> mc_forward(const UncertaintyModel& model, const Eigen::VectorXd& x,
                                   int passes, std::uint64_t seed) {
  if (passes < 1) throw ArgumentError("mc_forward: need at least one pass");
  Rng rng(seed);
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(passes));
  for (int t = 0; t < passes; ++t) out.push_back(model.predict(x, rng));
  return out;
}

Eigen::Vector2d mean_prediction(std::span<const Eigen::Vector2d> probs) {
  if (probs.empty()) throw ArgumentError("mean_prediction: no passes");
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  for (const auto& p : probs) sum += p;
  return sum / static_cast<double>(probs.size());
}

Eigen::Vector2d mean_prediction(std::span<const Prediction> passes) {
  if (passes.empty()) throw ArgumentError("mean_prediction: no passes");
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  for (const auto& p : passes) sum += p.prob;
  return sum / static_cast<double>(passes.size());
}

double aleatoric_score(std::span<const Prediction> passes) {
  if (passes.empty()) throw ArgumentError("aleatoric_score: no passes");
  double sum = 0.0;
  for (const auto& p : passes) sum += std::exp(p.alpha);
  return sum / static_cast<double>(passes.size());
}

double epistemic_score(std::span<const Prediction> passes) {
  const double aleatoric = aleatoric_score(passes);
  // mean(fᵀf) − f̄ᵀf̄ written as the mean squared deviation, which is
  // non-negative term by term and exactly zero for identical passes.
  const Eigen::Vector2d mean = mean_prediction(passes);
  double spread = 0.0;
  for (const auto& p : passes) spread += (p.prob - mean).squaredNorm();
  return aleatoric + spread / static_cast<double>(passes.size());
}

UncertaintyScores score_cases(const UncertaintyModel& model, const Eigen::MatrixXd& features,
                              int passes, std::uint64_t seed) {
  if (features.cols() != model.input_dim()) throw ShapeError("score_cases: feature dimension mismatch");
  const Eigen::Index n = features.rows();
  UncertaintyScores out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto mc = mc_forward(model, features.row(i).transpose(), passes,
                               derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    out.aleatoric(i) = aleatoric_score(mc);
    out.epistemic(i) = epistemic_score(mc);
  }
  return out;
}

namespace {

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

VertexWeights normalize_scores(const Eigen::VectorXd& scores, double lambda_u) {
  const Eigen::Index n = scores.size();
  if (n == 0) throw ArgumentError("normalize_scores: no scores");
  if (!std::isfinite(lambda_u)) throw ArgumentError("normalize_scores: lambda_u must be finite");
  if (!scores.allFinite()) throw ArgumentError("normalize_scores: non-finite score");
  VertexWeights vw;
  vw.epistemic = scores;
  vw.lambda_u = lambda_u;
  vw.mu_e = scores.mean();
  vw.s_e = std::sqrt((scores.array() - vw.mu_e).square().sum() / static_cast<double>(n));
  vw.weights.resize(n);
  // Weights must stay strictly inside (0, 1) even when the sigmoid saturates.
  const double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = vw.s_e > 0.0 ? sigmoid(lambda_u * (scores(i) - vw.mu_e) / vw.s_e) : 0.5;
    vw.weights(i) = std::clamp(w, lo, hi);
  }
  return vw;
}

}  // namespace uvhl
