#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "uvhl/data.hpp"
#include "uvhl/random.hpp"

namespace uvhl {

/// Lower clamp applied to the true-class probability before taking its log.
inline constexpr double kProbabilityFloor = 1e-12;

struct MlpConfig {
  std::vector<int> hidden = {64, 32};
  double dropout = 0.5;
  double learning_rate = 1e-3;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;

  bool operator==(const DenseLayer& o) const { return weight == o.weight && bias == o.bias; }
};

/// All trainable tensors of the dual-head network.
struct MlpParameters {
  std::vector<DenseLayer> hidden;
  DenseLayer class_head;  // C x h_last, softmax applied on top
  DenseLayer alpha_head;  // 1 x h_last, predicts the log-variance

  Eigen::Index size() const;
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);
  MlpParameters zeros_like() const;

  bool operator==(const MlpParameters&) const = default;
};

/// One forward pass: class probabilities f(x) and log-variance alpha(x).
struct Prediction {
  Eigen::Vector2d prob;
  double alpha = 0.0;
};

/// Dropout keep-masks per hidden layer, already scaled by 1 / (1 - p).
/// Each mask is h_l x batch.
using DropoutMasks = std::vector<Eigen::MatrixXd>;

class UncertaintyModel {
 public:
  /// He-initialized network: input_dim -> hidden... -> {class head, alpha head}.
  UncertaintyModel(int input_dim, std::vector<int> hidden, double dropout, std::uint64_t seed);
  UncertaintyModel(MlpParameters params, double dropout, std::uint64_t seed);

  int input_dim() const;
  std::vector<int> hidden_sizes() const;
  double dropout() const { return dropout_; }
  std::uint64_t seed() const { return seed_; }

  const MlpParameters& parameters() const { return params_; }
  MlpParameters& mutable_parameters() { return params_; }

  /// Deterministic pass with dropout disabled.
  Prediction predict(const Eigen::VectorXd& x) const;
  /// Stochastic pass with dropout active.
  Prediction predict(const Eigen::VectorXd& x, Rng& rng) const;

  DropoutMasks sample_masks(Eigen::Index batch, Rng& rng) const;

  bool operator==(const UncertaintyModel&) const = default;

 private:
  MlpParameters params_;
  double dropout_ = 0.0;
  std::uint64_t seed_ = 0;
};

/// ½·exp(−alpha)·CE(label, prob) + ½·alpha with natural-log cross-entropy.
double attenuated_loss(const Eigen::Vector2d& prob, double alpha, int label);

/// Mean attenuated loss over the columns of `inputs` (d x batch). When `masks`
/// is null dropout is off. When `grad` is non-null it receives the gradient.
double batch_loss(const MlpParameters& params, const Eigen::MatrixXd& inputs,
                  std::span<const int> labels, const DropoutMasks* masks, MlpParameters* grad);

/// Trains with Adam on the mean attenuated loss. `features` is n x d.
UncertaintyModel train(const Eigen::MatrixXd& features, std::span<const int> labels,
                       const MlpConfig& config);
UncertaintyModel train(const Eigen::MatrixXd& features, std::span<const Label> labels,
                       const MlpConfig& config);

std::vector<Prediction> mc_forward(const UncertaintyModel& model, const Eigen::VectorXd& x,
                                   int passes, std::uint64_t seed);

Eigen::Vector2d mean_prediction(std::span<const Eigen::Vector2d> probs);
Eigen::Vector2d mean_prediction(std::span<const Prediction> passes);

/// Mean of exp(alpha) over the passes.
double aleatoric_score(std::span<const Prediction> passes);
/// Aleatoric score plus the spread of the class-probability vectors across passes.
double epistemic_score(std::span<const Prediction> passes);

struct UncertaintyScores {
  Eigen::VectorXd aleatoric;
  Eigen::VectorXd epistemic;
};

/// MC-dropout scores for every row of `features`. Row i draws its masks from a
/// stream keyed by (seed, i), so scores do not depend on evaluation order.
UncertaintyScores score_cases(const UncertaintyModel& model, const Eigen::MatrixXd& features,
                              int passes, std::uint64_t seed);

struct VertexWeights {
  Eigen::VectorXd aleatoric;
  Eigen::VectorXd epistemic;
  Eigen::VectorXd weights;
  double lambda_u = 0.0;
  double mu_e = 0.0;
  double s_e = 0.0;
};

/// Standardizes `scores` over all entries and squashes with
/// sigmoid(lambda_u · z). Zero spread yields weights of 0.5.
VertexWeights normalize_scores(const Eigen::VectorXd& scores, double lambda_u);

std::string serialize_model(const UncertaintyModel& model);
UncertaintyModel deserialize_model(std::string_view text);
void save_model(const UncertaintyModel& model, const std::filesystem::path& path);
UncertaintyModel load_model(const std::filesystem::path& path);

}  // namespace uvhl
