#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "uvhl/data.hpp"
#include "uvhl/hypergraph.hpp"
#include "uvhl/solver.hpp"
#include "uvhl/uncertainty.hpp"

namespace uvhl {

// ---------------------------------------------------------------------------
// Metrics

/// COVID-19 is the positive class.
struct ConfusionMatrix {
  long tp = 0;
  long fn = 0;
  long fp = 0;
  long tn = 0;

  long total() const { return tp + fn + fp + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const Label> predicted, std::span<const Label> truth);

inline constexpr std::array<std::string_view, 6> kMetricNames = {"ACC", "SEN", "SPEC",
                                                                  "BAC", "PPV", "NPV"};

/// The six scores in kMetricNames order. A metric whose denominator is zero is
/// std::nullopt (and BAC is undefined when SEN or SPEC is).
struct Metrics {
  std::array<std::optional<double>, 6> values;

  const std::optional<double>& acc() const { return values[0]; }
  const std::optional<double>& sen() const { return values[1]; }
  const std::optional<double>& spec() const { return values[2]; }
  const std::optional<double>& bac() const { return values[3]; }
  const std::optional<double>& ppv() const { return values[4]; }
  const std::optional<double>& npv() const { return values[5]; }
};

Metrics metrics(const ConfusionMatrix& cm);

/// Two-sided Welch t-test p-value. Both samples constant: p = 1 when the
/// means agree, 0 otherwise.
double welch_t_test(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Transductive pipeline

enum class WeightingMethod { kUvhl, kEqualWeight, kAleatoricOnly, kEpistemicOnly };

std::string_view method_name(WeightingMethod m);
std::optional<WeightingMethod> parse_method(std::string_view s);

/// Knobs of a single train-score-propagate run.
struct UvhlConfig {
  WeightingMethod method = WeightingMethod::kUvhl;
  double lambda_u = -1.0;
  double lambda_r = 1.0;
  int mc_passes = 20;
  MlpConfig mlp;
  TieBreak tie_break = TieBreak::kClass0;
};

/// Turns raw MC-dropout scores into vertex weights for the chosen method:
/// combined score for UVHL, exp(alpha) alone for aleatoric-only, the
/// dropout spread alone for epistemic-only, and all ones for equal-weight.
VertexWeights compute_vertex_weights(WeightingMethod method, const UncertaintyScores& scores,
                                     double lambda_u);
VertexWeights equal_vertex_weights(Eigen::Index n);

/// Builds one kNN hyperedge group per column range of `features`, weights H
/// by `weights` and solves for F. `labels` marks which vertices seed Y.
Eigen::MatrixXd propagate(const Eigen::MatrixXd& features, std::span<const ColumnRange> groups,
                          int k_nn, const Eigen::VectorXd& weights, std::span<const Label> labels,
                          double lambda_r);
Eigen::MatrixXd propagate(std::span<const NeighborRanking> rankings, int k_nn,
                          const Eigen::VectorXd& weights, std::span<const Label> labels,
                          double lambda_r);

/// Picks the pool member with the best mean inner-CV accuracy on the
/// (already normalized) training vertices; ties go to the smallest k.
/// `scores` are the training vertices' raw uncertainty scores, ignored for
/// equal-weight.
int select_k(const Eigen::MatrixXd& train_features, std::span<const ColumnRange> groups,
             std::span<const Label> train_labels, const UncertaintyScores* scores,
             std::span<const int> pool, int inner_folds, const UvhlConfig& config,
             std::uint64_t seed);

std::vector<int> default_k_pool();

struct TransductiveRun {
  Eigen::MatrixXd F;
  VertexWeights weights;
  int k_nn = 0;
  NormalizationParams normalization;
};

/// Full pipeline over one vertex set. Only rows in `train_rows` (which must be
/// labeled in `labels`) feed normalization, model training and k selection;
/// every other labeled row is ignored as a label source. Pass either a fixed
/// `k_nn` or a non-empty `k_pool`.
TransductiveRun run_transductive(const Eigen::MatrixXd& raw_features,
                                 std::span<const ColumnRange> groups, std::span<const Label> labels,
                                 std::span<const Eigen::Index> train_rows, std::optional<int> k_nn,
                                 std::span<const int> k_pool, int inner_folds,
                                 const UvhlConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Cross-validation

struct CvConfig {
  int folds = 10;
  int repeats = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> groups;  // hyperedge/model feature groups; empty = all
  std::optional<int> k_nn;          // fixed k; when empty, select from k_pool per outer fold
  std::vector<int> k_pool = default_k_pool();
  int inner_folds = 5;
  std::optional<int> train_per_class;  // few-label study: labeled cases kept per class per fold
  UvhlConfig uvhl;
};

struct FoldResult {
  int repeat = 0;
  int fold = 0;
  int k_nn = 0;
  long n_train = 0;
  long n_test = 0;
  ConfusionMatrix cm;
  Metrics metrics;
  double weight_min = 0.0;
  double weight_max = 0.0;
  double weight_mean = 0.0;
  std::vector<Label> predictions;  // test rows in ascending dataset order
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  int count = 0;     // rows where the metric is defined
};

struct EvalReport {
  CvConfig config;
  long n_cases = 0;
  long n_labeled = 0;
  std::vector<FoldResult> folds;
  std::array<MetricSummary, 6> summary;

  /// Per-row values of one metric (undefined rows skipped).
  std::vector<double> metric_values(std::size_t metric) const;
};

EvalReport cross_validate(const Dataset& ds, const CvConfig& config);

struct AblationRow {
  std::string name;
  EvalReport report;
  std::optional<double> acc_p_value;  // Welch test of ACC against the reference row
};

/// Equal weight, aleatoric only, epistemic only, proposed (reference).
std::vector<AblationRow> weighting_ablation(const Dataset& ds, const CvConfig& config);
/// Each feature group alone, then all of them together (reference).
std::vector<AblationRow> feature_group_ablation(const Dataset& ds, const CvConfig& config);

// ---------------------------------------------------------------------------
// Serialization

inline constexpr int kReportSchemaVersion = 1;

nlohmann::ordered_json config_to_json(const CvConfig& config);
nlohmann::ordered_json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
std::string report_to_csv(const EvalReport& report);
std::string ablation_to_csv(std::span<const AblationRow> rows);

/// Static grouped bar chart of mean ± std per metric, one series per report.
std::string render_metric_svg(std::span<const std::string> names, std::span<const EvalReport> reports);
/// Markdown table of mean ± std per metric.
std::string render_summary_table(std::span<const std::string> names,
                                 std::span<const EvalReport> reports);

}  // namespace uvhl
