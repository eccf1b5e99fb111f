#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace uvhl {

/// Case label. Class indices double as column indices of the label matrix;
/// COVID-19 is class 0 and is the positive class for all metrics.
enum class Label : std::int8_t { kCovid = 0, kCap = 1, kUnlabeled = -1 };

inline constexpr int kNumClasses = 2;

inline bool is_labeled(Label l) { return l != Label::kUnlabeled; }
inline int class_index(Label l) { return static_cast<int>(l); }
inline Label label_from_class(int c) { return c == 0 ? Label::kCovid : Label::kCap; }

std::string_view label_name(Label l);
/// Parses COVID / CAP / UNKNOWN.
std::optional<Label> parse_label(std::string_view s);

/// Contiguous block of feature columns belonging to one named group.
struct ColumnRange {
  std::string name;
  Eigen::Index begin = 0;
  Eigen::Index size = 0;

  Eigen::Index end() const { return begin + size; }
  bool operator==(const ColumnRange&) const = default;
};

struct Dataset {
  std::vector<std::string> ids;
  std::vector<std::string> columns;
  Eigen::MatrixXd features;  // n x d
  std::vector<ColumnRange> groups;
  std::vector<Label> labels;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }

  /// Throws IntegrityError / ShapeError when an invariant is broken.
  void validate() const;

  const ColumnRange& group(std::string_view name) const;
  bool has_group(std::string_view name) const;

  std::vector<Eigen::Index> labeled_indices() const;
  std::vector<Eigen::Index> unlabeled_indices() const;
  Eigen::Index count(Label l) const;
};

/// Ordered mapping from column-name prefix to group name. Columns matching no
/// prefix land in `fallback_group`.
struct Schema {
  std::vector<std::pair<std::string, std::string>> prefixes = {
      {"reg_", "regional"}, {"rad_", "radiomics"}, {"age", "demographic"}, {"sex", "demographic"}};
  std::string fallback_group = "other";
  std::string id_column = "id";
  std::string label_column = "label";

  std::string group_of(std::string_view column) const;
};

/// Reads a CSV dataset. Feature columns are regrouped so every group is a
/// contiguous column range, in order of each group's first appearance.
Dataset load_dataset(const std::filesystem::path& path, const Schema& schema = {});
Dataset parse_dataset(std::string_view csv_text, const Schema& schema = {});

void write_dataset(const Dataset& ds, const std::filesystem::path& path);
std::string format_dataset(const Dataset& ds);

/// Selects rows (in the given order) and keeps all metadata.
Dataset subset_rows(const Dataset& ds, std::span<const Eigen::Index> rows);
/// Keeps only the named groups, in the order given.
Dataset select_groups(const Dataset& ds, std::span<const std::string> group_names);

// ---------------------------------------------------------------------------
// Normalization

struct NormalizationParams {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
  Eigen::Index fitted_on = 0;

  bool operator==(const NormalizationParams&) const = default;
};

/// Column-wise min/max over `train_rows` only.
NormalizationParams fit_normalization(const Dataset& ds, std::span<const Eigen::Index> train_rows);
NormalizationParams fit_normalization(const Eigen::MatrixXd& features,
                                      std::span<const Eigen::Index> train_rows);

/// (v - min) / (max - min) per column, unclamped; zero-range columns map to 0.
Eigen::MatrixXd apply_normalization(const NormalizationParams& params,
                                    const Eigen::MatrixXd& features);

// ---------------------------------------------------------------------------
// Folds

struct FoldPlan {
  static constexpr int kUnassigned = -1;

  int k = 0;
  std::vector<int> assignments;  // length n; unlabeled cases are kUnassigned
  std::uint64_t seed = 0;

  std::vector<Eigen::Index> members(int fold) const;
  /// Labeled cases outside `fold`.
  std::vector<Eigen::Index> complement(int fold) const;
};

FoldPlan stratified_kfold(std::span<const Label> labels, int k, std::uint64_t seed);
inline FoldPlan stratified_kfold(const Dataset& ds, int k, std::uint64_t seed) {
  return stratified_kfold(ds.labels, k, seed);
}

// ---------------------------------------------------------------------------
// Synthetic data

struct ClusterSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct SynthGroup {
  std::string name;
  std::string prefix;
  int dims = 0;
};

struct SynthSpec {
  std::vector<SynthGroup> groups;
  ClusterSpec covid;
  ClusterSpec cap;
  int n_per_class = 100;
  double label_noise = 0.0;
  double feature_noise = 0.0;
  /// Standard-deviation multiplier applied to feature-noise rows.
  double feature_noise_scale = 3.0;
  std::uint64_t seed = 0;

  int dim() const;

  /// Isotropic unit-variance clusters whose means sit `separation` apart
  /// along the all-ones direction.
  static SynthSpec separated(std::vector<SynthGroup> groups, double separation, int n_per_class,
                             double label_noise, double feature_noise, std::uint64_t seed);
};

struct SynthResult {
  Dataset dataset;
  std::vector<Label> true_labels;
  std::vector<bool> flipped;
  std::vector<bool> feature_noise;
};

/// Two-class Gaussian dataset; exactly round(rate * n_per_class) rows per class
/// are label-flipped, and independently the same count per class are drawn
/// with inflated spread.
SynthResult synth_generate(const SynthSpec& spec);

void write_noise_mask(const SynthResult& synth, const std::filesystem::path& path);

std::vector<SynthGroup> default_synth_groups(int regional_dims, int radiomics_dims);

}  // namespace uvhl
