#include <algorithm>
#include <cmath>

#include "uvhl/error.hpp"
#include "uvhl/eval.hpp"

namespace uvhl {

std::vector<double> EvalReport::metric_values(std::size_t metric) const {
  std::vector<double> out;
  for (const auto& f : folds)
    if (f.metrics.values[metric]) out.push_back(*f.metrics.values[metric]);
  return out;
}

namespace {

MetricSummary summarize(const std::vector<double>& v) {
  MetricSummary s;
  s.count = static_cast<int>(v.size());
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

/// Keeps at most `per_class` cases of each class, chosen by a seeded shuffle.
std::vector<Eigen::Index> limit_per_class(const std::vector<Eigen::Index>& rows,
                                          std::span<const Label> labels, int per_class,
                                          std::uint64_t seed) {
  std::vector<Eigen::Index> shuffled = rows;
  Rng rng(seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  int taken[kNumClasses] = {0, 0};
  std::vector<Eigen::Index> out;
  for (Eigen::Index i : shuffled) {
    const int c = class_index(labels[static_cast<std::size_t>(i)]);
    if (taken[c] < per_class) {
      ++taken[c];
      out.push_back(i);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

EvalReport cross_validate(const Dataset& ds, const CvConfig& config) {
  ds.validate();
  if (config.repeats < 1) throw ArgumentError("cross_validate: repeats must be at least 1");
  if (!config.k_nn && config.k_pool.empty()) throw ArgumentError("cross_validate: empty k pool");
  if (config.train_per_class && *config.train_per_class < 1)
    throw ArgumentError("cross_validate: train_per_class must be positive");

  std::vector<std::string> group_names = config.groups;
  if (group_names.empty())
    for (const auto& g : ds.groups) group_names.push_back(g.name);
  const Dataset view = select_groups(ds, group_names);
  const std::vector<Eigen::Index> unlabeled = view.unlabeled_indices();

  EvalReport report;
  report.config = config;
  report.config.groups = group_names;
  report.n_cases = static_cast<long>(view.size());
  report.n_labeled = static_cast<long>(view.size() - static_cast<Eigen::Index>(unlabeled.size()));

  for (int r = 0; r < config.repeats; ++r) {
    const FoldPlan plan = stratified_kfold(view.labels, config.folds, derive_seed(config.seed, {0xf01d, static_cast<std::uint64_t>(r)}));
    for (int f = 0; f < config.folds; ++f) {
      const std::uint64_t fold_seed = derive_seed(config.seed, {static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(f)});
      try {
        std::vector<Eigen::Index> train = plan.complement(f);
        if (config.train_per_class)
          train = limit_per_class(train, view.labels, *config.train_per_class, derive_seed(fold_seed, {4}));
        const std::vector<Eigen::Index> test = plan.members(f);

        // Fold vertex set: training cases, then test cases, then unlabeled cases.
        std::vector<Eigen::Index> rows = train;
        rows.insert(rows.end(), test.begin(), test.end());
        rows.insert(rows.end(), unlabeled.begin(), unlabeled.end());
        Eigen::MatrixXd raw(static_cast<Eigen::Index>(rows.size()), view.dim());
        std::vector<Label> labels(rows.size(), Label::kUnlabeled);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          raw.row(static_cast<Eigen::Index>(i)) = view.features.row(rows[i]);
          // Test labels never enter the fold problem.
          if (i < train.size()) labels[i] = view.labels[static_cast<std::size_t>(rows[i])];
        }
        std::vector<Eigen::Index> local_train(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) local_train[i] = static_cast<Eigen::Index>(i);
        std::vector<Eigen::Index> local_test(test.size());
        for (std::size_t i = 0; i < test.size(); ++i) local_test[i] = static_cast<Eigen::Index>(train.size() + i);

        const TransductiveRun run =
            run_transductive(raw, view.groups, labels, local_train, config.k_nn, config.k_pool,
                             config.inner_folds, config.uvhl, fold_seed);

        FoldResult fr;
        fr.repeat = r;
        fr.fold = f;
        fr.k_nn = run.k_nn;
        fr.n_train = static_cast<long>(train.size());
        fr.n_test = static_cast<long>(test.size());
        fr.predictions = predict_labels(run.F, local_test, config.uvhl.tie_break);
        std::vector<Label> truth;
        for (Eigen::Index i : test) truth.push_back(view.labels[static_cast<std::size_t>(i)]);
        fr.cm = confusion(fr.predictions, truth);
        fr.metrics = metrics(fr.cm);
        fr.weight_min = run.weights.weights.minCoeff();
        fr.weight_max = run.weights.weights.maxCoeff();
        fr.weight_mean = run.weights.weights.mean();
        report.folds.push_back(std::move(fr));
      } catch (const Error& e) {
        throw Error("repeat " + std::to_string(r) + ", fold " + std::to_string(f) + ": " + e.what());
      }
    }
  }
  for (std::size_t m = 0; m < kMetricNames.size(); ++m) report.summary[m] = summarize(report.metric_values(m));
  return report;
}

namespace {

void attach_p_values(std::vector<AblationRow>& rows) {
  const auto ref = rows.back().report.metric_values(0);
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const auto v = rows[i].report.metric_values(0);
    if (v.size() >= 2 && ref.size() >= 2) rows[i].acc_p_value = welch_t_test(v, ref);
  }
}

}  // namespace

std::vector<AblationRow> weighting_ablation(const Dataset& ds, const CvConfig& config) {
  std::vector<AblationRow> rows;
  for (auto m : {WeightingMethod::kEqualWeight, WeightingMethod::kAleatoricOnly,
                 WeightingMethod::kEpistemicOnly, WeightingMethod::kUvhl}) {
    CvConfig c = config;
    c.uvhl.method = m;
    rows.push_back({std::string(method_name(m)), cross_validate(ds, c), std::nullopt});
  }
  attach_p_values(rows);
  return rows;
}

std::vector<AblationRow> feature_group_ablation(const Dataset& ds, const CvConfig& config) {
  std::vector<std::string> all = config.groups;
  if (all.empty())
    for (const auto& g : ds.groups) all.push_back(g.name);
  std::vector<AblationRow> rows;
  for (const auto& g : all) {
    CvConfig c = config;
    c.groups = {g};
    rows.push_back({g, cross_validate(ds, c), std::nullopt});
  }
  CvConfig c = config;
  c.groups = all;
  rows.push_back({"all", cross_validate(ds, c), std::nullopt});
  attach_p_values(rows);
  return rows;
}

}  // namespace uvhl
