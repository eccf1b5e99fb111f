// uvhl command-line driver: synth, cv, score, predict, report.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "uvhl/data.hpp"
#include "uvhl/error.hpp"
#include "uvhl/eval.hpp"
#include "uvhl/hypergraph.hpp"
#include "uvhl/solver.hpp"
#include "uvhl/uncertainty.hpp"

namespace fs = std::filesystem;
using namespace uvhl;

namespace {

struct RunConfig {
  std::string dataset;  // empty: generate a synthetic set from the synth-* fields
  int n = 100;
  double separation = 4.0;
  int regional_dims = 8;
  int radiomics_dims = 8;
  double label_noise = 0.0;
  double feature_noise = 0.0;
  double feature_noise_scale = 3.0;

  std::string method = "uvhl";
  int k_nn = 0;  // 0: select per fold from k_pool
  std::vector<int> k_pool = default_k_pool();
  int inner_folds = 5;
  double lambda_u = -1.0;
  double lambda_r = 1.0;
  int mc_passes = 20;
  double dropout = 0.5;
  std::vector<int> hidden = {64, 32};
  int epochs = 200;
  int batch = 32;
  double lr = 1e-3;
  int folds = 10;
  int repeats = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> groups;
  int train_per_class = 0;  // 0: keep every training case
  std::string tie_break = "COVID";
  std::string ablation = "none";
  std::vector<std::string> inputs;
  std::vector<std::string> names;
  bool dump_incidence = false;
  std::string out = "uvhl-out";
};

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
  return s.str();
}

std::string num(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

/// Flat key=value dump that --config reads back.
std::string echo(const RunConfig& c) {
  std::ostringstream o;
  auto kv = [&](const char* k, const std::string& v) {
    if (!v.empty()) o << k << '=' << v << '\n';
  };
  kv("dataset", c.dataset);
  kv("n", std::to_string(c.n));
  kv("separation", num(c.separation));
  kv("regional-dims", std::to_string(c.regional_dims));
  kv("radiomics-dims", std::to_string(c.radiomics_dims));
  kv("label-noise", num(c.label_noise));
  kv("feature-noise", num(c.feature_noise));
  kv("feature-noise-scale", num(c.feature_noise_scale));
  kv("method", c.method);
  kv("k-nn", std::to_string(c.k_nn));
  kv("k-pool", join(c.k_pool));
  kv("inner-folds", std::to_string(c.inner_folds));
  kv("lambda-u", num(c.lambda_u));
  kv("lambda-r", num(c.lambda_r));
  kv("mc-passes", std::to_string(c.mc_passes));
  kv("dropout", num(c.dropout));
  kv("hidden", join(c.hidden));
  kv("epochs", std::to_string(c.epochs));
  kv("batch", std::to_string(c.batch));
  kv("lr", num(c.lr));
  kv("folds", std::to_string(c.folds));
  kv("repeats", std::to_string(c.repeats));
  kv("seed", std::to_string(c.seed));
  kv("groups", join(c.groups));
  kv("train-per-class", std::to_string(c.train_per_class));
  kv("tie-break", c.tie_break);
  kv("ablation", c.ablation);
  kv("input", join(c.inputs));
  kv("names", join(c.names));
  kv("dump-incidence", c.dump_incidence ? "true" : "false");
  kv("out", c.out);
  return o.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path prepare_out(const RunConfig& c) {
  const fs::path dir(c.out);
  fs::create_directories(dir);
  write_text(dir / "config.txt", echo(c));
  return dir;
}

SynthSpec synth_spec(const RunConfig& c) {
  SynthSpec s = SynthSpec::separated(default_synth_groups(c.regional_dims, c.radiomics_dims), c.separation, c.n,
                                     c.label_noise, c.feature_noise, c.seed);
  s.feature_noise_scale = c.feature_noise_scale;
  return s;
}

Dataset input_dataset(const RunConfig& c) {
  if (!c.dataset.empty()) return load_dataset(c.dataset);
  return synth_generate(synth_spec(c)).dataset;
}

UvhlConfig uvhl_config(const RunConfig& c) {
  UvhlConfig u;
  const auto m = parse_method(c.method);
  if (!m) throw ArgumentError("unknown method '" + c.method + "'");
  u.method = *m;
  u.lambda_u = c.lambda_u;
  u.lambda_r = c.lambda_r;
  u.mc_passes = c.mc_passes;
  u.mlp.hidden = c.hidden;
  u.mlp.dropout = c.dropout;
  u.mlp.learning_rate = c.lr;
  u.mlp.epochs = c.epochs;
  u.mlp.batch_size = c.batch;
  u.tie_break = c.tie_break == "CAP" ? TieBreak::kClass1 : TieBreak::kClass0;
  return u;
}

CvConfig cv_config(const RunConfig& c) {
  CvConfig cv;
  cv.folds = c.folds;
  cv.repeats = c.repeats;
  cv.seed = c.seed;
  cv.groups = c.groups;
  if (c.k_nn > 0) cv.k_nn = c.k_nn;
  cv.k_pool = c.k_pool;
  cv.inner_folds = c.inner_folds;
  if (c.train_per_class > 0) cv.train_per_class = c.train_per_class;
  cv.uvhl = uvhl_config(c);
  return cv;
}

void write_report(const fs::path& dir, const EvalReport& r) {
  fs::create_directories(dir);
  write_text(dir / "report.json", report_to_json(r).dump(2) + "\n");
  write_text(dir / "report.csv", report_to_csv(r));
}

int run_synth(const RunConfig& c) {
  const fs::path dir = prepare_out(c);
  const SynthResult s = synth_generate(synth_spec(c));
  write_dataset(s.dataset, dir / "dataset.csv");
  write_noise_mask(s, dir / "noise_mask.csv");
  return 0;
}

int run_cv(const RunConfig& c) {
  const Dataset ds = input_dataset(c);
  const CvConfig cv = cv_config(c);
  const fs::path dir = prepare_out(c);
  if (c.ablation == "none") {
    const EvalReport r = cross_validate(ds, cv);
    write_report(dir, r);
    std::cout << render_summary_table(std::vector<std::string>{c.method}, std::vector<EvalReport>{r});
    return 0;
  }
  std::vector<AblationRow> rows;
  if (c.ablation == "weighting") {
    rows = weighting_ablation(ds, cv);
  } else if (c.ablation == "features") {
    rows = feature_group_ablation(ds, cv);
  } else {
    throw ArgumentError("unknown ablation '" + c.ablation + "'");
  }
  std::vector<std::string> names;
  std::vector<EvalReport> reports;
  for (const auto& row : rows) {
    write_report(dir / row.name, row.report);
    names.push_back(row.name);
    reports.push_back(row.report);
  }
  write_text(dir / "ablation.csv", ablation_to_csv(rows));
  write_text(dir / "summary.md", render_summary_table(names, reports));
  write_text(dir / "metrics.svg", render_metric_svg(names, reports));
  std::cout << render_summary_table(names, reports);
  return 0;
}

std::vector<Eigen::Index> labeled_rows(const Dataset& ds) {
  auto rows = ds.labeled_indices();
  if (rows.empty()) throw ArgumentError("dataset has no labeled cases");
  return rows;
}

int run_score(const RunConfig& c) {
  const Dataset ds = input_dataset(c);
  const UvhlConfig u = uvhl_config(c);
  const auto train_rows = labeled_rows(ds);
  const NormalizationParams norm = fit_normalization(ds, train_rows);
  const Eigen::MatrixXd X = apply_normalization(norm, ds.features);
  Eigen::MatrixXd X_train(static_cast<Eigen::Index>(train_rows.size()), X.cols());
  std::vector<Label> train_labels;
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    X_train.row(static_cast<Eigen::Index>(i)) = X.row(train_rows[i]);
    train_labels.push_back(ds.labels[static_cast<std::size_t>(train_rows[i])]);
  }
  MlpConfig mlp = u.mlp;
  mlp.seed = derive_seed(c.seed, {1});
  const UncertaintyModel model = train(X_train, std::span<const Label>(train_labels), mlp);
  const UncertaintyScores scores = score_cases(model, X, u.mc_passes, derive_seed(c.seed, {2}));
  const VertexWeights w = compute_vertex_weights(u.method, scores, u.lambda_u);

  const fs::path dir = prepare_out(c);
  save_model(model, dir / "model.txt");
  std::ostringstream out;
  out << "id,aleatoric,epistemic,weight\n";
  for (Eigen::Index i = 0; i < ds.size(); ++i)
    out << ds.ids[static_cast<std::size_t>(i)] << ',' << num(scores.aleatoric(i)) << ',' << num(scores.epistemic(i))
        << ',' << num(w.weights(i)) << '\n';
  write_text(dir / "scores.csv", out.str());
  return 0;
}

int run_predict(const RunConfig& c) {
  const Dataset ds = input_dataset(c);
  const UvhlConfig u = uvhl_config(c);
  std::vector<std::string> group_names = c.groups;
  if (group_names.empty())
    for (const auto& g : ds.groups) group_names.push_back(g.name);
  const Dataset view = select_groups(ds, group_names);
  const auto train_rows = labeled_rows(view);
  std::optional<int> k;
  if (c.k_nn > 0) k = c.k_nn;
  const TransductiveRun run = run_transductive(view.features, view.groups, view.labels, train_rows, k, c.k_pool,
                                               c.inner_folds, u, c.seed);
  const fs::path dir = prepare_out(c);
  write_label_scores_csv(view.ids, run.F, dir / "predictions.csv", u.tie_break);
  if (c.dump_incidence) {
    const Eigen::MatrixXd X = apply_normalization(run.normalization, view.features);
    std::vector<std::vector<Hyperedge>> edges;
    for (std::size_t g = 0; g < view.groups.size(); ++g) {
      const auto& range = view.groups[g];
      edges.push_back(knn_hyperedges(X.middleCols(range.begin, range.size), run.k_nn, static_cast<int>(g)));
    }
    write_incidence_csv(build_incidence(edges, run.weights.weights), dir / "incidence.csv");
  }
  std::cout << "k_nn=" << run.k_nn << '\n';
  return 0;
}

int run_report(const RunConfig& c) {
  if (c.inputs.empty()) throw ArgumentError("report: at least one --input report.json is required");
  if (!c.names.empty() && c.names.size() != c.inputs.size())
    throw ArgumentError("report: --names must match --input in count");
  std::vector<std::string> names;
  std::vector<EvalReport> reports;
  for (std::size_t i = 0; i < c.inputs.size(); ++i) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text(c.inputs[i]));
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(c.inputs[i] + ": " + e.what());
    }
    reports.push_back(report_from_json(j));
    names.push_back(c.names.empty() ? fs::path(c.inputs[i]).parent_path().filename().string() : c.names[i]);
    if (names.back().empty()) names.back() = fs::path(c.inputs[i]).stem().string();
  }
  const fs::path dir = prepare_out(c);
  const std::string table = render_summary_table(names, reports);
  write_text(dir / "summary.md", table);
  write_text(dir / "metrics.svg", render_metric_svg(names, reports));
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig c;
  CLI::App app{"Uncertainty vertex-weighted hypergraph learning"};
  app.set_config("--config", "", "Flat key=value file; command-line flags take precedence");
  app.require_subcommand(1, 1);

  app.add_option("--dataset", c.dataset, "Input CSV (id, label, feature columns); synthetic data when omitted");
  app.add_option("--n", c.n, "Synthetic cases per class")->capture_default_str();
  app.add_option("--separation", c.separation, "Synthetic distance between class means")->capture_default_str();
  app.add_option("--regional-dims", c.regional_dims, "Synthetic regional feature count")->capture_default_str();
  app.add_option("--radiomics-dims", c.radiomics_dims, "Synthetic radiomics feature count")->capture_default_str();
  app.add_option("--label-noise", c.label_noise, "Fraction of labels flipped per class")->capture_default_str();
  app.add_option("--feature-noise", c.feature_noise, "Fraction of rows with inflated spread per class")
      ->capture_default_str();
  app.add_option("--feature-noise-scale", c.feature_noise_scale, "Spread multiplier for noisy rows")
      ->capture_default_str();
  app.add_option("--method", c.method, "uvhl | equal-weight | aleatoric-only | epistemic-only")
      ->capture_default_str();
  app.add_option("--k-nn", c.k_nn, "Neighbors per hyperedge; 0 selects from --k-pool by inner CV")
      ->capture_default_str();
  app.add_option("--k-pool", c.k_pool, "Candidate neighbor counts")->delimiter(',')->capture_default_str();
  app.add_option("--inner-folds", c.inner_folds, "Folds for neighbor-count selection")->capture_default_str();
  app.add_option("--lambda-u", c.lambda_u, "Slope of the uncertainty-to-weight sigmoid")->capture_default_str();
  app.add_option("--lambda-r", c.lambda_r, "Weight of the label-fitting term")->capture_default_str();
  app.add_option("--mc-passes", c.mc_passes, "Monte-Carlo dropout passes")->capture_default_str();
  app.add_option("--dropout", c.dropout, "Dropout rate")->capture_default_str();
  app.add_option("--hidden", c.hidden, "Hidden layer widths")->delimiter(',')->capture_default_str();
  app.add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
  app.add_option("--batch", c.batch, "Mini-batch size")->capture_default_str();
  app.add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
  app.add_option("--folds", c.folds, "Outer cross-validation folds")->capture_default_str();
  app.add_option("--repeats", c.repeats, "Cross-validation repeats")->capture_default_str();
  app.add_option("--seed", c.seed, "Master seed")->capture_default_str();
  app.add_option("--groups", c.groups, "Feature groups to use (default: all)")->delimiter(',');
  app.add_option("--train-per-class", c.train_per_class, "Labeled training cases kept per class (0: all)")
      ->capture_default_str();
  app.add_option("--tie-break", c.tie_break, "Class predicted on equal scores")
      ->check(CLI::IsMember({"COVID", "CAP"}))
      ->capture_default_str();
  app.add_option("--ablation", c.ablation, "cv: none | weighting | features")
      ->check(CLI::IsMember({"none", "weighting", "features"}))
      ->capture_default_str();
  app.add_option("--input", c.inputs, "report: report.json files")->delimiter(',');
  app.add_option("--names", c.names, "report: series names")->delimiter(',');
  app.add_flag("--dump-incidence", c.dump_incidence, "predict: also write the incidence matrix");
  app.add_option("--out", c.out, "Output directory")->envname("UVHL_OUT_DIR")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset and its noise mask")->fallthrough();
  auto* cv = app.add_subcommand("cv", "Cross-validate and write an evaluation report")->fallthrough();
  auto* score = app.add_subcommand("score", "Train the uncertainty model and write per-case scores")->fallthrough();
  auto* predict = app.add_subcommand("predict", "Solve for labels of unlabeled cases")->fallthrough();
  auto* report = app.add_subcommand("report", "Render tables and charts from report files")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(c);
    if (cv->parsed()) return run_cv(c);
    if (score->parsed()) return run_score(c);
    if (predict->parsed()) return run_predict(c);
    if (report->parsed()) return run_report(c);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
