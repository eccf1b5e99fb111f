#include <doctest.h>

#include <algorithm>
#include <random>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>

#include "uvhl/data.hpp"
#include "uvhl/random.hpp"
#include "uvhl/error.hpp"

using namespace uvhl;

namespace {

std::string make_csv(int regional, int radiomics, const std::vector<std::string>& labels) {
  std::ostringstream out;
  out << "id,label";
  for (int j = 0; j < regional; ++j) out << ",reg_" << j;
  for (int j = 0; j < radiomics; ++j) out << ",rad_" << j;
  out << ",age,sex\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << "case" << i << ',' << labels[i];
    for (int j = 0; j < regional + radiomics; ++j) out << ',' << (0.5 * j + static_cast<double>(i));
    out << ",6" << i << ",1\n";
  }
  return out.str();
}

}  // namespace

TEST_CASE("load_dataset infers the 96/93/2 feature layout from column prefixes") {
  const auto ds = parse_dataset(make_csv(96, 93, {"COVID", "CAP", "UNKNOWN"}));
  CHECK(ds.dim() == 191);
  REQUIRE(ds.groups.size() == 3);
  CHECK(ds.group("regional") == ColumnRange{"regional", 0, 96});
  CHECK(ds.group("radiomics") == ColumnRange{"radiomics", 96, 93});
  CHECK(ds.group("demographic") == ColumnRange{"demographic", 189, 2});
  CHECK(ds.columns[189] == "age");
}

TEST_CASE("load_dataset keeps row order and label counts") {
  const auto ds = parse_dataset(make_csv(2, 2, {"COVID", "COVID", "CAP", "UNKNOWN"}));
  CHECK(ds.size() == 4);
  CHECK(ds.labeled_indices().size() == 3);
  CHECK(ds.unlabeled_indices() == std::vector<Eigen::Index>{3});
  CHECK(ds.ids[2] == "case2");
  CHECK(ds.labels[2] == Label::kCap);
  CHECK(ds.features(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("load_dataset regroups interleaved columns contiguously") {
  const auto ds = parse_dataset("id,label,rad_a,reg_a,rad_b\nx,CAP,1,2,3\ny,COVID,4,5,6\n");
  REQUIRE(ds.groups.size() == 2);
  CHECK(ds.groups[0] == ColumnRange{"radiomics", 0, 2});
  CHECK(ds.groups[1] == ColumnRange{"regional", 2, 1});
  CHECK(ds.columns == std::vector<std::string>{"rad_a", "rad_b", "reg_a"});
  CHECK(ds.features(1, 1) == 6.0);
  CHECK(ds.features(1, 2) == 5.0);
}

TEST_CASE("load_dataset error paths") {
  CHECK_THROWS_AS(parse_dataset("id,reg_0\na,1\n"), SchemaError);
  CHECK_THROWS_AS(parse_dataset(""), SchemaError);
  CHECK_THROWS_AS(parse_dataset("id,label,reg_0\na,COVID,1\na,CAP,2\n"), IntegrityError);
  CHECK_THROWS_AS(parse_dataset("id,label,reg_0\na,FLU,1\n"), ParseError);
  try {
    parse_dataset("id,label,reg_0,reg_1\na,COVID,1,2\nb,CAP,3,oops\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 3);
    CHECK(e.column() == 4);
  }
  CHECK_THROWS_AS(parse_dataset("id,label,reg_0\na,COVID,nan\n"), ParseError);
  CHECK_THROWS_AS(parse_dataset("id,label,reg_0\na,COVID,\n"), ParseError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/file.csv"), IoError);
}

TEST_CASE("dataset CSV round-trips through write and load") {
  const auto synth = synth_generate(SynthSpec::separated(default_synth_groups(3, 2), 4.0, 5, 0.2, 0.2, 9));
  const auto path = std::filesystem::temp_directory_path() / "uvhl_roundtrip.csv";
  write_dataset(synth.dataset, path);
  const auto back = load_dataset(path);
  CHECK(back.features == synth.dataset.features);
  CHECK(back.labels == synth.dataset.labels);
  CHECK(back.ids == synth.dataset.ids);
  CHECK(back.groups == synth.dataset.groups);
  std::filesystem::remove(path);
}

TEST_CASE("fit_normalization uses only the given rows") {
  Dataset ds;
  ds.features.resize(4, 2);
  ds.features << 0, 3,  //
      5, 3,             //
      10, 3,            //
      100, -7;
  ds.labels = {Label::kCovid, Label::kCap, Label::kCovid, Label::kUnlabeled};
  ds.ids = {"a", "b", "c", "d"};
  ds.columns = {"reg_0", "reg_1"};
  ds.groups = {{"regional", 0, 2}};
  const std::vector<Eigen::Index> train = {0, 1, 2};
  const auto p = fit_normalization(ds, train);
  CHECK(p.min(0) == 0.0);
  CHECK(p.max(0) == 10.0);
  CHECK(p.min(1) == 3.0);
  CHECK(p.max(1) == 3.0);
  CHECK(p.fitted_on == 3);
  CHECK(fit_normalization(ds, train) == p);

  const Eigen::MatrixXd out = apply_normalization(p, ds.features);
  CHECK(out(1, 0) == 0.5);
  CHECK(out(3, 0) == 10.0);  // unclamped
  CHECK(out.col(1).isZero());

  Eigen::MatrixXd probe(1, 2);
  probe << 20, 9;
  CHECK(apply_normalization(p, probe)(0, 0) == 2.0);

  CHECK_THROWS_AS(fit_normalization(ds, std::vector<Eigen::Index>{}), ArgumentError);
  const std::vector<Eigen::Index> with_unlabeled = {0, 3};
  CHECK_THROWS_AS(fit_normalization(ds, with_unlabeled), ArgumentError);
  CHECK_THROWS_AS(apply_normalization(p, Eigen::MatrixXd::Zero(2, 3)), ShapeError);
}

TEST_CASE("normalization properties on random data") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 5.0);
    Eigen::MatrixXd X(30, 4);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = normal(rng);
    std::vector<Eigen::Index> train;
    for (Eigen::Index i = 0; i < 30; i += 2) train.push_back(i);
    const auto p = fit_normalization(X, train);
    const Eigen::MatrixXd N = apply_normalization(p, X);
    for (Eigen::Index i : train) {
      CHECK(N.row(i).minCoeff() >= 0.0);
      CHECK(N.row(i).maxCoeff() <= 1.0);
    }
    // Row order never changes per-row outputs.
    Eigen::MatrixXd reversed = X.colwise().reverse();
    const Eigen::MatrixXd Nr = apply_normalization(p, reversed);
    CHECK(Nr.colwise().reverse() == N);
  }
}

TEST_CASE("stratified_kfold deals each class evenly") {
  std::vector<Label> labels;
  for (int i = 0; i < 12; ++i) labels.push_back(Label::kCovid);
  for (int i = 0; i < 8; ++i) labels.push_back(Label::kCap);
  labels.push_back(Label::kUnlabeled);
  const auto plan = stratified_kfold(labels, 4, 17);
  std::set<Eigen::Index> seen;
  for (int f = 0; f < 4; ++f) {
    int c0 = 0;
    int c1 = 0;
    for (Eigen::Index i : plan.members(f)) {
      CHECK(seen.insert(i).second);
      (labels[static_cast<std::size_t>(i)] == Label::kCovid ? c0 : c1)++;
    }
    CHECK(c0 == 3);
    CHECK(c1 == 2);
  }
  CHECK(seen.size() == 20);
  CHECK(plan.assignments[20] == FoldPlan::kUnassigned);
  CHECK(stratified_kfold(labels, 4, 17).assignments == plan.assignments);
  CHECK(stratified_kfold(labels, 4, 18).assignments != plan.assignments);
}

TEST_CASE("stratified_kfold balance property over random class sizes") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const int k = std::uniform_int_distribution<int>(2, 10)(rng);
    const int n0 = std::uniform_int_distribution<int>(k, 60)(rng);
    const int n1 = std::uniform_int_distribution<int>(k, 60)(rng);
    std::vector<Label> labels(static_cast<std::size_t>(n0), Label::kCovid);
    labels.insert(labels.end(), static_cast<std::size_t>(n1), Label::kCap);
    std::shuffle(labels.begin(), labels.end(), rng);
    const auto plan = stratified_kfold(labels, k, seed);
    for (int f = 0; f < k; ++f) {
      double c[2] = {0, 0};
      for (Eigen::Index i : plan.members(f)) c[class_index(labels[static_cast<std::size_t>(i)])] += 1;
      CHECK(std::abs(c[0] - static_cast<double>(n0) / k) <= 1.0);
      CHECK(std::abs(c[1] - static_cast<double>(n1) / k) <= 1.0);
    }
  }
}

TEST_CASE("stratified_kfold rejects small classes and k < 2") {
  std::vector<Label> labels = {Label::kCovid, Label::kCovid, Label::kCovid, Label::kCap, Label::kCap};
  CHECK_THROWS_AS(stratified_kfold(labels, 3, 0), ArgumentError);
  CHECK_THROWS_AS(stratified_kfold(labels, 1, 0), ArgumentError);
  CHECK_NOTHROW(stratified_kfold(labels, 2, 0));
}

TEST_CASE("synth_generate is deterministic and flips an exact count per class") {
  const auto spec = SynthSpec::separated(default_synth_groups(4, 4), 5.0, 100, 0.2, 0.1, 3);
  const auto a = synth_generate(spec);
  const auto b = synth_generate(spec);
  CHECK(a.dataset.features == b.dataset.features);
  CHECK(a.dataset.labels == b.dataset.labels);
  int flipped[2] = {0, 0};
  int noisy[2] = {0, 0};
  for (std::size_t i = 0; i < a.flipped.size(); ++i) {
    const int c = class_index(a.true_labels[i]);
    flipped[c] += a.flipped[i];
    noisy[c] += a.feature_noise[i];
    // The flipped set is exactly where observed and true labels differ.
    CHECK(a.flipped[i] == (a.dataset.labels[i] != a.true_labels[i]));
  }
  CHECK(flipped[0] == 20);
  CHECK(flipped[1] == 20);
  CHECK(noisy[0] == 10);
  CHECK(noisy[1] == 10);
  CHECK(a.dataset.dim() == 8);
  CHECK(a.dataset.group("radiomics").begin == 4);
}

TEST_CASE("well separated clean clusters are 1-NN separable") {
  const auto synth = synth_generate(SynthSpec::separated(default_synth_groups(3, 3), 30.0, 50, 0.0, 0.0, 11));
  const auto& X = synth.dataset.features;
  int correct = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Eigen::Index best = -1;
    double best_d = INFINITY;
    for (Eigen::Index j = 0; j < X.rows(); ++j) {
      if (j == i) continue;
      const double d = (X.row(i) - X.row(j)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    correct += synth.dataset.labels[static_cast<std::size_t>(best)] == synth.dataset.labels[static_cast<std::size_t>(i)];
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(X.rows()) >= 0.99);
}

TEST_CASE("synth_generate validates its spec") {
  auto spec = SynthSpec::separated(default_synth_groups(2, 0), 3.0, 10, 0.0, 0.0, 1);
  spec.cap.covariance(0, 0) = -1.0;
  spec.cap.covariance(1, 1) = -1.0;
  CHECK_THROWS_AS(synth_generate(spec), ArgumentError);
  spec = SynthSpec::separated(default_synth_groups(2, 0), 3.0, 10, 1.5, 0.0, 1);
  CHECK_THROWS_AS(synth_generate(spec), ArgumentError);
  spec = SynthSpec::separated(default_synth_groups(2, 0), 3.0, 0, 0.0, 0.0, 1);
  CHECK_THROWS_AS(synth_generate(spec), ArgumentError);
}

TEST_CASE("subset_rows and select_groups keep metadata consistent") {
  const auto synth = synth_generate(SynthSpec::separated(default_synth_groups(2, 3), 3.0, 4, 0.0, 0.0, 5));
  const std::vector<Eigen::Index> rows = {7, 0, 3};
  const auto sub = subset_rows(synth.dataset, rows);
  CHECK(sub.ids == std::vector<std::string>{"s00007", "s00000", "s00003"});
  CHECK(sub.features.row(0) == synth.dataset.features.row(7));
  const std::vector<std::string> rad = {"radiomics"};
  const auto only = select_groups(synth.dataset, rad);
  CHECK(only.dim() == 3);
  CHECK(only.groups.front() == ColumnRange{"radiomics", 0, 3});
  CHECK(only.features == synth.dataset.features.rightCols(3));
  CHECK_NOTHROW(only.validate());
}
