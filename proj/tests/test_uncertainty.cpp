#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uvhl/error.hpp"
#include "uvhl/uncertainty.hpp"

using namespace uvhl;

namespace {

/// Dual-head network with every tensor (including the alpha head) random.
UncertaintyModel random_model(int d, std::vector<int> hidden, double dropout, std::uint64_t seed) {
  UncertaintyModel m(d, std::move(hidden), dropout, seed);
  Rng rng(seed + 99);
  std::normal_distribution<double> normal(0.0, 0.5);
  auto& p = m.mutable_parameters();
  Eigen::VectorXd flat = p.flatten();
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) += 0.1 * normal(rng);
  p.unflatten(flat);
  for (Eigen::Index i = 0; i < p.alpha_head.weight.size(); ++i) p.alpha_head.weight.data()[i] = normal(rng);
  p.alpha_head.bias(0) = normal(rng);
  return m;
}

double accuracy(const UncertaintyModel& m, const Eigen::MatrixXd& X, std::span<const Label> labels) {
  int correct = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const auto p = m.predict(X.row(i).transpose());
    const int pred = p.prob(0) >= p.prob(1) ? 0 : 1;
    correct += pred == class_index(labels[static_cast<std::size_t>(i)]);
  }
  return static_cast<double>(correct) / static_cast<double>(X.rows());
}

Eigen::MatrixXd normalized(const Dataset& ds) {
  std::vector<Eigen::Index> all(static_cast<std::size_t>(ds.size()));
  std::iota(all.begin(), all.end(), 0);
  return apply_normalization(fit_normalization(ds.features, all), ds.features);
}

}  // namespace

TEST_CASE("attenuated_loss values") {
  const Eigen::Vector2d half(0.5, 0.5);
  CHECK(attenuated_loss(half, 0.0, 0) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
  CHECK(attenuated_loss(half, 0.0, 0) == doctest::Approx(0.34657359027997264));

  const Eigen::Vector2d p(0.2, 0.8);
  CHECK(attenuated_loss(p, 0.0, 1) == doctest::Approx(0.5 * -std::log(0.8)));
  // Large alpha: the cross-entropy term vanishes, leaving alpha / 2.
  CHECK(attenuated_loss(p, 60.0, 0) == doctest::Approx(30.0).epsilon(1e-12));
  // Zero probability at the true label is clamped, not an error.
  const Eigen::Vector2d hard(1.0, 0.0);
  CHECK(attenuated_loss(hard, 0.0, 1) == doctest::Approx(0.5 * -std::log(kProbabilityFloor)));
  CHECK_THROWS_AS(attenuated_loss(half, 0.0, 2), ArgumentError);
}

TEST_CASE("attenuated_loss is minimized at alpha = ln CE") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  for (int trial = 0; trial < 10; ++trial) {
    const double p0 = u(rng);
    const Eigen::Vector2d prob(p0, 1.0 - p0);
    const int label = trial % 2;
    const double ce = -std::log(prob(label));
    const double step = 1e-3;
    double best_alpha = 0.0;
    double best = INFINITY;
    for (double a = -8.0; a <= 8.0; a += step) {
      const double l = attenuated_loss(prob, a, label);
      if (l < best) {
        best = l;
        best_alpha = a;
      }
    }
    CHECK(std::abs(best_alpha - std::log(ce)) <= step);
  }
}

TEST_CASE("batch_loss gradient matches central finite differences") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const int d = std::uniform_int_distribution<int>(1, 8)(rng);
    const int depth = std::uniform_int_distribution<int>(1, 2)(rng);
    std::vector<int> hidden;
    for (int l = 0; l < depth; ++l) hidden.push_back(std::uniform_int_distribution<int>(1, 8)(rng));
    auto model = random_model(d, hidden, 0.3, seed);
    const int batch = 5;
    Eigen::MatrixXd X(d, batch);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = normal(rng);
    std::vector<int> labels = {0, 1, 1, 0, 1};
    const DropoutMasks masks = model.sample_masks(batch, rng);

    MlpParameters grad;
    batch_loss(model.parameters(), X, labels, &masks, &grad);
    const Eigen::VectorXd analytic = grad.flatten();
    Eigen::VectorXd theta = model.parameters().flatten();
    MlpParameters probe = model.parameters();
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd t = theta;
      t(i) += h;
      probe.unflatten(t);
      const double up = batch_loss(probe, X, labels, &masks, nullptr);
      t(i) -= 2 * h;
      probe.unflatten(t);
      const double down = batch_loss(probe, X, labels, &masks, nullptr);
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max({std::abs(numeric), std::abs(analytic(i)), 1e-6});
      CHECK(std::abs(numeric - analytic(i)) / scale <= 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("train reaches high accuracy on a well separated set") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto synth = synth_generate(SynthSpec::separated(default_synth_groups(2, 2), 10.0, 50, 0.0, 0.0, seed));
    const Eigen::MatrixXd X = normalized(synth.dataset);
    MlpConfig cfg;
    cfg.seed = seed;
    const auto model = train(X, std::span<const Label>(synth.dataset.labels), cfg);
    CHECK(accuracy(model, X, synth.dataset.labels) >= 0.99);
  }
}

TEST_CASE("train is bit-reproducible and rejects bad inputs") {
  const auto synth = synth_generate(SynthSpec::separated(default_synth_groups(3, 0), 4.0, 20, 0.0, 0.0, 1));
  const Eigen::MatrixXd X = normalized(synth.dataset);
  MlpConfig cfg;
  cfg.epochs = 20;
  cfg.seed = 42;
  const auto a = train(X, std::span<const Label>(synth.dataset.labels), cfg);
  const auto b = train(X, std::span<const Label>(synth.dataset.labels), cfg);
  CHECK(a.parameters() == b.parameters());
  cfg.seed = 43;
  CHECK(!(train(X, std::span<const Label>(synth.dataset.labels), cfg).parameters() == a.parameters()));

  std::vector<int> one_class(static_cast<std::size_t>(X.rows()), 0);
  CHECK_THROWS_AS(train(X, std::span<const int>(one_class), cfg), ArgumentError);
  Eigen::MatrixXd huge = X * 1e300;
  huge(0, 0) = 1e308;
  cfg.learning_rate = 1e300;
  std::vector<int> labels(static_cast<std::size_t>(X.rows()));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = class_index(synth.dataset.labels[i]);
  CHECK_THROWS_AS(train(huge, std::span<const int>(labels), cfg), TrainingError);
}

TEST_CASE("alpha head learns higher variance on flipped labels") {
  double gap = 0.0;
  constexpr int kSeeds = 10;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto synth = synth_generate(SynthSpec::separated(default_synth_groups(8, 8), 6.0, 100, 0.2, 0.0, 500 + seed));
    const Eigen::MatrixXd X = normalized(synth.dataset);
    MlpConfig cfg;
    cfg.seed = seed;
    const auto model = train(X, std::span<const Label>(synth.dataset.labels), cfg);
    double flipped = 0.0;
    double clean = 0.0;
    int nf = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double a = model.predict(X.row(i).transpose()).alpha;
      if (synth.flipped[static_cast<std::size_t>(i)]) {
        flipped += a;
        ++nf;
      } else {
        clean += a;
      }
    }
    gap += flipped / nf - clean / static_cast<double>(X.rows() - nf);
  }
  CHECK(gap / kSeeds > 0.0);
}

TEST_CASE("mc_forward contracts") {
  const auto model = random_model(4, {6, 5}, 0.5, 3);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -1.0, 1.0);
  const auto passes = mc_forward(model, x, 25, 77);
  CHECK(passes.size() == 25);
  bool varied = false;
  for (const auto& p : passes) {
    CHECK(p.prob.minCoeff() >= 0.0);
    CHECK(std::abs(p.prob.sum() - 1.0) <= 1e-9);
    varied = varied || (p.prob - passes.front().prob).norm() > 0.0;
  }
  CHECK(varied);
  CHECK(mc_forward(model, x, 25, 77).back().alpha == passes.back().alpha);

  Rng rng(77);
  const auto single = model.predict(x, rng);
  const auto one = mc_forward(model, x, 1, 77);
  CHECK(one.front().prob == single.prob);
  CHECK(one.front().alpha == single.alpha);

  const auto deterministic = random_model(4, {6, 5}, 0.0, 3);
  const auto same = mc_forward(deterministic, x, 10, 1);
  for (const auto& p : same) {
    CHECK(p.prob == same.front().prob);
    CHECK(p.alpha == same.front().alpha);
  }
  CHECK(same.front().prob == deterministic.predict(x).prob);
  CHECK_THROWS_AS(mc_forward(model, x, 0, 1), ArgumentError);
}

TEST_CASE("mean_prediction") {
  const std::vector<Eigen::Vector2d> opposite = {{1.0, 0.0}, {0.0, 1.0}};
  CHECK(mean_prediction(opposite) == Eigen::Vector2d(0.5, 0.5));
  const std::vector<Eigen::Vector2d> single = {{0.3, 0.7}};
  CHECK(mean_prediction(single) == single.front());
  const std::vector<Eigen::Vector2d> same(4, Eigen::Vector2d(0.25, 0.75));
  CHECK(mean_prediction(same) == Eigen::Vector2d(0.25, 0.75));
  CHECK_THROWS_AS(mean_prediction(std::span<const Eigen::Vector2d>()), ArgumentError);

  Rng rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Eigen::Vector2d> probs;
  for (int i = 0; i < 9; ++i) {
    const double a = u(rng);
    probs.emplace_back(a, 1.0 - a);
  }
  const Eigen::Vector2d m = mean_prediction(probs);
  CHECK(std::abs(m.sum() - 1.0) <= 1e-12);
  std::shuffle(probs.begin(), probs.end(), rng);
  CHECK((mean_prediction(probs) - m).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("aleatoric and epistemic scores") {
  std::vector<Prediction> zero_alpha = {{{0.6, 0.4}, 0.0}, {{0.7, 0.3}, 0.0}};
  CHECK(aleatoric_score(zero_alpha) == 1.0);
  std::vector<Prediction> ln2 = {{{0.6, 0.4}, std::log(2.0)}, {{0.6, 0.4}, std::log(2.0)}};
  CHECK(aleatoric_score(ln2) == doctest::Approx(2.0).epsilon(1e-15));
  // Identical passes: no spread, so the two scores coincide.
  CHECK(epistemic_score(ln2) == aleatoric_score(ln2));

  // f1 = [1,0], f2 = [0,1] with exp(alpha) -> 0: (1 + 1)/2 - |[0.5,0.5]|^2 = 0.5.
  std::vector<Prediction> opposite = {{{1.0, 0.0}, -800.0}, {{0.0, 1.0}, -800.0}};
  CHECK(aleatoric_score(opposite) == 0.0);
  CHECK(epistemic_score(opposite) == doctest::Approx(0.5).epsilon(1e-15));

  CHECK_THROWS_AS(aleatoric_score(std::span<const Prediction>()), ArgumentError);
  CHECK_THROWS_AS(epistemic_score(std::span<const Prediction>()), ArgumentError);

  Rng rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Prediction> passes;
    const int T = 1 + trial % 12;
    for (int t = 0; t < T; ++t) {
      const double a = u(rng);
      passes.push_back({{a, 1.0 - a}, normal(rng)});
    }
    CHECK(epistemic_score(passes) >= aleatoric_score(passes));
  }
}

TEST_CASE("score_cases: dropout 0 makes epistemic equal aleatoric") {
  const auto model = random_model(3, {5, 4}, 0.0, 12);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(15, 3);
  const auto s = score_cases(model, X, 8, 1);
  CHECK((s.epistemic - s.aleatoric).cwiseAbs().maxCoeff() <= 1e-12);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    CHECK(s.aleatoric(i) == doctest::Approx(std::exp(model.predict(X.row(i).transpose()).alpha)).epsilon(1e-14));

  const auto noisy = random_model(3, {5, 4}, 0.5, 12);
  const auto a = score_cases(noisy, X, 8, 1);
  const auto b = score_cases(noisy, X.topRows(5), 8, 1);
  CHECK(a.epistemic.head(5) == b.epistemic);  // per-case streams
  CHECK((a.epistemic.array() >= a.aleatoric.array()).all());
  CHECK_THROWS_AS(score_cases(noisy, Eigen::MatrixXd::Zero(2, 4), 8, 1), ShapeError);
}

TEST_CASE("normalize_scores") {
  Eigen::VectorXd e(4);
  e << 1.0, 2.0, 3.0, 6.0;
  const auto vw = normalize_scores(e, -1.0);
  CHECK(vw.mu_e == doctest::Approx(3.0));
  CHECK(vw.s_e == doctest::Approx(std::sqrt(3.5)));
  CHECK(vw.weights(2) == doctest::Approx(0.5));  // score at the mean
  CHECK(vw.weights(0) > vw.weights(1));
  CHECK(vw.weights(3) < 0.5);
  const double at_one_sd = 1.0 / (1.0 + std::exp(1.0));
  Eigen::VectorXd two(2);
  two << 0.0, 2.0;  // mean 1, population sd 1
  CHECK(normalize_scores(two, -1.0).weights(1) == doctest::Approx(at_one_sd));
  CHECK(normalize_scores(e, 0.0).weights.isConstant(0.5));
  CHECK(normalize_scores(Eigen::VectorXd::Constant(5, 2.0), 3.0).weights.isConstant(0.5));
  CHECK(normalize_scores(Eigen::VectorXd::Constant(1, 2.0), 3.0).weights(0) == 0.5);
  CHECK_THROWS_AS(normalize_scores(Eigen::VectorXd(), 1.0), ArgumentError);

  Eigen::VectorXd extreme(3);
  extreme << 0.0, 0.0, 1e6;
  const auto sat = normalize_scores(extreme, 1e3);
  CHECK((sat.weights.array() > 0.0).all());
  CHECK((sat.weights.array() < 1.0).all());

  Rng rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double lambda : {-2.0, -1.0, 0.5, 3.0}) {
    Eigen::VectorXd s(30);
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = normal(rng);
    const auto w = normalize_scores(s, lambda).weights;
    for (Eigen::Index i = 0; i < s.size(); ++i)
      for (Eigen::Index j = 0; j < s.size(); ++j)
        if (s(i) > s(j)) CHECK((w(i) - w(j)) * lambda >= 0.0);
  }
}

TEST_CASE("model checkpoints round-trip bit-exactly") {
  const auto model = random_model(5, {7, 3}, 0.25, 2024);
  const auto text = serialize_model(model);
  const auto back = deserialize_model(text);
  CHECK(back == model);
  CHECK(serialize_model(back) == text);
  CHECK_THROWS_AS(deserialize_model("garbage"), SchemaError);
  CHECK_THROWS(deserialize_model(text.substr(0, text.size() / 2)));
}
