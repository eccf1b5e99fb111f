#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "uvhl/error.hpp"
#include "uvhl/uncertainty.hpp"

namespace uvhl {

// ---------------------------------------------------------------------------
// Parameter bookkeeping

namespace {

template <typename Fn>
void for_each_tensor(MlpParameters& p, Fn&& fn) {
  for (auto& l : p.hidden) {
    fn(l.weight);
    fn(l.bias);
  }
  fn(p.class_head.weight);
  fn(p.class_head.bias);
  fn(p.alpha_head.weight);
  fn(p.alpha_head.bias);
}

template <typename Fn>
void for_each_tensor(const MlpParameters& p, Fn&& fn) {
  for_each_tensor(const_cast<MlpParameters&>(p), [&](auto& t) { fn(std::as_const(t)); });
}

DenseLayer he_layer(int in, int out, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / std::max(in, 1)));
  DenseLayer l;
  l.weight.resize(out, in);
  for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = normal(rng);
  l.bias = Eigen::VectorXd::Zero(out);
  return l;
}

}  // namespace

Eigen::Index MlpParameters::size() const {
  Eigen::Index n = 0;
  for_each_tensor(*this, [&](const auto& t) { n += t.size(); });
  return n;
}

Eigen::VectorXd MlpParameters::flatten() const {
  Eigen::VectorXd flat(size());
  Eigen::Index pos = 0;
  for_each_tensor(*this, [&](const auto& t) {
    flat.segment(pos, t.size()) = Eigen::Map<const Eigen::VectorXd>(t.data(), t.size());
    pos += t.size();
  });
  return flat;
}

void MlpParameters::unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != size()) throw ShapeError("unflatten: parameter count mismatch");
  Eigen::Index pos = 0;
  for_each_tensor(*this, [&](auto& t) {
    Eigen::Map<Eigen::VectorXd>(t.data(), t.size()) = flat.segment(pos, t.size());
    pos += t.size();
  });
}

MlpParameters MlpParameters::zeros_like() const {
  MlpParameters z = *this;
  for_each_tensor(z, [](auto& t) { t.setZero(); });
  return z;
}

// ---------------------------------------------------------------------------
// Model

UncertaintyModel::UncertaintyModel(int input_dim, std::vector<int> hidden, double dropout,
                                   std::uint64_t seed)
    : dropout_(dropout), seed_(seed) {
  if (input_dim < 1) throw ArgumentError("input dimension must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ArgumentError("dropout rate must lie in [0, 1)");
  Rng rng(derive_seed(seed, {0x1417}));
  int in = input_dim;
  for (int h : hidden) {
    if (h < 1) throw ArgumentError("hidden layer sizes must be positive");
    params_.hidden.push_back(he_layer(in, h, rng));
    in = h;
  }
  params_.class_head = he_layer(in, kNumClasses, rng);
  // Log-variance head starts at alpha = 0 everywhere so no region begins with
  // a spurious uncertainty offset.
  params_.alpha_head = {Eigen::MatrixXd::Zero(1, in), Eigen::VectorXd::Zero(1)};
}

UncertaintyModel::UncertaintyModel(MlpParameters params, double dropout, std::uint64_t seed)
    : params_(std::move(params)), dropout_(dropout), seed_(seed) {
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ArgumentError("dropout rate must lie in [0, 1)");
  if (params_.class_head.weight.rows() != kNumClasses || params_.alpha_head.weight.rows() != 1)
    throw ShapeError("model heads have wrong output size");
}

int UncertaintyModel::input_dim() const {
  const auto& first = params_.hidden.empty() ? params_.class_head : params_.hidden.front();
  return static_cast<int>(first.weight.cols());
}

std::vector<int> UncertaintyModel::hidden_sizes() const {
  std::vector<int> out;
  for (const auto& l : params_.hidden) out.push_back(static_cast<int>(l.weight.rows()));
  return out;
}

DropoutMasks UncertaintyModel::sample_masks(Eigen::Index batch, Rng& rng) const {
  DropoutMasks masks;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - dropout_);
  for (const auto& l : params_.hidden) {
    Eigen::MatrixXd m(l.weight.rows(), batch);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = (dropout_ > 0.0 && u01(rng) < dropout_) ? 0.0 : keep_scale;
    masks.push_back(std::move(m));
  }
  return masks;
}

namespace {

struct ForwardCache {
  std::vector<Eigen::MatrixXd> pre;   // z_l
  std::vector<Eigen::MatrixXd> act;   // a_l after ReLU and dropout; act[0] is the input
  Eigen::MatrixXd logits;             // C x B
  Eigen::RowVectorXd alpha;           // 1 x B
};

ForwardCache forward(const MlpParameters& p, const Eigen::MatrixXd& inputs,
                     const DropoutMasks* masks) {
  ForwardCache c;
  c.act.push_back(inputs);
  for (std::size_t l = 0; l < p.hidden.size(); ++l) {
    Eigen::MatrixXd z = p.hidden[l].weight * c.act.back();
    z.colwise() += p.hidden[l].bias;
    Eigen::MatrixXd a = z.cwiseMax(0.0);
    if (masks) a = a.cwiseProduct((*masks)[l]);
    c.pre.push_back(std::move(z));
    c.act.push_back(std::move(a));
  }
  c.logits = p.class_head.weight * c.act.back();
  c.logits.colwise() += p.class_head.bias;
  c.alpha = (p.alpha_head.weight * c.act.back()).row(0).array() + p.alpha_head.bias(0);
  return c;
}

Eigen::Vector2d softmax(const Eigen::Vector2d& z) {
  const double m = z.maxCoeff();
  Eigen::Vector2d e = (z.array() - m).exp();
  return e / e.sum();
}

}  // namespace

Prediction UncertaintyModel::predict(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) throw ShapeError("predict: input has wrong dimension");
  const auto c = forward(params_, x, nullptr);
  return {softmax(c.logits.col(0)), c.alpha(0)};
}

Prediction UncertaintyModel::predict(const Eigen::VectorXd& x, Rng& rng) const {
  if (x.size() != input_dim()) throw ShapeError("predict: input has wrong dimension");
  const auto masks = sample_masks(1, rng);
  const auto c = forward(params_, x, &masks);
  return {softmax(c.logits.col(0)), c.alpha(0)};
}

// ---------------------------------------------------------------------------
// Loss and gradient

double batch_loss(const MlpParameters& p, const Eigen::MatrixXd& inputs,
                  std::span<const int> labels, const DropoutMasks* masks, MlpParameters* grad) {
  const Eigen::Index batch = inputs.cols();
  if (batch == 0 || static_cast<Eigen::Index>(labels.size()) != batch)
    throw ShapeError("batch_loss: labels do not match batch");
  if (masks && masks->size() != p.hidden.size()) throw ShapeError("batch_loss: mask count mismatch");

  const ForwardCache c = forward(p, inputs, masks);
  const double max_ce = -std::log(kProbabilityFloor);
  const double inv_b = 1.0 / static_cast<double>(batch);

  Eigen::MatrixXd d_logits(kNumClasses, batch);
  Eigen::RowVectorXd d_alpha(batch);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= kNumClasses) throw ArgumentError("batch_loss: label out of range");
    const Eigen::Vector2d z = c.logits.col(i);
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    double ce = lse - z(y);
    const bool clamped = ce > max_ce;
    if (clamped) ce = max_ce;
    const double a = c.alpha(i);
    const double att = std::exp(-a);
    loss += 0.5 * att * ce + 0.5 * a;
    if (clamped) {
      d_logits.col(i).setZero();
    } else {
      Eigen::Vector2d prob = (z.array() - lse).exp();
      prob(y) -= 1.0;
      d_logits.col(i) = 0.5 * att * inv_b * prob;
    }
    d_alpha(i) = 0.5 * (1.0 - att * ce) * inv_b;
  }
  loss *= inv_b;

  if (grad) {
    *grad = p.zeros_like();
    const Eigen::MatrixXd& last = c.act.back();
    grad->class_head.weight = d_logits * last.transpose();
    grad->class_head.bias = d_logits.rowwise().sum();
    grad->alpha_head.weight = d_alpha * last.transpose();
    grad->alpha_head.bias(0) = d_alpha.sum();
    Eigen::MatrixXd d_act =
        p.class_head.weight.transpose() * d_logits + p.alpha_head.weight.transpose() * d_alpha;
    for (std::size_t l = p.hidden.size(); l-- > 0;) {
      if (masks) d_act = d_act.cwiseProduct((*masks)[l]);
      const Eigen::MatrixXd d_pre =
          d_act.cwiseProduct((c.pre[l].array() > 0.0).cast<double>().matrix());
      grad->hidden[l].weight = d_pre * c.act[l].transpose();
      grad->hidden[l].bias = d_pre.rowwise().sum();
      if (l > 0) d_act = p.hidden[l].weight.transpose() * d_pre;
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Training

UncertaintyModel train(const Eigen::MatrixXd& features, std::span<const int> labels,
                       const MlpConfig& config) {
  const Eigen::Index n = features.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw ShapeError("train: labels do not match feature rows");
  int counts[kNumClasses] = {0, 0};
  for (int y : labels) {
    if (y < 0 || y >= kNumClasses) throw ArgumentError("train: label out of range");
    ++counts[y];
  }
  if (counts[0] == 0 || counts[1] == 0)
    throw ArgumentError("train: both classes need at least one labeled case");
  if (config.epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0.0))
    throw ArgumentError("train: epochs, batch size and learning rate must be positive");
  if (!features.allFinite()) throw ArgumentError("train: non-finite features");

  UncertaintyModel model(static_cast<int>(features.cols()), config.hidden, config.dropout,
                         config.seed);
  Eigen::VectorXd theta = model.parameters().flatten();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(theta.size());
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  Rng rng(derive_seed(config.seed, {0x7a11}));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::MatrixXd inputs = features.transpose();
  MlpParameters grad;
  std::vector<int> batch_labels;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, n - start);
      Eigen::MatrixXd x(inputs.rows(), b);
      batch_labels.resize(static_cast<std::size_t>(b));
      for (Eigen::Index j = 0; j < b; ++j) {
        x.col(j) = inputs.col(order[start + j]);
        batch_labels[j] = labels[order[start + j]];
      }
      const DropoutMasks masks = model.sample_masks(b, rng);
      const double loss = batch_loss(model.parameters(), x, batch_labels, &masks, &grad);
      if (!std::isfinite(loss)) throw TrainingError("training loss diverged", epoch);
      epoch_loss += loss * static_cast<double>(b);

      const Eigen::VectorXd g = grad.flatten();
      beta1_t *= kBeta1;
      beta2_t *= kBeta2;
      m1 = kBeta1 * m1 + (1.0 - kBeta1) * g;
      m2 = kBeta2 * m2 + (1.0 - kBeta2) * g.cwiseAbs2();
      const double step = config.learning_rate * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t);
      theta.array() -= step * m1.array() / (m2.array().sqrt() + kEps);
      model.mutable_parameters().unflatten(theta);
    }
    if (!std::isfinite(epoch_loss) || !theta.allFinite())
      throw TrainingError("training loss diverged", epoch);
  }
  return model;
}

UncertaintyModel train(const Eigen::MatrixXd& features, std::span<const Label> labels,
                       const MlpConfig& config) {
  std::vector<int> classes;
  classes.reserve(labels.size());
  for (Label l : labels) {
    if (!is_labeled(l)) throw ArgumentError("train: unlabeled case in training set");
    classes.push_back(class_index(l));
  }
  return train(features, std::span<const int>(classes), config);
}

// ---------------------------------------------------------------------------
// Checkpoints: line-oriented text, doubles in hexfloat so they round-trip exactly.

namespace {

constexpr std::string_view kMagic = "uvhl-mlp-checkpoint 1";

void write_tensor(std::ostringstream& out, std::string_view name, const Eigen::MatrixXd& t) {
  out << name << ' ' << t.rows() << ' ' << t.cols();
  char buf[40];
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    std::snprintf(buf, sizeof(buf), " %a", t.data()[i]);
    out << buf;
  }
  out << '\n';
}

Eigen::MatrixXd read_tensor(std::istringstream& in, std::string_view name) {
  std::string tag;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  if (!(in >> tag >> rows >> cols) || tag != name || rows < 0 || cols < 0)
    throw ParseError("checkpoint: expected tensor '" + std::string(name) + "'", 0, 0);
  Eigen::MatrixXd t(rows, cols);
  std::string tok;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!(in >> tok)) throw ParseError("checkpoint: truncated tensor '" + std::string(name) + "'", 0, 0);
    char* end = nullptr;
    t.data()[i] = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size())
      throw ParseError("checkpoint: bad number '" + tok + "'", 0, 0);
  }
  return t;
}

}  // namespace

std::string serialize_model(const UncertaintyModel& model) {
  std::ostringstream out;
  char buf[40];
  out << kMagic << '\n';
  out << "input_dim " << model.input_dim() << '\n';
  out << "hidden " << model.hidden_sizes().size();
  for (int h : model.hidden_sizes()) out << ' ' << h;
  out << '\n';
  std::snprintf(buf, sizeof(buf), "%a", model.dropout());
  out << "dropout " << buf << '\n';
  out << "seed " << model.seed() << '\n';
  const auto& p = model.parameters();
  for (std::size_t l = 0; l < p.hidden.size(); ++l) {
    write_tensor(out, "hidden_weight", p.hidden[l].weight);
    write_tensor(out, "hidden_bias", p.hidden[l].bias);
  }
  write_tensor(out, "class_weight", p.class_head.weight);
  write_tensor(out, "class_bias", p.class_head.bias);
  write_tensor(out, "alpha_weight", p.alpha_head.weight);
  write_tensor(out, "alpha_bias", p.alpha_head.bias);
  return out.str();
}

UncertaintyModel deserialize_model(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw SchemaError("not a model checkpoint");
  std::string key;
  int input_dim = 0;
  std::size_t n_hidden = 0;
  if (!(in >> key >> input_dim) || key != "input_dim") throw SchemaError("checkpoint: missing input_dim");
  if (!(in >> key >> n_hidden) || key != "hidden") throw SchemaError("checkpoint: missing hidden");
  std::vector<int> hidden(n_hidden);
  for (auto& h : hidden)
    if (!(in >> h)) throw SchemaError("checkpoint: truncated hidden sizes");
  std::string dropout_tok;
  if (!(in >> key >> dropout_tok) || key != "dropout") throw SchemaError("checkpoint: missing dropout");
  const double dropout = std::strtod(dropout_tok.c_str(), nullptr);
  std::uint64_t seed = 0;
  if (!(in >> key >> seed) || key != "seed") throw SchemaError("checkpoint: missing seed");

  MlpParameters p;
  int prev = input_dim;
  for (int h : hidden) {
    DenseLayer l{read_tensor(in, "hidden_weight"), read_tensor(in, "hidden_bias")};
    if (l.weight.rows() != h || l.weight.cols() != prev || l.bias.size() != h)
      throw SchemaError("checkpoint: hidden layer shape mismatch");
    p.hidden.push_back(std::move(l));
    prev = h;
  }
  p.class_head = {read_tensor(in, "class_weight"), read_tensor(in, "class_bias")};
  p.alpha_head = {read_tensor(in, "alpha_weight"), read_tensor(in, "alpha_bias")};
  if (p.class_head.weight.cols() != prev || p.alpha_head.weight.cols() != prev)
    throw SchemaError("checkpoint: head shape mismatch");
  return UncertaintyModel(std::move(p), dropout, seed);
}

void save_model(const UncertaintyModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize_model(model);
}

UncertaintyModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace uvhl
