#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "uvhl/data.hpp"
#include "uvhl/error.hpp"
#include "uvhl/random.hpp"

namespace uvhl {

int SynthSpec::dim() const {
  int d = 0;
  for (const auto& g : groups) d += g.dims;
  return d;
}

SynthSpec SynthSpec::separated(std::vector<SynthGroup> groups, double separation, int n_per_class,
                               double label_noise, double feature_noise, std::uint64_t seed) {
  SynthSpec spec;
  spec.groups = std::move(groups);
  const int d = spec.dim();
  if (d < 1) throw ArgumentError("synthetic spec needs at least one feature column");
  // Means at +/- separation/2 along the unit all-ones direction.
  const Eigen::VectorXd dir = Eigen::VectorXd::Ones(d) / std::sqrt(static_cast<double>(d));
  spec.covid = {-0.5 * separation * dir, Eigen::MatrixXd::Identity(d, d)};
  spec.cap = {0.5 * separation * dir, Eigen::MatrixXd::Identity(d, d)};
  spec.n_per_class = n_per_class;
  spec.label_noise = label_noise;
  spec.feature_noise = feature_noise;
  spec.seed = seed;
  return spec;
}

std::vector<SynthGroup> default_synth_groups(int regional_dims, int radiomics_dims) {
  std::vector<SynthGroup> out;
  if (regional_dims > 0) out.push_back({"regional", "reg_", regional_dims});
  if (radiomics_dims > 0) out.push_back({"radiomics", "rad_", radiomics_dims});
  return out;
}

namespace {

Eigen::MatrixXd cholesky_factor(const ClusterSpec& c, int d, const char* which) {
  if (c.mean.size() != d || c.covariance.rows() != d || c.covariance.cols() != d)
    throw ShapeError(std::string("synthetic cluster '") + which + "' has wrong dimension");
  if (!c.covariance.isApprox(c.covariance.transpose()))
    throw ArgumentError(std::string("covariance of '") + which + "' is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
  if (llt.info() != Eigen::Success)
    throw ArgumentError(std::string("covariance of '") + which + "' is not positive definite");
  return llt.matrixL();
}

std::vector<std::size_t> pick_exact(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace

SynthResult synth_generate(const SynthSpec& spec) {
  if (spec.n_per_class < 1) throw ArgumentError("n_per_class must be at least 1");
  if (!(spec.label_noise >= 0.0 && spec.label_noise <= 1.0) ||
      !(spec.feature_noise >= 0.0 && spec.feature_noise <= 1.0))
    throw ArgumentError("noise rates must lie in [0, 1]");
  const int d = spec.dim();
  if (d < 1) throw ArgumentError("synthetic spec needs at least one feature column");
  const Eigen::MatrixXd chol[2] = {cholesky_factor(spec.covid, d, "covid"),
                                   cholesky_factor(spec.cap, d, "cap")};
  const Eigen::VectorXd* means[2] = {&spec.covid.mean, &spec.cap.mean};

  const std::size_t per_class = static_cast<std::size_t>(spec.n_per_class);
  const std::size_t n = 2 * per_class;
  const auto n_flip = static_cast<std::size_t>(std::llround(spec.label_noise * spec.n_per_class));
  const auto n_noisy = static_cast<std::size_t>(std::llround(spec.feature_noise * spec.n_per_class));

  SynthResult out;
  out.flipped.assign(n, false);
  out.feature_noise.assign(n, false);
  out.true_labels.resize(n);

  Rng rng(spec.seed);
  for (int c = 0; c < 2; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * per_class;
    for (std::size_t i : pick_exact(per_class, n_flip, rng)) out.flipped[base + i] = true;
    for (std::size_t i : pick_exact(per_class, n_noisy, rng)) out.feature_noise[base + i] = true;
  }

  Dataset& ds = out.dataset;
  ds.features.resize(static_cast<Eigen::Index>(n), d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = i < per_class ? 0 : 1;
    Eigen::VectorXd z(d);
    for (int j = 0; j < d; ++j) z(j) = normal(rng);
    const double scale = out.feature_noise[i] ? spec.feature_noise_scale : 1.0;
    ds.features.row(static_cast<Eigen::Index>(i)) = (*means[c] + scale * (chol[c] * z)).transpose();
    out.true_labels[i] = label_from_class(c);
    ds.labels.push_back(out.flipped[i] ? label_from_class(1 - c) : label_from_class(c));
    char id[32];
    std::snprintf(id, sizeof(id), "s%05zu", i);
    ds.ids.emplace_back(id);
  }

  Eigen::Index next = 0;
  for (const auto& g : spec.groups) {
    ds.groups.push_back({g.name, next, g.dims});
    for (int j = 0; j < g.dims; ++j) ds.columns.push_back(g.prefix + std::to_string(j));
    next += g.dims;
  }
  ds.validate();
  return out;
}

void write_noise_mask(const SynthResult& synth, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,flipped,feature_noise\n";
  for (std::size_t i = 0; i < synth.flipped.size(); ++i)
    out << synth.dataset.ids[i] << ',' << (synth.flipped[i] ? 1 : 0) << ','
        << (synth.feature_noise[i] ? 1 : 0) << '\n';
}

}  // namespace uvhl
