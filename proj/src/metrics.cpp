#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "uvhl/error.hpp"
#include "uvhl/eval.hpp"

namespace uvhl {

ConfusionMatrix confusion(std::span<const Label> predicted, std::span<const Label> truth) {
  if (predicted.size() != truth.size())
    throw ArgumentError("confusion: " + std::to_string(predicted.size()) + " predictions for " +
                        std::to_string(truth.size()) + " labels");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!is_labeled(truth[i]) || !is_labeled(predicted[i]))
      throw ArgumentError("confusion: unlabeled entry at position " + std::to_string(i));
    const bool actual_pos = truth[i] == Label::kCovid;
    const bool pred_pos = predicted[i] == Label::kCovid;
    if (actual_pos) {
      ++(pred_pos ? cm.tp : cm.fn);
    } else {
      ++(pred_pos ? cm.fp : cm.tn);
    }
  }
  return cm;
}

namespace {

std::optional<double> ratio(long num, long den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Metrics metrics(const ConfusionMatrix& cm) {
  Metrics m;
  m.values[0] = ratio(cm.tp + cm.tn, cm.total());
  m.values[1] = ratio(cm.tp, cm.tp + cm.fn);
  m.values[2] = ratio(cm.tn, cm.tn + cm.fp);
  if (m.values[1] && m.values[2]) m.values[3] = (*m.values[1] + *m.values[2]) / 2.0;
  m.values[4] = ratio(cm.tp, cm.tp + cm.fp);
  m.values[5] = ratio(cm.tn, cm.tn + cm.fn);
  return m;
}

double welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ArgumentError("welch_t_test: each sample needs at least 2 values");
  auto moments = [](std::span<const double> x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / static_cast<double>(x.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double se_a = va / static_cast<double>(a.size());
  const double se_b = vb / static_cast<double>(b.size());
  const double se2 = se_a + se_b;
  if (se2 == 0.0) return ma == mb ? 1.0 : 0.0;
  const double t = std::abs(ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 / (se_a * se_a / static_cast<double>(a.size() - 1) +
                                 se_b * se_b / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(df);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
  return std::min(1.0, std::max(0.0, p));
}

}  // namespace uvhl
