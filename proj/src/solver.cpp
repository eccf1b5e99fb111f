#include "uvhl/solver.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "uvhl/error.hpp"

namespace uvhl {

namespace {

void check_shapes(const Eigen::MatrixXd& theta, const Eigen::VectorXd& u, const Eigen::MatrixXd& Y,
                  const char* op) {
  const Eigen::Index n = u.size();
  if (theta.rows() != n || theta.cols() != n || Y.rows() != n)
    throw ShapeError(std::string(op) + ": theta must be n x n and Y must have n rows (n = " +
                     std::to_string(n) + ")");
}

void check_lambda(double lambda_r, const char* op) {
  if (!(lambda_r > 0.0) || !std::isfinite(lambda_r))
    throw ArgumentError(std::string(op) + ": lambda_r must be positive and finite");
}

}  // namespace

Eigen::MatrixXd initial_labels(std::span<const Label> labels) {
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), kNumClasses);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (is_labeled(labels[i])) Y(static_cast<Eigen::Index>(i), class_index(labels[i])) = 1.0;
  return Y;
}

Eigen::MatrixXd system_matrix(const Eigen::MatrixXd& theta, const Eigen::VectorXd& u, double lambda_r) {
  Eigen::MatrixXd M = -(u.asDiagonal() * theta * u.asDiagonal());
  M.diagonal() += u + lambda_r * u.cwiseAbs2();
  return M;
}

double objective(const Eigen::MatrixXd& F, const Eigen::MatrixXd& theta, const Eigen::VectorXd& u,
                 const Eigen::MatrixXd& Y, double lambda_r) {
  check_shapes(theta, u, Y, "objective");
  if (F.rows() != Y.rows() || F.cols() != Y.cols()) throw ShapeError("objective: F and Y differ in shape");
  const Eigen::MatrixXd UF = u.asDiagonal() * F;
  const Eigen::MatrixXd UY = u.asDiagonal() * Y;
  const double smooth = (F.transpose() * u.asDiagonal() * F).trace() - (UF.transpose() * theta * UF).trace();
  const double empirical = (UF.transpose() * UF).trace() + (UY.transpose() * UY).trace() -
                           2.0 * (UF.transpose() * UY).trace();
  return smooth + lambda_r * empirical;
}

Eigen::MatrixXd objective_gradient(const Eigen::MatrixXd& F, const Eigen::MatrixXd& theta,
                                   const Eigen::VectorXd& u, const Eigen::MatrixXd& Y,
                                   double lambda_r) {
  check_shapes(theta, u, Y, "objective_gradient");
  if (F.rows() != Y.rows() || F.cols() != Y.cols())
    throw ShapeError("objective_gradient: F and Y differ in shape");
  const Eigen::VectorXd u2 = u.cwiseAbs2();
  Eigen::MatrixXd g = u.asDiagonal() * F;
  g -= u.asDiagonal() * (theta * (u.asDiagonal() * F));
  g += lambda_r * (u2.asDiagonal() * (F - Y));
  return 2.0 * g;
}

Eigen::MatrixXd solve_closed_form(const Eigen::MatrixXd& theta, const Eigen::VectorXd& u,
                                  const Eigen::MatrixXd& Y, double lambda_r) {
  check_shapes(theta, u, Y, "solve_closed_form");
  check_lambda(lambda_r, "solve_closed_form");
  const Eigen::MatrixXd M = system_matrix(theta, u, lambda_r);
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    throw SingularityError("solve_closed_form: system matrix is not positive definite", INFINITY);
  const double rcond = llt.rcond();
  const double cond = rcond > 0.0 ? 1.0 / rcond : INFINITY;
  if (!(cond <= kMaxConditionEstimate)) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "solve_closed_form: system matrix is near-singular (condition estimate %.3e)", cond);
    throw SingularityError(buf, cond);
  }
  return lambda_r * llt.solve(u.cwiseAbs2().asDiagonal() * Y);
}

IterativeResult solve_iterative(const Eigen::MatrixXd& theta, const Eigen::VectorXd& u,
                                const Eigen::MatrixXd& Y, double lambda_r, double tol, int max_iter) {
  check_shapes(theta, u, Y, "solve_iterative");
  check_lambda(lambda_r, "solve_iterative");
  if (!(tol > 0.0)) throw ArgumentError("solve_iterative: tol must be positive");

  auto f = [&](const Eigen::MatrixXd& F) { return objective(F, theta, u, Y, lambda_r); };
  auto grad = [&](const Eigen::MatrixXd& F) { return objective_gradient(F, theta, u, Y, lambda_r); };

  IterativeResult res;
  res.F = Eigen::MatrixXd::Zero(Y.rows(), Y.cols());
  double value = f(res.F);
  res.objective_trace.push_back(value);
  Eigen::MatrixXd g = grad(res.F);
  const double threshold = tol * std::max(1.0, (2.0 * lambda_r * (u.cwiseAbs2().asDiagonal() * Y))
                                                   .cwiseAbs()
                                                   .maxCoeff());
  Eigen::MatrixXd dir = -g;
  constexpr double kArmijo = 1e-4;
  constexpr double kValueSlack = 1e-12;

  for (int it = 0; it < max_iter; ++it) {
    if (g.cwiseAbs().maxCoeff() <= threshold) {
      res.iterations = it;
      return res;
    }
    double slope = (g.array() * dir.array()).sum();
    if (!(slope < 0.0)) {  // restart along steepest descent
      dir = -g;
      slope = -g.squaredNorm();
    }
    // Trial step from the curvature along `dir`, probed with one extra
    // gradient: (∇f(F + d) − ∇f(F))·d = 2·dᵀMd for this quadratic.
    const double curvature = ((grad(res.F + dir) - g).array() * dir.array()).sum();
    double step = curvature > 0.0 ? -slope / curvature : 1.0;
    Eigen::MatrixXd next;
    Eigen::MatrixXd g_next;
    double next_value = 0.0;
    bool accepted = false;
    for (int backtracks = 0; backtracks <= 60; ++backtracks, step *= 0.5) {
      next = res.F + step * dir;
      next_value = f(next);
      g_next = grad(next);
      if (next_value <= value + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      // Close to the minimum the value test drowns in rounding; fall back to
      // the approximate Armijo condition on the directional derivative.
      const double next_slope = (g_next.array() * dir.array()).sum();
      if (next_value <= value + kValueSlack * std::abs(value) && next_slope <= (2.0 * kArmijo - 1.0) * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    // Polak-Ribière with automatic restart (β clipped at zero).
    const double beta =
        std::max(0.0, ((g_next - g).array() * g_next.array()).sum() / std::max(g.squaredNorm(), 1e-300));
    dir = -g_next + beta * dir;
    res.F = std::move(next);
    g = g_next;
    value = next_value;
    res.objective_trace.push_back(value);
    res.iterations = it + 1;
  }
  const double gap = g.cwiseAbs().maxCoeff();
  if (gap <= threshold) return res;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "solve_iterative: no convergence after %d iterations (gradient %.3e)",
                res.iterations, gap);
  throw ConvergenceError(buf, gap);
}

std::vector<Label> predict_labels(const Eigen::MatrixXd& F, std::span<const Eigen::Index> rows,
                                  TieBreak tie_break) {
  if (F.cols() != kNumClasses) throw ShapeError("predict_labels: F must have two columns");
  std::vector<Label> out;
  out.reserve(rows.size());
  for (Eigen::Index r : rows) {
    if (r < 0 || r >= F.rows()) throw ArgumentError("predict_labels: row index out of range");
    const double a = F(r, 0);
    const double b = F(r, 1);
    if (a > b) {
      out.push_back(Label::kCovid);
    } else if (b > a) {
      out.push_back(Label::kCap);
    } else {
      out.push_back(tie_break == TieBreak::kClass0 ? Label::kCovid : Label::kCap);
    }
  }
  return out;
}

void write_label_scores_csv(std::span<const std::string> ids, const Eigen::MatrixXd& F,
                            const std::filesystem::path& path, TieBreak tie_break) {
  if (static_cast<Eigen::Index>(ids.size()) != F.rows()) throw ShapeError("write_label_scores_csv: id count mismatch");
  std::vector<Eigen::Index> rows(ids.size());
  std::iota(rows.begin(), rows.end(), 0);
  const auto pred = predict_labels(F, rows, tie_break);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,score0,score1,prediction\n";
  char buf[96];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", F(static_cast<Eigen::Index>(i), 0),
                  F(static_cast<Eigen::Index>(i), 1));
    out << ids[i] << ',' << buf << ',' << label_name(pred[i]) << '\n';
  }
}

}  // namespace uvhl
