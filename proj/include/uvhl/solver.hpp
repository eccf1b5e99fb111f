#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uvhl/data.hpp"

namespace uvhl {

/// Largest accepted condition estimate for the closed-form system matrix.
inline constexpr double kMaxConditionEstimate = 1e12;

struct LabelMatrix {
  Eigen::MatrixXd initial;  // Y: one-hot rows for labeled vertices, zero rows otherwise
  Eigen::MatrixXd solved;   // F
  double lambda_r = 1.0;
};

/// Y with one column per class; unlabeled vertices get all-zero rows.
Eigen::MatrixXd initial_labels(std::span<const Label> labels);

/// tr(Fᵀ(U − UΘU)F) + λ·tr(FᵀU²F + YᵀU²Y − 2FᵀU²Y), with U = diag(u).
double objective(const Eigen::MatrixXd& F, const Eigen::MatrixXd& theta, const Eigen::VectorXd& u,
                 const Eigen::MatrixXd& Y, double lambda_r);

/// ∂objective/∂F = 2(U − UΘU + λU²)F − 2λU²Y.
Eigen::MatrixXd objective_gradient(const Eigen::MatrixXd& F, const Eigen::MatrixXd& theta,
                                   const Eigen::VectorXd& u, const Eigen::MatrixXd& Y,
                                   double lambda_r);

/// U − UΘU + λU².
Eigen::MatrixXd system_matrix(const Eigen::MatrixXd& theta, const Eigen::VectorXd& u, double lambda_r);

/// F = λ (U − UΘU + λU²)⁻¹ U² Y via a Cholesky solve. Throws SingularityError
/// when the factorization fails or the condition estimate exceeds
/// kMaxConditionEstimate.
Eigen::MatrixXd solve_closed_form(const Eigen::MatrixXd& theta, const Eigen::VectorXd& u,
                                  const Eigen::MatrixXd& Y, double lambda_r);

struct IterativeResult {
  Eigen::MatrixXd F;
  int iterations = 0;
  std::vector<double> objective_trace;  // objective after each accepted step, starting at F = 0
};

/// Minimizes the objective from F = 0 by nonlinear conjugate gradients with an
/// Armijo backtracking line search, using only objective and gradient
/// evaluations. Converged when ‖∇‖∞ ≤ tol · max(1, ‖2λU²Y‖∞). Throws
/// ConvergenceError with the final gradient norm after `max_iter` steps.
IterativeResult solve_iterative(const Eigen::MatrixXd& theta, const Eigen::VectorXd& u,
                                const Eigen::MatrixXd& Y, double lambda_r, double tol, int max_iter);

enum class TieBreak { kClass0, kClass1 };

/// Row-wise argmax of F for the given vertices.
std::vector<Label> predict_labels(const Eigen::MatrixXd& F, std::span<const Eigen::Index> rows,
                                  TieBreak tie_break = TieBreak::kClass0);

/// `id,score0,score1,prediction` for every row of F.
void write_label_scores_csv(std::span<const std::string> ids, const Eigen::MatrixXd& F,
                            const std::filesystem::path& path, TieBreak tie_break = TieBreak::kClass0);

}  // namespace uvhl
