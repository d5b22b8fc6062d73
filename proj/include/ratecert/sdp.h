#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ratecert {

/// One coefficient of a symmetric constraint matrix: A(row,col) = A(col,row) =
/// value, with row <= col.
struct SdpEntry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// sum_j <A_ij, X_j> + sum_v B_iv theta_v = rhs.
struct SdpConstraint {
  std::vector<SdpEntry> entries;
  std::vector<std::pair<int, double>> free;
  double rhs = 0.0;
};

/// Primal standard form with free variables:
///   minimize   sum_j <C_j, X_j> + c_f^T theta
///   subject to sum_j <A_ij, X_j> + (B theta)_i = b_i,  X_j PSD, theta free.
/// The dual is: maximize b^T y s.t. C_j - sum_i y_i A_ij PSD, B^T y = c_f.
struct SdpProblem {
  std::vector<int> block_sizes;
  /// Objective matrices; an empty matrix means zero.
  std::vector<Eigen::MatrixXd> objective;
  std::vector<double> free_objective;
  std::vector<SdpConstraint> constraints;

  int AddBlock(int size);
  int AddFreeVariable(double cost = 0.0);
  int num_blocks() const { return static_cast<int>(block_sizes.size()); }
  int num_free() const { return static_cast<int>(free_objective.size()); }
  int num_constraints() const { return static_cast<int>(constraints.size()); }

  /// Throws std::invalid_argument on malformed data.
  void Validate() const;

  /// Dense symmetric constraint matrix A_ij (for checks and small problems).
  Eigen::MatrixXd ConstraintMatrix(int constraint, int block) const;
};

enum class SdpStatus { kOptimal, kInfeasible, kUnbounded, kNumericalTrouble };
std::string ToString(SdpStatus status);

struct SdpOptions {
  int max_iterations = 200;
  /// Relative primal/dual/gap target.
  double tolerance = 1e-8;
  /// Tolerance on the normalized infeasibility/unboundedness rays.
  double ray_tolerance = 1e-8;
  double step_fraction = 0.95;
  bool verbose = false;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::kNumericalTrouble;
  std::vector<Eigen::MatrixXd> X;
  Eigen::VectorXd free;
  Eigen::VectorXd y;
  std::vector<Eigen::MatrixXd> Z;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  /// |A(X) + B theta - b|_inf, in the problem's own units.
  double primal_residual = 0.0;
  /// |C - Z - A^T y|, |B^T y - c_f| combined (inf norm).
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  /// For kInfeasible: y with A^T y NSD, B^T y = 0, b^T y = 1.
  Eigen::VectorXd dual_ray;
  /// For kUnbounded: X ray with A(X) + B theta = 0, objective -1.
  std::vector<Eigen::MatrixXd> primal_ray;
  Eigen::VectorXd primal_ray_free;
  std::string message;
};

SdpSolution Solve(const SdpProblem& problem, const SdpOptions& options = {});

/// Residuals recomputed from the problem data and the returned point only.
struct KktReport {
  double primal_residual = 0.0;           // |A(X) + B theta - b|_inf
  double relative_primal_residual = 0.0;  // divided by (1 + |b|_inf)
  double dual_equality_residual = 0.0;    // |B^T y - c_f|_inf
  double dual_cone_violation = 0.0;       // max(0, -lambda_min(C - A^T y))
  double min_primal_eigenvalue = 0.0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;           // |pobj - dobj|
  double relative_gap = 0.0;  // divided by (1 + |pobj|)
  bool MeetsContract() const;
};

KktReport CheckKkt(const SdpProblem& problem, const SdpSolution& solution);

/// Residuals of an infeasibility ray: max eigenvalue of A^T y, |B^T y|_inf and
/// b^T y.
struct RayReport {
  double max_eigenvalue = 0.0;
  double free_residual = 0.0;
  double objective = 0.0;
};
RayReport CheckDualRay(const SdpProblem& problem, const Eigen::VectorXd& y);

enum class FeasibilityStatus { kFeasible, kMarginal, kInfeasible, kNumericalTrouble };
std::string ToString(FeasibilityStatus status);

struct FeasibilityOptions {
  SdpOptions sdp;
  /// tau* at or below this counts as feasible.
  double feasible_tau = 1e-7;
  /// tau* at or above this counts as infeasible; in between is marginal.
  double infeasible_tau = 1e-5;
  /// Bound on sum_j trace(X_j); zero selects 1e4 (1 + |b|_inf) times
  /// the total block dimension.
  double trace_bound = 0.0;
};

struct FeasibilityResult {
  FeasibilityStatus status = FeasibilityStatus::kNumericalTrouble;
  double tau = 0.0;
  /// Point in the original variables (X = X_aug - tau I); its objective
  /// fields refer to the original objective.
  SdpSolution solution;
};

/// Decides feasibility of the constraint system by minimizing tau such that
/// X + tau I is PSD. The problem objective is ignored.
FeasibilityResult SolveFeasibility(const SdpProblem& problem, const FeasibilityOptions& options = {});

/// Writes the dual form in SDPA sparse format (free-variable equalities become
/// a diagonal block of paired inequalities).
void WriteSdpa(const SdpProblem& problem, std::ostream& out);

}  // namespace ratecert
