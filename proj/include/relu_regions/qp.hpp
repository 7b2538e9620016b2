// Minimum-norm point of a polytope:
//
//   minimize 1/2 |delta|^2   subject to   A delta + b >= 0.
//
// Solved as a least-distance program through non-negative least squares
// (Lawson & Hanson, "Solving Least Squares Problems", ch. 23). The NNLS dual
// yields the KKT multipliers when the system is feasible and a Farkas
// certificate when it is not.

#ifndef RELU_REGIONS_QP_HPP
#define RELU_REGIONS_QP_HPP

#include <optional>
#include <stdexcept>
#include <string>

#include "relu_regions/geometry.hpp"

namespace relu_regions {

enum class QpStatus { optimal, infeasible };

struct QpOptions {
  /// 0 selects the default cap of 50 * (rows + dim) NNLS iterations.
  int max_iterations = 0;
};

struct QpSolution {
  QpStatus status = QpStatus::infeasible;
  Vector delta;        // minimizer, when optimal
  Vector multipliers;  // lambda >= 0 with delta = A^T lambda, when optimal
  /// When infeasible: y >= 0 with A^T y = 0 and b^T y = -1.
  Vector certificate;
  /// Largest of the four scaled KKT violations (optimal) or of the
  /// certificate residuals (infeasible).
  double kkt_residual = 0.0;
  int iterations = 0;

  bool optimal() const { return status == QpStatus::optimal; }
};

class IterationLimitError : public std::runtime_error {
 public:
  IterationLimitError(int iterations, double best_residual)
      : std::runtime_error("min-norm QP: iteration limit " + std::to_string(iterations) +
                           " reached (best NNLS residual " + std::to_string(best_residual) + ")"),
        iterations_(iterations),
        best_residual_(best_residual) {}

  int iterations() const { return iterations_; }
  double best_residual() const { return best_residual_; }

 private:
  int iterations_;
  double best_residual_;
};

QpSolution solve_min_norm(const Polytope& constraints, const QpOptions& options = {});

/// Some point with A delta + b >= -1e-8, or nullopt when infeasible.
std::optional<Vector> feasible_point(const Polytope& constraints, const QpOptions& options = {});

// Optimality contract ------------------------------------------------------

struct KktTolerances {
  double dual = 1e-10;             // lambda_i >= -dual
  double stationarity = 1e-8;      // |delta - A^T lambda|_inf <= stationarity * (1 + |delta|_inf)
  double primal = 1e-8;            // A delta + b >= -primal
  double complementarity = 1e-7;   // |lambda_i (A_i delta + b_i)| <= complementarity
};

struct KktReport {
  double dual_violation = 0.0;
  double stationarity = 0.0;  // already divided by (1 + |delta|_inf)
  double primal_violation = 0.0;
  double complementarity = 0.0;
  bool ok = false;
};

/// Evaluates the KKT conditions of a candidate (delta, lambda) directly from
/// the constraint data.
KktReport check_kkt(const Polytope& constraints, const Eigen::Ref<const Vector>& delta,
                    const Eigen::Ref<const Vector>& multipliers, const KktTolerances& tol = {});

/// y >= 0, |A^T y|_inf <= tol and b^T y < 0 after normalizing b^T y to -1.
bool check_infeasibility_certificate(const Polytope& constraints,
                                     const Eigen::Ref<const Vector>& y, double tol = 1e-7);

}  // namespace relu_regions

#endif  // RELU_REGIONS_QP_HPP
