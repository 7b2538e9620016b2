#include "relu_regions/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace relu_regions {

namespace {

// Below this, the NNLS residual 1 - h^T u is treated as zero: the least-distance
// problem has no feasible point. In scaled units the solution norm would be
// about 1/sqrt(threshold). The round-off in rho grows with |u|_1, so the
// effective threshold is the larger of this and a multiple of eps |u|_1.
constexpr double kInfeasibleRho = 1e-13;
constexpr double kRhoNoise = 1e3 * std::numeric_limits<double>::epsilon();

struct NnlsResult {
  Vector u;
  int iterations = 0;
  bool converged = false;
};

// Lawson-Hanson active set method for min |E u - f| subject to u >= 0.
NnlsResult nnls(const Matrix& E, const Vector& f, int max_iterations) {
  const Eigen::Index n = E.cols();
  NnlsResult result;
  result.u = Vector::Zero(n);
  Vector& u = result.u;
  std::vector<char> passive(static_cast<std::size_t>(n), 0);

  const double scale = std::max<double>(1.0, E.cwiseAbs().colwise().sum().maxCoeff());
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * scale *
                     static_cast<double>(std::max(E.rows(), n));

  std::vector<Eigen::Index> active;
  Vector w = E.transpose() * f;
  while (true) {
    Eigen::Index entering = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[j] && w(j) > best) {
        best = w(j);
        entering = j;
      }
    }
    if (entering < 0) break;
    passive[entering] = 1;

    bool first_inner = true;
    while (true) {
      if (++result.iterations > max_iterations) return result;

      active.clear();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j]) active.push_back(j);
      }
      Matrix Ep(E.rows(), static_cast<Eigen::Index>(active.size()));
      for (std::size_t k = 0; k < active.size(); ++k) Ep.col(static_cast<Eigen::Index>(k)) = E.col(active[k]);
      const Vector zp = Ep.colPivHouseholderQr().solve(f);

      if ((zp.array() > 0.0).all()) {
        u.setZero();
        for (std::size_t k = 0; k < active.size(); ++k) u(active[k]) = zp(static_cast<Eigen::Index>(k));
        break;
      }

      // A column whose own coefficient is non-positive on entry is numerically
      // dependent on the current passive set; drop it and pick again.
      if (first_inner) {
        const auto pos = std::find(active.begin(), active.end(), entering) - active.begin();
        if (zp(pos) <= 0.0) {
          passive[entering] = 0;
          w(entering) = 0.0;
          break;
        }
      }
      first_inner = false;

      double alpha = 1.0;
      for (std::size_t k = 0; k < active.size(); ++k) {
        const double z = zp(static_cast<Eigen::Index>(k));
        if (z <= 0.0) {
          const double uj = u(active[k]);
          alpha = std::min(alpha, uj / (uj - z));
        }
      }
      for (std::size_t k = 0; k < active.size(); ++k) {
        const Eigen::Index j = active[k];
        u(j) += alpha * (zp(static_cast<Eigen::Index>(k)) - u(j));
        if (u(j) <= tol) {
          u(j) = 0.0;
          passive[j] = 0;
        }
      }
    }
    if (!passive[entering] && w(entering) == 0.0) continue;
    const Vector residual = f - E * u;
    // f lies in the cone of the columns: nothing left to improve.
    if (residual.norm() <= tol) break;
    w = E.transpose() * residual;
  }
  result.converged = true;
  return result;
}

double violation_ratio(const KktReport& r, const KktTolerances& tol) {
  return std::max({r.dual_violation / tol.dual, r.stationarity / tol.stationarity,
                   r.primal_violation / tol.primal, r.complementarity / tol.complementarity});
}

double max_residual(const KktReport& r) {
  return std::max({r.dual_violation, r.stationarity, r.primal_violation, r.complementarity});
}

QpSolution infeasible_with(const Polytope& P, Vector y, int iterations) {
  QpSolution sol;
  sol.status = QpStatus::infeasible;
  sol.iterations = iterations;
  sol.kkt_residual = y.size() > 0 ? (P.A().transpose() * y).cwiseAbs().maxCoeff() : 0.0;
  sol.certificate = std::move(y);
  return sol;
}

}  // namespace

QpSolution solve_min_norm(const Polytope& constraints, const QpOptions& options) {
  const Matrix& A = constraints.A();
  const Vector& b = constraints.b();
  const Eigen::Index m = A.rows();
  const Eigen::Index d = A.cols();
  if (d < 1) throw DimensionError("min-norm QP: dimension must be at least 1");
  if (!A.allFinite() || !b.allFinite()) throw std::invalid_argument("min-norm QP: non-finite data");

  QpSolution sol;
  sol.status = QpStatus::optimal;
  sol.delta = Vector::Zero(d);
  sol.multipliers = Vector::Zero(m);
  if (m == 0) return sol;

  // Normalize rows; all-zero rows are either vacuous or a certificate on their own.
  std::vector<Eigen::Index> kept;
  Vector norms(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    norms(i) = A.row(i).norm();
    if (norms(i) > 0.0) {
      kept.push_back(i);
    } else if (b(i) < 0.0) {
      Vector y = Vector::Zero(m);
      y(i) = -1.0 / b(i);
      return infeasible_with(constraints, std::move(y), 0);
    }
  }
  const auto k = static_cast<Eigen::Index>(kept.size());
  Matrix G(k, d);
  Vector h(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const Eigen::Index i = kept[static_cast<std::size_t>(r)];
    G.row(r) = A.row(i) / norms(i);
    h(r) = -b(i) / norms(i);
  }
  const double scale = k > 0 ? h.maxCoeff() : 0.0;
  if (scale <= 0.0) return sol;  // the origin is feasible
  h /= scale;

  // Least-distance program G x >= h  <=>  NNLS on E = [G^T; h^T], f = e_{d+1}.
  Matrix E(d + 1, k);
  E.topRows(d) = G.transpose();
  E.row(d) = h.transpose();
  Vector f = Vector::Zero(d + 1);
  f(d) = 1.0;

  const int cap = options.max_iterations > 0 ? options.max_iterations
                                             : static_cast<int>(50 * (m + d));
  NnlsResult nn = nnls(E, f, cap);
  if (!nn.converged) {
    throw IterationLimitError(cap, (E * nn.u - f).norm());
  }
  sol.iterations = nn.iterations;

  const Vector top = G.transpose() * nn.u;
  const double rho = 1.0 - h.dot(nn.u);
  auto certificate = [&] {
    Vector y = Vector::Zero(m);
    const double hu = h.dot(nn.u);
    for (Eigen::Index r = 0; r < k; ++r) {
      const Eigen::Index i = kept[static_cast<std::size_t>(r)];
      y(i) = nn.u(r) / (norms(i) * scale * hu);
    }
    return y;
  };
  if (rho <= std::max(kInfeasibleRho, kRhoNoise * nn.u.lpNorm<1>())) {
    return infeasible_with(constraints, certificate(), nn.iterations);
  }

  sol.delta = (scale / rho) * top;
  // Near the threshold, trust whichever of the two readings verifies.
  const double worst = (A * sol.delta + b).minCoeff();
  if (worst < -1e-6 * (1.0 + sol.delta.cwiseAbs().maxCoeff())) {
    Vector y = certificate();
    if (check_infeasibility_certificate(constraints, y)) {
      return infeasible_with(constraints, std::move(y), nn.iterations);
    }
  }
  for (Eigen::Index r = 0; r < k; ++r) {
    const Eigen::Index i = kept[static_cast<std::size_t>(r)];
    sol.multipliers(i) = scale * nn.u(r) / (rho * norms(i));
  }

  // Refine on the detected active set: delta is the least-norm solution of the
  // active equalities and lambda the matching least-squares multipliers.
  const KktTolerances tol;
  KktReport report = check_kkt(constraints, sol.delta, sol.multipliers, tol);
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (sol.multipliers(i) > 0.0) support.push_back(i);
  }
  if (!support.empty()) {
    const auto p = static_cast<Eigen::Index>(support.size());
    Matrix Ap(p, d);
    Vector bp(p);
    for (Eigen::Index r = 0; r < p; ++r) {
      Ap.row(r) = A.row(support[static_cast<std::size_t>(r)]);
      bp(r) = b(support[static_cast<std::size_t>(r)]);
    }
    const Vector delta = Ap.completeOrthogonalDecomposition().solve(-bp);
    const Vector lp = Ap.transpose().completeOrthogonalDecomposition().solve(delta);
    if ((lp.array() >= 0.0).all()) {
      Vector lambda = Vector::Zero(m);
      for (Eigen::Index r = 0; r < p; ++r) lambda(support[static_cast<std::size_t>(r)]) = lp(r);
      const KktReport refined = check_kkt(constraints, delta, lambda, tol);
      if (violation_ratio(refined, tol) < violation_ratio(report, tol)) {
        sol.delta = delta;
        sol.multipliers = std::move(lambda);
        report = refined;
      }
    }
  }
  sol.kkt_residual = max_residual(report);
  return sol;
}

std::optional<Vector> feasible_point(const Polytope& constraints, const QpOptions& options) {
  QpSolution sol = solve_min_norm(constraints, options);
  if (!sol.optimal()) return std::nullopt;
  return std::move(sol.delta);
}

KktReport check_kkt(const Polytope& constraints, const Eigen::Ref<const Vector>& delta,
                    const Eigen::Ref<const Vector>& multipliers, const KktTolerances& tol) {
  const Matrix& A = constraints.A();
  const Vector& b = constraints.b();
  if (delta.size() != A.cols() || multipliers.size() != A.rows()) {
    throw DimensionError("check_kkt: dimension mismatch");
  }
  KktReport r;
  const Vector slack = A * delta + b;
  const Vector grad = delta - A.transpose() * multipliers;
  const double delta_inf = delta.size() > 0 ? delta.cwiseAbs().maxCoeff() : 0.0;
  r.stationarity = (grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0) / (1.0 + delta_inf);
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    r.dual_violation = std::max(r.dual_violation, -multipliers(i));
    r.primal_violation = std::max(r.primal_violation, -slack(i));
    r.complementarity = std::max(r.complementarity, std::abs(multipliers(i) * slack(i)));
  }
  r.ok = r.dual_violation <= tol.dual && r.stationarity <= tol.stationarity &&
         r.primal_violation <= tol.primal && r.complementarity <= tol.complementarity;
  return r;
}

bool check_infeasibility_certificate(const Polytope& constraints,
                                     const Eigen::Ref<const Vector>& y, double tol) {
  if (y.size() != constraints.rows() || y.size() == 0) return false;
  if ((y.array() < 0.0).any()) return false;
  const double by = constraints.b().dot(y);
  if (!(by < 0.0)) return false;
  const Vector aty = constraints.A().transpose() * (y / -by);
  return aty.cwiseAbs().maxCoeff() <= tol;
}

}  // namespace relu_regions
