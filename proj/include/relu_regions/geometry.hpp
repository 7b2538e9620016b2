// Polytopes in H-representation and the constraint systems of the per-region
// adversarial problem.

#ifndef RELU_REGIONS_GEOMETRY_HPP
#define RELU_REGIONS_GEOMETRY_HPP

#include <stdexcept>

#include <Eigen/Dense>

namespace relu_regions {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// f(z) = V z + a.
struct AffineMap {
  Matrix V;
  Vector a;

  Vector operator()(const Eigen::Ref<const Vector>& z) const { return V * z + a; }
};

/**
 * { z : A z + b >= 0 }. Every polytope in the library uses this orientation.
 * A polytope with zero rows is the whole space.
 */
class Polytope {
 public:
  explicit Polytope(int dim = 0);
  Polytope(Matrix A, Vector b);

  int dim() const { return static_cast<int>(A_.cols()); }
  int rows() const { return static_cast<int>(A_.rows()); }
  const Matrix& A() const { return A_; }
  const Vector& b() const { return b_; }

  /// Row values A z + b.
  Vector slack(const Eigen::Ref<const Vector>& z) const;

  /// A row 0 . z + b_i >= 0 with b_i < 0 can never hold.
  bool has_trivially_infeasible_row() const;

 private:
  Matrix A_;
  Vector b_;
};

struct BoxConstraint {
  Vector lower;
  Vector upper;

  BoxConstraint() = default;
  BoxConstraint(Vector lo, Vector hi);
  static BoxConstraint uniform(int dim, double lo, double hi);

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Eigen::Ref<const Vector>& z) const;
  Vector clamp(const Eigen::Ref<const Vector>& z) const;
};

bool contains(const Polytope& P, const Eigen::Ref<const Vector>& z, double tol);

/// Row concatenation of P1 over P2.
Polytope intersect(const Polytope& P1, const Polytope& P2);

/// 2d rows: z_i - lower_i >= 0 for all i, then upper_i - z_i >= 0 for all i.
Polytope box_to_polytope(const BoxConstraint& box);

/**
 * The inequality system over delta for "class target beats class current at
 * x + delta, inside Q and C". Row 0 is the decision row, followed by the rows
 * of Q and then C, each shifted by the substitution z = x + delta.
 */
Polytope adversarial_constraints(const AffineMap& out, int current, int target,
                                 const Polytope& Q, const Polytope& C,
                                 const Eigen::Ref<const Vector>& x);

/// Rows of P re-expressed over delta = z - x.
Polytope shift_to_origin(const Polytope& P, const Eigen::Ref<const Vector>& x);

}  // namespace relu_regions

#endif  // RELU_REGIONS_GEOMETRY_HPP
