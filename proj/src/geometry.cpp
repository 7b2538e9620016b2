#include "relu_regions/geometry.hpp"

#include <string>

namespace relu_regions {

Polytope::Polytope(int dim) : A_(0, dim), b_(0) {}

Polytope::Polytope(Matrix A, Vector b) : A_(std::move(A)), b_(std::move(b)) {
  if (A_.rows() != b_.size()) {
    throw DimensionError("polytope: A has " + std::to_string(A_.rows()) + " rows but b has " +
                         std::to_string(b_.size()));
  }
}

Vector Polytope::slack(const Eigen::Ref<const Vector>& z) const {
  if (z.size() != dim()) {
    throw DimensionError("polytope: point of dimension " + std::to_string(z.size()) +
                         ", expected " + std::to_string(dim()));
  }
  return A_ * z + b_;
}

bool Polytope::has_trivially_infeasible_row() const {
  for (int i = 0; i < rows(); ++i) {
    if (b_(i) < 0.0 && A_.row(i).isZero(0.0)) return true;
  }
  return false;
}

BoxConstraint::BoxConstraint(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) throw DimensionError("box: bound vectors differ in length");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower(i) <= upper(i))) {
      throw std::invalid_argument("box: lower bound exceeds upper bound at coordinate " +
                                  std::to_string(i));
    }
  }
}

BoxConstraint BoxConstraint::uniform(int dim, double lo, double hi) {
  return BoxConstraint(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
}

bool BoxConstraint::contains(const Eigen::Ref<const Vector>& z) const {
  if (z.size() != lower.size()) throw DimensionError("box: point dimension mismatch");
  return (z.array() >= lower.array()).all() && (z.array() <= upper.array()).all();
}

Vector BoxConstraint::clamp(const Eigen::Ref<const Vector>& z) const {
  return z.cwiseMax(lower).cwiseMin(upper);
}

bool contains(const Polytope& P, const Eigen::Ref<const Vector>& z, double tol) {
  if (tol < 0.0) throw std::invalid_argument("contains: negative tolerance");
  if (P.rows() == 0) {
    if (z.size() != P.dim()) throw DimensionError("contains: point dimension mismatch");
    return true;
  }
  return (P.slack(z).array() >= -tol).all();
}

Polytope intersect(const Polytope& P1, const Polytope& P2) {
  if (P1.dim() != P2.dim()) {
    throw DimensionError("intersect: ambient dimensions " + std::to_string(P1.dim()) + " and " +
                         std::to_string(P2.dim()));
  }
  Matrix A(P1.rows() + P2.rows(), P1.dim());
  Vector b(P1.rows() + P2.rows());
  A << P1.A(), P2.A();
  b << P1.b(), P2.b();
  return Polytope(std::move(A), std::move(b));
}

Polytope box_to_polytope(const BoxConstraint& box) {
  const int d = box.dim();
  Matrix A = Matrix::Zero(2 * d, d);
  Vector b(2 * d);
  for (int i = 0; i < d; ++i) {
    A(i, i) = 1.0;
    b(i) = -box.lower(i);
    A(d + i, i) = -1.0;
    b(d + i) = box.upper(i);
  }
  return Polytope(std::move(A), std::move(b));
}

Polytope shift_to_origin(const Polytope& P, const Eigen::Ref<const Vector>& x) {
  if (x.size() != P.dim()) throw DimensionError("shift: point dimension mismatch");
  return Polytope(P.A(), P.A() * x + P.b());
}

Polytope adversarial_constraints(const AffineMap& out, int current, int target,
                                 const Polytope& Q, const Polytope& C,
                                 const Eigen::Ref<const Vector>& x) {
  const auto d = x.size();
  if (out.V.cols() != d || Q.dim() != d || C.dim() != d) {
    throw DimensionError("adversarial_constraints: dimension mismatch");
  }
  if (current == target) throw std::invalid_argument("adversarial_constraints: target equals current class");
  if (current < 0 || target < 0 || current >= out.V.rows() || target >= out.V.rows()) {
    throw std::out_of_range("adversarial_constraints: class index out of range");
  }

  const int m = 1 + Q.rows() + C.rows();
  Matrix A(m, d);
  Vector b(m);
  A.row(0) = out.V.row(target) - out.V.row(current);
  b(0) = A.row(0).dot(x) + out.a(target) - out.a(current);
  if (Q.rows() > 0) {
    A.middleRows(1, Q.rows()) = Q.A();
    b.segment(1, Q.rows()) = Q.A() * x + Q.b();
  }
  if (C.rows() > 0) {
    A.bottomRows(C.rows()) = C.A();
    b.tail(C.rows()) = C.A() * x + C.b();
  }
  return Polytope(std::move(A), std::move(b));
}

}  // namespace relu_regions
