#pragma once

// Polynomial-augmented kernel interpolation
//
//   s(x) = p(x) + sum_j c_j h(x - x_j),   p in P_{m-1},
//   s(x_i) = y_i,   sum_j c_j q(x_j) = 0 for all q in P_{m-1},
//
// plus finite kernel expansions with computable native (semi-)norms.
//
// The saddle-point system [[A, P], [P^T, 0]] [c; b] = [y; 0] is solved in the
// null space of P^T: with P = [Q1 Q2] [R; 0], c = Q2 w where
// (Q2^T A Q2) w = Q2^T y, and R b = Q1^T (y - A c). Q2^T A Q2 is positive
// definite for a strictly conditionally positive definite kernel, so a
// Cholesky failure means the kernel normalization or the data are wrong.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "rbfx/error.hpp"
#include "rbfx/geometry.hpp"
#include "rbfx/kernels.hpp"
#include "rbfx/polybasis.hpp"
#include "rbfx/scalar.hpp"

namespace rbfx {

/// f(x) = p(x) + sum_j a_j h(x - z_j).
template <class Scalar>
class KernelExpansion {
public:
  KernelExpansion(const Kernel& kernel, Matrix<Scalar> centers, Vector<Scalar> weights, Vector<Scalar> polypart)
      : evaluator_(kernel), basis_(kernel.dim(), kernel.cpd_order()), centers_(std::move(centers)),
        weights_(std::move(weights)), polypart_(std::move(polypart)) {
    if (centers_.cols() != kernel.dim() && centers_.rows() > 0) {
      throw Error(ErrorCode::DimensionMismatch, "centers do not match kernel dimension");
    }
    if (weights_.size() != centers_.rows()) throw Error(ErrorCode::DimensionMismatch, "one weight per center");
    if (polypart_.size() == 0) polypart_ = Vector<Scalar>::Zero(basis_.size());
    if (polypart_.size() != basis_.size()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "polynomial part needs " + std::to_string(basis_.size()) + " coefficients");
    }
  }

  KernelExpansion(const Kernel& kernel, const PointSet& centers, Vector<Scalar> weights, Vector<Scalar> polypart = {})
      : KernelExpansion(kernel, centers.matrix().cast<Scalar>(), std::move(weights), std::move(polypart)) {}

  const Kernel& kernel() const { return evaluator_.kernel(); }
  const KernelEvaluator<Scalar>& evaluator() const { return evaluator_; }
  const MonomialBasis& basis() const { return basis_; }
  const Matrix<Scalar>& centers() const { return centers_; }
  const Vector<Scalar>& weights() const { return weights_; }
  const Vector<Scalar>& polypart() const { return polypart_; }
  int size() const { return static_cast<int>(centers_.rows()); }

  Scalar evaluate(const Eigen::Ref<const Vector<Scalar>>& x) const {
    check_point(x);
    Scalar sum = basis_.empty() ? Scalar(0) : Scalar(basis_.evaluate<Scalar>(x).dot(polypart_));
    Vector<Scalar> diff(x.size());
    for (int j = 0; j < size(); ++j) {
      diff = x - centers_.row(j).transpose();
      sum += weights_[j] * evaluator_.eval(diff);
    }
    return sum;
  }

  /// D^alpha p + sum_j a_j (D^alpha h)(x - z_j).
  Scalar evaluate_derivative(const MultiIndex& alpha, const Eigen::Ref<const Vector<Scalar>>& x) const {
    check_point(x);
    kernel().check_order(alpha);
    Scalar sum = basis_.empty() ? Scalar(0) : Scalar(basis_.evaluate_derivative<Scalar>(alpha, x).dot(polypart_));
    const TermList& terms = derivative_terms(alpha);
    Vector<Scalar> diff(x.size());
    for (int j = 0; j < size(); ++j) {
      diff = x - centers_.row(j).transpose();
      sum += weights_[j] * evaluator_.eval_terms(terms, diff);
    }
    return sum;
  }

  /// ||P^T a||_2 over the centers.
  Scalar moment_residual() const {
    if (basis_.empty() || size() == 0) return Scalar(0);
    return (basis_matrix<Scalar>(basis_, centers_).transpose() * weights_).norm();
  }

private:
  void check_point(const Eigen::Ref<const Vector<Scalar>>& x) const {
    if (x.size() != kernel().dim()) throw Error(ErrorCode::DimensionMismatch, "evaluation point dimension");
  }

  KernelEvaluator<Scalar> evaluator_;
  MonomialBasis basis_;
  Matrix<Scalar> centers_;
  Vector<Scalar> weights_;
  Vector<Scalar> polypart_;
};

/// A_ij = h(z_i - z_j).
template <class Scalar>
Matrix<Scalar> gram_matrix(const KernelEvaluator<Scalar>& h, const Matrix<Scalar>& centers) {
  const Eigen::Index n = centers.rows();
  Matrix<Scalar> A(n, n);
  Vector<Scalar> diff(centers.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      diff = (centers.row(i) - centers.row(j)).transpose();
      A(i, j) = h.eval(diff);
      A(j, i) = A(i, j);
    }
  }
  return A;
}

/// 1-norm condition number of a Cholesky-factorized matrix B. Exact (via
/// B^{-1}) up to 400 rows; above that, Hager's estimate of ||B^{-1}||_1 with
/// Higham's alternating test vector as a safeguard against underestimation.
template <class Scalar>
double condition_1norm(const Matrix<Scalar>& B, const Eigen::LLT<Matrix<Scalar>>& llt) {
  const Eigen::Index n = B.rows();
  if (n == 0) return 1.0;
  const Scalar norm_b = B.cwiseAbs().colwise().sum().maxCoeff();
  if (n <= 400) {
    const Matrix<Scalar> inverse = llt.solve(Matrix<Scalar>::Identity(n, n));
    return to_double(norm_b * inverse.cwiseAbs().colwise().sum().maxCoeff());
  }
  Vector<Scalar> x = Vector<Scalar>::Constant(n, Scalar(1) / Scalar(n));
  Scalar estimate(0);
  Eigen::Index previous = -1;
  for (int iter = 0; iter < 5; ++iter) {
    const Vector<Scalar> y = llt.solve(x);
    estimate = std::max(estimate, Scalar(y.cwiseAbs().sum()));
    Vector<Scalar> sign(n);
    for (Eigen::Index i = 0; i < n; ++i) sign[i] = y[i] >= 0 ? Scalar(1) : Scalar(-1);
    const Vector<Scalar> z = llt.solve(sign);
    Eigen::Index j = 0;
    const Scalar zmax = z.cwiseAbs().maxCoeff(&j);
    if (zmax <= z.dot(x) || j == previous) break;
    x.setZero();
    x[j] = Scalar(1);
    previous = j;
  }
  Vector<Scalar> alt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    alt[i] = Scalar(i % 2 == 0 ? 1 : -1) * (Scalar(1) + Scalar(i) / Scalar(n - 1));
  }
  estimate = std::max(estimate, Scalar(2 * llt.solve(alt).cwiseAbs().sum() / Scalar(3 * n)));
  return to_double(norm_b * estimate);
}

struct SolveOptions {
  /// Largest accepted condition estimate of the projected kernel matrix;
  /// zero selects 1 / machine epsilon of the scalar type.
  double max_condition = 0.0;
};

template <class Scalar>
struct InterpolationProblem {
  Kernel kernel;
  PointSet nodes;
  Vector<Scalar> values;

  int cpd_order() const { return kernel.cpd_order(); }
};

/// Solved interpolant. Immutable; safe for concurrent evaluation.
template <class Scalar>
class Interpolant {
public:
  Interpolant(const Kernel& kernel, PointSet nodes, Vector<Scalar> coeffs, Vector<Scalar> polycoeffs,
              double condition_estimate)
      : nodes_(std::move(nodes)),
        expansion_(kernel, nodes_.matrix().cast<Scalar>(), std::move(coeffs), std::move(polycoeffs)),
        condition_(condition_estimate) {}

  const Kernel& kernel() const { return expansion_.kernel(); }
  const PointSet& nodes() const { return nodes_; }
  const Vector<Scalar>& coeffs() const { return expansion_.weights(); }
  const Vector<Scalar>& polycoeffs() const { return expansion_.polypart(); }
  const MonomialBasis& basis() const { return expansion_.basis(); }
  const KernelExpansion<Scalar>& expansion() const { return expansion_; }
  double condition_estimate() const { return condition_; }

  Scalar evaluate(const Eigen::Ref<const Vector<Scalar>>& x) const { return expansion_.evaluate(x); }
  Scalar evaluate_derivative(const MultiIndex& alpha, const Eigen::Ref<const Vector<Scalar>>& x) const {
    return expansion_.evaluate_derivative(alpha, x);
  }

  /// max_i |s(x_i) - y_i|.
  Scalar node_residual(const Vector<Scalar>& values) const {
    Scalar worst(0);
    for (int i = 0; i < nodes_.size(); ++i) {
      using std::abs;
      const Vector<Scalar> x = nodes_.point(i).template cast<Scalar>();
      worst = std::max(worst, Scalar(abs(evaluate(x) - values[i])));
    }
    return worst;
  }

  /// ||P^T c||_2.
  Scalar moment_residual() const { return expansion_.moment_residual(); }

private:
  PointSet nodes_;
  KernelExpansion<Scalar> expansion_;
  double condition_;
};

template <class Scalar>
Interpolant<Scalar> solve(const Kernel& kernel, const PointSet& nodes, const Vector<Scalar>& values,
                          const SolveOptions& options = {}) {
  const int n_nodes = nodes.size();
  if (n_nodes == 0) throw Error(ErrorCode::EmptyPointSet, "no interpolation nodes");
  if (nodes.dim() != kernel.dim()) throw Error(ErrorCode::DimensionMismatch, "nodes vs kernel dimension");
  if (values.size() != n_nodes) throw Error(ErrorCode::DimensionMismatch, "one data value per node");
  const int m = kernel.cpd_order();
  if (m >= 1 && !is_determining_set(nodes, m)) {
    throw Error(ErrorCode::NotDeterminingSet, "nodes do not determine P_" + std::to_string(m - 1));
  }

  const KernelEvaluator<Scalar> h(kernel);
  const Matrix<Scalar> X = nodes.matrix().cast<Scalar>();
  const Matrix<Scalar> A = gram_matrix(h, X);
  const MonomialBasis basis(kernel.dim(), m);
  const int q = basis.size();

  Matrix<Scalar> Q1(n_nodes, 0), Q2 = Matrix<Scalar>::Identity(n_nodes, n_nodes), R(0, 0);
  if (q > 0) {
    const Matrix<Scalar> P = basis_matrix<Scalar>(basis, X);
    Eigen::HouseholderQR<Matrix<Scalar>> qr(P);
    const Matrix<Scalar> Qfull = qr.householderQ() * Matrix<Scalar>::Identity(n_nodes, n_nodes);
    Q1 = Qfull.leftCols(q);
    Q2 = Qfull.rightCols(n_nodes - q);
    R = qr.matrixQR().topRows(q).template triangularView<Eigen::Upper>();
  }

  Vector<Scalar> c = Vector<Scalar>::Zero(n_nodes);
  double condition = 1.0;
  if (n_nodes > q) {
    const Matrix<Scalar> B = Q2.transpose() * A * Q2;
    Eigen::LLT<Matrix<Scalar>> llt(B);
    if (llt.info() != Eigen::Success) {
      throw SingularSystemError("projected kernel matrix is not numerically positive definite",
                                std::numeric_limits<double>::infinity());
    }
    condition = condition_1norm(B, llt);
    const double limit = options.max_condition > 0.0 ? options.max_condition
                                                     : 1.0 / to_double(machine_epsilon<Scalar>());
    if (!(condition <= limit)) {
      throw SingularSystemError("condition estimate exceeds limit", condition);
    }
    c = Q2 * llt.solve(Q2.transpose() * values);
  }
  Vector<Scalar> b(q);
  if (q > 0) {
    const Vector<Scalar> r = values - A * c;
    b = R.template triangularView<Eigen::Upper>().solve(Q1.transpose() * r);
  }
  return Interpolant<Scalar>(kernel, nodes, std::move(c), std::move(b), condition);
}

template <class Scalar>
Interpolant<Scalar> solve(const InterpolationProblem<Scalar>& problem, const SolveOptions& options = {}) {
  return solve<Scalar>(problem.kernel, problem.nodes, problem.values, options);
}

struct NativeNormOptions {
  /// Accepted ||P^T a|| relative to ||a||.
  double moment_tolerance = 1e-8;
  /// Accepted negative quadratic form relative to ||a||^2.
  double negative_tolerance = 1e-10;
};

/// sqrt(a^T A_Z a). The polynomial part lies in the kernel of the semi-norm.
template <class Scalar>
Scalar native_norm(const KernelExpansion<Scalar>& f, const NativeNormOptions& options = {}) {
  using std::sqrt;
  const Scalar a_norm = f.weights().norm();
  if (f.moment_residual() > Scalar(options.moment_tolerance) * a_norm) {
    throw Error(ErrorCode::MomentViolation, "weights are not orthogonal to P_{m-1} on the centers");
  }
  if (f.size() == 0) return Scalar(0);
  const Matrix<Scalar> A = gram_matrix(f.evaluator(), f.centers());
  const Scalar form = f.weights().dot(A * f.weights());
  if (form < -Scalar(options.negative_tolerance) * a_norm * a_norm) {
    throw Error(ErrorCode::NegativeQuadraticForm, "a^T A a = " + std::to_string(to_double(form)));
  }
  return form > 0 ? sqrt(form) : Scalar(0);
}

/// f - s as one expansion over Z followed by X, with coincident centers
/// merged (weights summed) so self-interpolation cancels exactly.
template <class Scalar>
KernelExpansion<Scalar> residual_expansion(const KernelExpansion<Scalar>& f, const Interpolant<Scalar>& s) {
  if (!(f.kernel() == s.kernel())) throw Error(ErrorCode::KernelMismatch, "approximand and interpolant kernels differ");
  const auto& z = f.centers();
  const Matrix<Scalar> x = s.nodes().matrix().template cast<Scalar>();
  std::vector<Vector<Scalar>> centers;
  std::vector<Scalar> weights;
  std::map<std::vector<double>, std::size_t> index;
  auto add = [&](const Vector<Scalar>& point, const Scalar& w) {
    std::vector<double> key(point.size());
    for (Eigen::Index i = 0; i < point.size(); ++i) key[i] = to_double(point[i]);
    auto [it, inserted] = index.emplace(key, centers.size());
    if (inserted) {
      centers.push_back(point);
      weights.push_back(w);
    } else if (centers[it->second] == point) {
      weights[it->second] += w;
    } else {
      centers.push_back(point);
      weights.push_back(w);
    }
  };
  for (Eigen::Index j = 0; j < z.rows(); ++j) add(z.row(j).transpose(), f.weights()[j]);
  for (Eigen::Index j = 0; j < x.rows(); ++j) add(x.row(j).transpose(), -s.coeffs()[j]);

  Matrix<Scalar> merged(centers.size(), f.kernel().dim());
  Vector<Scalar> w(weights.size());
  for (std::size_t j = 0; j < centers.size(); ++j) {
    merged.row(j) = centers[j].transpose();
    w[j] = weights[j];
  }
  return KernelExpansion<Scalar>(f.kernel(), std::move(merged), std::move(w), f.polypart() - s.polycoeffs());
}

} // namespace rbfx
