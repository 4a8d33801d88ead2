#pragma once

// Monomial bases for P_{m-1} in graded-lexicographic order, their evaluation
// matrices, and the determining-set (unisolvency) test.

#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbfx/error.hpp"
#include "rbfx/geometry.hpp"
#include "rbfx/scalar.hpp"

namespace rbfx {

/// Exponent vector / derivative multi-index.
using MultiIndex = std::vector<int>;

inline int order(const MultiIndex& alpha) { return std::accumulate(alpha.begin(), alpha.end(), 0); }

inline std::string to_string(const MultiIndex& alpha) {
  std::string s;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(alpha[i]);
  }
  return s;
}

namespace detail {

inline void append_compositions(int total, int dim, MultiIndex& prefix, std::vector<MultiIndex>& out) {
  if (dim == 1) {
    prefix.push_back(total);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int first = total; first >= 0; --first) {
    prefix.push_back(first);
    append_compositions(total - first, dim - 1, prefix, out);
    prefix.pop_back();
  }
}

template <class Scalar>
Scalar integer_power(const Scalar& x, int p) {
  Scalar r(1);
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

} // namespace detail

/// All exponents with |gamma| <= degree, by total degree and then
/// lexicographically descending (x1^2, x1 x2, x2^2, ...).
inline std::vector<MultiIndex> graded_lex_exponents(int dim, int degree) {
  std::vector<MultiIndex> out;
  MultiIndex prefix;
  for (int t = 0; t <= degree; ++t) detail::append_compositions(t, dim, prefix, out);
  return out;
}

inline long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Sparse multivariate polynomial: exponent -> coefficient.
using Polynomial = std::map<MultiIndex, double>;

template <class Scalar>
Scalar monomial(const MultiIndex& exponent, const Eigen::Ref<const Vector<Scalar>>& x) {
  Scalar v(1);
  for (std::size_t j = 0; j < exponent.size(); ++j) v *= detail::integer_power(x[j], exponent[j]);
  return v;
}

template <class Scalar>
Scalar evaluate(const Polynomial& p, const Eigen::Ref<const Vector<Scalar>>& x) {
  Scalar sum(0);
  for (const auto& [exponent, coeff] : p) sum += Scalar(coeff) * monomial<Scalar>(exponent, x);
  return sum;
}

/// Partial derivative of a polynomial along one axis.
inline Polynomial differentiate(const Polynomial& p, int axis) {
  Polynomial out;
  for (const auto& [exponent, coeff] : p) {
    if (exponent[axis] == 0) continue;
    MultiIndex e = exponent;
    const double factor = e[axis]--;
    out[e] += coeff * factor;
  }
  return out;
}

/// D^alpha x^gamma as (falling-factorial coefficient, reduced exponent);
/// coefficient zero when some alpha_i > gamma_i.
inline std::pair<double, MultiIndex> differentiate_monomial(const MultiIndex& gamma, const MultiIndex& alpha) {
  double coeff = 1.0;
  MultiIndex e = gamma;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    if (alpha[i] > gamma[i]) return {0.0, gamma};
    for (int k = 0; k < alpha[i]; ++k) coeff *= gamma[i] - k;
    e[i] -= alpha[i];
  }
  return {coeff, e};
}

/// Monomial basis of P_{m-1} on R^n; empty when m = 0.
class MonomialBasis {
public:
  MonomialBasis(int dim, int cpd_order) : dim_(dim), degree_(cpd_order - 1) {
    if (dim < 1) throw Error(ErrorCode::InvalidArgument, "basis dimension must be at least 1");
    if (cpd_order < 0) throw Error(ErrorCode::InvalidArgument, "polynomial order must be non-negative");
    exponents_ = graded_lex_exponents(dim, degree_);
  }

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  int cpd_order() const { return degree_ + 1; }
  int size() const { return static_cast<int>(exponents_.size()); }
  bool empty() const { return exponents_.empty(); }
  const std::vector<MultiIndex>& exponents() const { return exponents_; }

  /// Basis order tag used in serialized interpolants.
  static constexpr const char* order_tag() { return "graded-lex"; }

  template <class Scalar>
  Vector<Scalar> evaluate(const Eigen::Ref<const Vector<Scalar>>& x) const {
    Vector<Scalar> v(size());
    for (int k = 0; k < size(); ++k) v[k] = monomial<Scalar>(exponents_[k], x);
    return v;
  }

  /// D^alpha of every basis monomial at x.
  template <class Scalar>
  Vector<Scalar> evaluate_derivative(const MultiIndex& alpha, const Eigen::Ref<const Vector<Scalar>>& x) const {
    Vector<Scalar> v(size());
    for (int k = 0; k < size(); ++k) {
      const auto [coeff, e] = differentiate_monomial(exponents_[k], alpha);
      v[k] = coeff == 0.0 ? Scalar(0) : Scalar(coeff) * monomial<Scalar>(e, x);
    }
    return v;
  }

private:
  int dim_;
  int degree_;
  std::vector<MultiIndex> exponents_;
};

/// N x Q matrix with entry (i, k) = x_i^{gamma_k}.
template <class Scalar>
Matrix<Scalar> basis_matrix(const MonomialBasis& basis, const Matrix<Scalar>& points) {
  if (points.rows() > 0 && points.cols() != basis.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "points do not match basis dimension");
  }
  Matrix<Scalar> P(points.rows(), basis.size());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Vector<Scalar> x = points.row(i).transpose();
    P.row(i) = basis.evaluate<Scalar>(x).transpose();
  }
  return P;
}

inline Eigen::MatrixXd basis_matrix(const MonomialBasis& basis, const PointSet& points) {
  if (points.dim() != basis.dim()) throw Error(ErrorCode::DimensionMismatch, "points do not match basis dimension");
  return basis_matrix<double>(basis, points.matrix());
}

/// Numerical rank with tolerance sigma_max * max(rows, cols) * eps * 16.
template <class Scalar>
int numerical_rank(const Matrix<Scalar>& m) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix<Scalar>> svd(m);
  const auto& sigma = svd.singularValues();
  const Scalar tol = sigma[0] * Scalar(std::max(m.rows(), m.cols())) * machine_epsilon<Scalar>() * 16;
  int rank = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma[i] > tol) ++rank;
  }
  return rank;
}

/// True iff the only member of P_{m-1} vanishing on X is zero, i.e. the basis
/// matrix has full column rank. Vacuously true for m = 0.
inline bool is_determining_set(const PointSet& points, int m, int dim) {
  if (m < 0) throw Error(ErrorCode::InvalidArgument, "m must be non-negative");
  if (m == 0) return true;
  if (points.dim() != dim) throw Error(ErrorCode::DimensionMismatch, "points do not match dimension");
  const MonomialBasis basis(dim, m);
  if (points.size() < basis.size()) return false;
  return numerical_rank<double>(basis_matrix(basis, points)) == basis.size();
}

inline bool is_determining_set(const PointSet& points, int m) { return is_determining_set(points, m, points.dim()); }

} // namespace rbfx
