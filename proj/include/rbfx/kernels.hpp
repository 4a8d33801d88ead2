#pragma once

// Multiquadric-family and Gaussian radial kernels with analytic partial
// derivatives of arbitrary multi-index order (up to a configurable cap).
//
// Both kernels are written as h(x) = g(t(x)) with t = c^2 + |x|^2 (MQ) or
// t = |x|^2 (Gaussian), so that d/dx_i t = 2 x_i in either case. A derivative
// D^alpha h is a finite sum of poly_j(x) * g^{(j)}(t); the polynomial parts
// do not depend on the kernel parameters and are memoized per multi-index.

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "rbfx/error.hpp"
#include "rbfx/polybasis.hpp"
#include "rbfx/scalar.hpp"

namespace rbfx {

enum class KernelFamily { Multiquadric, Gaussian };

inline const char* to_string(KernelFamily family) {
  return family == KernelFamily::Multiquadric ? "multiquadric" : "gaussian";
}

inline constexpr int kDefaultMaxDerivativeOrder = 6;

/// One term poly(x) * g^{(profile_order)}(t(x)) of a kernel derivative.
struct RadialProfileTerm {
  Polynomial poly;
  int profile_order = 0;
};

using TermList = std::vector<RadialProfileTerm>;

/// d/dx_axis of sum_j poly_j g^{(j)}: each term yields
/// (d poly/dx_axis) g^{(j)} + 2 x_axis poly g^{(j+1)}. Terms are merged by
/// profile order and kept sorted by it.
inline TermList differentiate(const TermList& terms, int axis) {
  std::map<int, Polynomial> merged;
  for (const auto& term : terms) {
    for (const auto& [e, coeff] : differentiate(term.poly, axis)) merged[term.profile_order][e] += coeff;
    auto& next = merged[term.profile_order + 1];
    for (const auto& [exponent, coeff] : term.poly) {
      MultiIndex e = exponent;
      e[axis] += 1;
      next[e] += 2.0 * coeff;
    }
  }
  TermList out;
  for (auto& [j, poly] : merged) {
    std::erase_if(poly, [](const auto& kv) { return kv.second == 0.0; });
    if (!poly.empty()) out.push_back({std::move(poly), j});
  }
  return out;
}

/// Term list of the undifferentiated kernel: 1 * g(t).
inline TermList identity_terms(int dim) { return {{Polynomial{{MultiIndex(dim, 0), 1.0}}, 0}}; }

/// Term list for differentiating along the given axes, in that order.
inline TermList terms_for_axes(const std::vector<int>& axes, int dim) {
  TermList terms = identity_terms(dim);
  for (int axis : axes) terms = differentiate(terms, axis);
  return terms;
}

/// Memoized term list for D^alpha (axes applied in increasing order).
/// Entries are never evicted, so returned references stay valid.
inline const TermList& derivative_terms(const MultiIndex& alpha) {
  static std::mutex mutex;
  static std::map<MultiIndex, TermList> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(alpha);
  if (it == cache.end()) {
    std::vector<int> axes;
    for (std::size_t i = 0; i < alpha.size(); ++i) axes.insert(axes.end(), alpha[i], static_cast<int>(i));
    it = cache.emplace(alpha, terms_for_axes(axes, static_cast<int>(alpha.size()))).first;
  }
  return it->second;
}

/// Radial kernel specification.
class Kernel {
public:
  /// h(x) = Gamma(-beta/2) (c^2 + |x|^2)^{beta/2}, beta not in {0, 2, 4, ...}.
  static Kernel multiquadric(double beta, double c, int dim) {
    if (!std::isfinite(beta) || !std::isfinite(c)) throw Error(ErrorCode::InvalidArgument, "non-finite kernel parameter");
    if (beta >= 0.0 && std::fmod(beta, 2.0) == 0.0) {
      throw Error(ErrorCode::InvalidArgument, "multiquadric beta must not be a non-negative even integer");
    }
    if (!(c > 0.0)) throw Error(ErrorCode::InvalidArgument, "multiquadric c must be positive");
    return Kernel(KernelFamily::Multiquadric, beta, c, dim);
  }

  /// h(x) = exp(-beta |x|^2), beta > 0.
  static Kernel gaussian(double beta, int dim) {
    if (!std::isfinite(beta) || !(beta > 0.0)) throw Error(ErrorCode::InvalidArgument, "gaussian beta must be positive");
    return Kernel(KernelFamily::Gaussian, beta, 0.0, dim);
  }

  KernelFamily family() const { return family_; }
  double beta() const { return beta_; }
  double c() const { return c_; }
  int dim() const { return dim_; }
  int max_derivative_order() const { return max_order_; }

  Kernel with_max_derivative_order(int cap) const {
    if (cap < 0) throw Error(ErrorCode::InvalidArgument, "derivative cap must be non-negative");
    Kernel k = *this;
    k.max_order_ = cap;
    return k;
  }

  /// Order of conditional positive definiteness: ceil(beta/2) for MQ with
  /// beta > 0, zero otherwise.
  int cpd_order() const {
    if (family_ == KernelFamily::Multiquadric && beta_ > 0.0) return static_cast<int>(std::ceil(beta_ / 2.0));
    return 0;
  }

  bool operator==(const Kernel& other) const {
    return family_ == other.family_ && beta_ == other.beta_ && c_ == other.c_ && dim_ == other.dim_;
  }

  template <class Scalar>
  Scalar eval(const Eigen::Ref<const Vector<Scalar>>& x) const;

  template <class Scalar>
  Scalar eval_derivative(const MultiIndex& alpha, const Eigen::Ref<const Vector<Scalar>>& x) const;

  double eval(const Eigen::VectorXd& x) const { return eval<double>(x); }
  double eval_derivative(const MultiIndex& alpha, const Eigen::VectorXd& x) const {
    return eval_derivative<double>(alpha, x);
  }

  void check_order(const MultiIndex& alpha) const {
    if (static_cast<int>(alpha.size()) != dim_) throw Error(ErrorCode::DimensionMismatch, "multi-index size");
    for (int a : alpha) {
      if (a < 0) throw Error(ErrorCode::InvalidArgument, "negative multi-index entry");
    }
    if (order(alpha) > max_order_) {
      throw Error(ErrorCode::UnsupportedOrder,
                  "|alpha| = " + std::to_string(order(alpha)) + " exceeds cap " + std::to_string(max_order_));
    }
  }

private:
  Kernel(KernelFamily family, double beta, double c, int dim) : family_(family), beta_(beta), c_(c), dim_(dim) {
    if (dim < 1) throw Error(ErrorCode::InvalidArgument, "kernel dimension must be at least 1");
  }

  KernelFamily family_;
  double beta_;
  double c_;
  int dim_;
  int max_order_ = kDefaultMaxDerivativeOrder;
};

/// Kernel bound to a scalar type, with the profile constants precomputed.
/// This is what interpolants use in their evaluation loops.
template <class Scalar>
class KernelEvaluator {
public:
  explicit KernelEvaluator(const Kernel& kernel) : kernel_(kernel) {
    const int cap = kernel.max_derivative_order() + 1;
    factors_.resize(cap + 1);
    if (kernel.family() == KernelFamily::Multiquadric) {
      half_beta_ = Scalar(kernel.beta()) / 2;
      integer_beta_ = kernel.beta() == std::round(kernel.beta()) && std::abs(kernel.beta()) < 1e6;
      beta_int_ = integer_beta_ ? static_cast<int>(kernel.beta()) : 0;
      c2_ = Scalar(kernel.c()) * Scalar(kernel.c());
      // g^{(j)}(t) = Gamma(-b/2) (b/2)(b/2 - 1)...(b/2 - j + 1) t^{b/2 - j}
      factors_[0] = gamma_function<Scalar>(-half_beta_);
      for (int j = 1; j <= cap; ++j) factors_[j] = factors_[j - 1] * (half_beta_ - Scalar(j - 1));
    } else {
      minus_beta_ = -Scalar(kernel.beta());
      // g^{(j)}(t) = (-beta)^j exp(-beta t)
      factors_[0] = Scalar(1);
      for (int j = 1; j <= cap; ++j) factors_[j] = factors_[j - 1] * minus_beta_;
    }
  }

  const Kernel& kernel() const { return kernel_; }

  Scalar profile_argument(const Eigen::Ref<const Vector<Scalar>>& x) const {
    const Scalar r2 = x.squaredNorm();
    return kernel_.family() == KernelFamily::Multiquadric ? c2_ + r2 : r2;
  }

  /// g^{(j)}(t).
  Scalar profile_derivative(int j, const Scalar& t) const {
    using std::exp;
    if (kernel_.family() == KernelFamily::Multiquadric) return factors_[j] * profile_power(j, t);
    return factors_[j] * exp(minus_beta_ * t);
  }

  Scalar eval(const Eigen::Ref<const Vector<Scalar>>& x) const {
    check_finite(x);
    return profile_derivative(0, profile_argument(x));
  }

  Scalar eval_derivative(const MultiIndex& alpha, const Eigen::Ref<const Vector<Scalar>>& x) const {
    kernel_.check_order(alpha);
    check_finite(x);
    return eval_terms(derivative_terms(alpha), x);
  }

  /// sum_j poly_j(x) g^{(j)}(t(x)) for a precomputed term list.
  Scalar eval_terms(const TermList& terms, const Eigen::Ref<const Vector<Scalar>>& x) const {
    const Scalar t = profile_argument(x);
    int top = 0;
    for (const auto& term : terms) top = std::max(top, term.profile_order);
    // One transcendental call per point: t^(b/2 - j) = t^(b/2 - top) t^(top - j), or exp(-beta t).
    std::vector<Scalar> g(top + 1);
    if (kernel_.family() == KernelFamily::Multiquadric) {
      Scalar power = profile_power(top, t);
      for (int j = top; j >= 0; --j, power *= t) g[j] = factors_[j] * power;
    } else {
      using std::exp;
      const Scalar e = exp(minus_beta_ * t);
      for (int j = 0; j <= top; ++j) g[j] = factors_[j] * e;
    }
    Scalar sum(0);
    for (const auto& term : terms) sum += evaluate<Scalar>(term.poly, x) * g[term.profile_order];
    return sum;
  }

private:
  /// t^(beta/2 - j); integer beta avoids the general power function.
  Scalar profile_power(int j, const Scalar& t) const {
    if (integer_beta_) {
      const int twice = beta_int_ - 2 * j;
      using std::sqrt;
      return twice % 2 == 0 ? integer_power(t, twice / 2) : integer_power(Scalar(sqrt(t)), twice);
    }
    using std::pow;
    return pow(t, half_beta_ - Scalar(j));
  }

  static Scalar integer_power(Scalar base, int e) {
    unsigned n = static_cast<unsigned>(e < 0 ? -e : e);
    Scalar out(1);
    for (; n > 0; n >>= 1, base *= base) {
      if (n & 1u) out *= base;
    }
    return e < 0 ? Scalar(Scalar(1) / out) : out;
  }

  static void check_finite(const Eigen::Ref<const Vector<Scalar>>& x) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (!is_finite(x[i])) throw Error(ErrorCode::DomainError, "non-finite kernel argument");
    }
  }

  Kernel kernel_;
  Scalar half_beta_{0};
  Scalar c2_{0};
  Scalar minus_beta_{0};
  bool integer_beta_ = false;
  int beta_int_ = 0;
  std::vector<Scalar> factors_;
};

template <class Scalar>
Scalar Kernel::eval(const Eigen::Ref<const Vector<Scalar>>& x) const {
  if (x.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "point dimension");
  return KernelEvaluator<Scalar>(*this).eval(x);
}

template <class Scalar>
Scalar Kernel::eval_derivative(const MultiIndex& alpha, const Eigen::Ref<const Vector<Scalar>>& x) const {
  if (x.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "point dimension");
  return KernelEvaluator<Scalar>(*this).eval_derivative(alpha, x);
}

} // namespace rbfx
