#pragma once

// Scalar-type support. Every numerical routine in rbfx is a template over the
// scalar so that refinement studies can run past the double-precision
// conditioning wall.

#include <cmath>
#include <limits>
#include <type_traits>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/eigen.hpp>
#include <Eigen/Dense>

namespace rbfx {

/// 160 significant decimal digits, expression templates off (required by Eigen).
using HighPrecision = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<160>,
                                                    boost::multiprecision::et_off>;

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
inline double to_double(const Scalar& value) {
  if constexpr (std::is_floating_point_v<Scalar>) {
    return static_cast<double>(value);
  } else {
    return value.template convert_to<double>();
  }
}

template <class Scalar>
inline Scalar machine_epsilon() {
  return std::numeric_limits<Scalar>::epsilon();
}

template <class Scalar>
inline Scalar gamma_function(const Scalar& x) {
  return boost::math::tgamma(x);
}

template <class Scalar>
inline bool is_finite(const Scalar& x) {
  using std::isfinite;
  using boost::multiprecision::isfinite;
  return isfinite(x);
}

} // namespace rbfx
