#pragma once

// Error-bound formulas for MQ and Gaussian interpolation, empirical rate
// fitting, and a univariate Gorny-inequality oracle.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rbfx/error.hpp"
#include "rbfx/geometry.hpp"
#include "rbfx/kernels.hpp"

namespace rbfx {

/// E0 <= C * lambda^(1/d) * ||f||_h for d <= d0.
struct MQBoundParams {
  double C = 1.0;
  double lambda = 0.5;
  double d0 = 1.0;
  double b0 = 1.0;

  void validate() const {
    if (!(C > 0) || !(lambda > 0 && lambda < 1) || !(d0 > 0) || !(b0 > 0)) {
      throw Error(ErrorCode::InvalidArgument, "MQ bound parameters need C, d0, b0 > 0 and 0 < lambda < 1");
    }
  }
};

/// E0 <= Delta * (G d)^(g/d) * ||f||_h for d <= d0. Only contracting while G d < 1.
struct GaussianBoundParams {
  double Delta = 1.0;
  double G = 1.0;
  double g = 1.0;
  double d0 = 1.0;

  void validate() const {
    if (!(Delta > 0) || !(G > 0) || !(g > 0) || !(d0 > 0)) {
      throw Error(ErrorCode::InvalidArgument, "Gaussian bound parameters must be positive");
    }
  }
};

struct DerivativeBoundParams {
  int l = 2;
  int alpha_order = 1;
  double delta = 0.1;
  double C_alpha = 1.0;
  double Cprime = 1.0;

  void validate() const {
    if (alpha_order <= 0 || alpha_order >= l) {
      throw Error(ErrorCode::OutOfRange, "derivative order k must satisfy 0 < k < l");
    }
    if (!(delta > 0) || !(C_alpha > 0) || !(Cprime > 0)) {
      throw Error(ErrorCode::InvalidArgument, "delta, C_alpha and Cprime must be positive");
    }
  }
};

/// Which branch of max(M_l, M0 l! delta^-l) is active.
enum class Regime { SmallD, LargeD };

inline const char* to_string(Regime regime) { return regime == Regime::SmallD ? "small-d" : "large-d"; }

namespace detail {

inline void check_fill(double d, double d0) {
  if (!(d > 0) || !(d <= d0)) {
    throw Error(ErrorCode::OutOfRange, "fill distance " + std::to_string(d) + " outside (0, d0]");
  }
}

inline double factorial(int l) {
  double out = 1;
  for (int i = 2; i <= l; ++i) out *= i;
  return out;
}

} // namespace detail

inline double mq_bound(const MQBoundParams& p, double d, double norm_f) {
  p.validate();
  detail::check_fill(d, p.d0);
  if (!(norm_f >= 0)) throw Error(ErrorCode::InvalidArgument, "norm must be non-negative");
  return p.C * std::pow(p.lambda, 1.0 / d) * norm_f;
}

/// True when G d >= 1, where the Gaussian bound no longer decreases.
inline bool gaussian_non_contracting(const GaussianBoundParams& p, double d) { return p.G * d >= 1.0; }

inline double gaussian_bound(const GaussianBoundParams& p, double d, double norm_f) {
  p.validate();
  detail::check_fill(d, p.d0);
  if (!(norm_f >= 0)) throw Error(ErrorCode::InvalidArgument, "norm must be non-negative");
  return p.Delta * std::pow(p.G * d, p.g / d) * norm_f;
}

inline double m_bar(double M0, double Ml, int l, double delta) {
  return std::max(Ml, M0 * detail::factorial(l) * std::pow(delta, -l));
}

inline Regime m_bar_regime(double M0, double Ml, int l, double delta) {
  return Ml >= M0 * detail::factorial(l) * std::pow(delta, -l) ? Regime::SmallD : Regime::LargeD;
}

struct DerivativeBound {
  double value = 0;
  double m_bar = 0;
  Regime regime = Regime::SmallD;
};

/// C_alpha * M0^(1-k/l) * Mbar^(k/l) for real k in [0, l].
inline DerivativeBound derivative_bound_relaxed(double k, int l, double delta, double C_alpha, double M0, double Ml) {
  if (!(k >= 0 && k <= l)) throw Error(ErrorCode::OutOfRange, "k must lie in [0, l]");
  DerivativeBound out;
  out.m_bar = m_bar(M0, Ml, l, delta);
  out.regime = m_bar_regime(M0, Ml, l, delta);
  const double t = k / l;
  out.value = C_alpha * std::pow(M0, 1 - t) * std::pow(out.m_bar, t);
  return out;
}

inline DerivativeBound derivative_bound(const DerivativeBoundParams& p, double M0, double Ml) {
  p.validate();
  return derivative_bound_relaxed(p.alpha_order, p.l, p.delta, p.C_alpha, M0, Ml);
}

inline double gorny_bound(int k, int l, double M0, double Mbar) {
  if (k <= 0 || k >= l) throw Error(ErrorCode::OutOfRange, "k must satisfy 0 < k < l");
  const double t = static_cast<double>(k) / l;
  return 16 * std::pow(2 * std::numbers::e, k) * std::pow(M0, 1 - t) * std::pow(Mbar, t);
}

/// psi(order, t) returns the order-th derivative of psi at t.
using UnivariateFunction = std::function<double(int, double)>;

struct GornyReport {
  double lhs = 0;
  double rhs = 0;
  double M0 = 0;
  double Ml = 0;
  double Mbar = 0;
  bool holds = false;
};

inline GornyReport gorny_oracle_check(const UnivariateFunction& psi, int k, int l, double delta, int samples = 2048) {
  if (k <= 0 || k >= l) throw Error(ErrorCode::OutOfRange, "k must satisfy 0 < k < l");
  if (!(delta > 0) || samples < 2) throw Error(ErrorCode::InvalidArgument, "need delta > 0 and at least 2 samples");
  GornyReport r;
  for (int i = 0; i < samples; ++i) {
    const double t = -delta + 2 * delta * i / (samples - 1);
    r.M0 = std::max(r.M0, std::abs(psi(0, t)));
    r.Ml = std::max(r.Ml, std::abs(psi(l, t)));
  }
  r.Mbar = m_bar(r.M0, r.Ml, l, delta);
  r.lhs = std::abs(psi(k, 0.0));
  r.rhs = gorny_bound(k, l, r.M0, r.Mbar);
  r.holds = r.lhs <= r.rhs;
  return r;
}

struct GornyCase {
  std::string family;
  int k = 1;
  int l = 2;
  double delta = 1;
  GornyReport report;
};

struct GornyCampaign {
  int trials = 0;
  int violations = 0;
  double worst_ratio = 0; // max lhs / rhs
  std::vector<GornyCase> failures;
};

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); }

inline UnivariateFunction random_polynomial(std::mt19937_64& rng) {
  const int degree = static_cast<int>(rng() % 6);
  std::vector<double> a(degree + 1);
  for (auto& v : a) v = uniform(rng, -1, 1);
  return [a](int order, double t) {
    double sum = 0;
    for (int j = static_cast<int>(a.size()) - 1; j >= order; --j) {
      double falling = 1;
      for (int i = 0; i < order; ++i) falling *= j - i;
      sum = sum * t + a[j] * falling;
    }
    return sum;
  };
}

inline UnivariateFunction random_trig(std::mt19937_64& rng) {
  const double amp = uniform(rng, 0.1, 3), omega = uniform(rng, 0.2, 6), phase = uniform(rng, 0, 2 * std::numbers::pi);
  return [=](int order, double t) { return amp * std::pow(omega, order) * std::sin(omega * t + phase + order * std::numbers::pi / 2); };
}

inline UnivariateFunction random_kernel_slice(std::mt19937_64& rng) {
  const bool gaussian = rng() % 2 == 0;
  const double beta = gaussian ? uniform(rng, 0.2, 5) : std::array{1.0, -1.0, 3.0, 0.5}[rng() % 4];
  const double c = uniform(rng, 0.2, 2);
  const Kernel kernel = gaussian ? Kernel::gaussian(beta, 1) : Kernel::multiquadric(beta, c, 1);
  const double shift = uniform(rng, -1, 1);
  const KernelEvaluator<double> evaluator(kernel);
  return [evaluator, shift](int order, double t) {
    Eigen::VectorXd x(1);
    x[0] = shift + t;
    return evaluator.eval_derivative({order}, x);
  };
}

} // namespace detail

/// Random polynomials (degree <= 5), trigonometric functions and 1D kernel
/// slices with random 0 < k < l <= 4 and delta. Deterministic given seed.
inline GornyCampaign run_gorny_campaign(int trials, std::uint64_t seed) {
  if (trials < 0) throw Error(ErrorCode::InvalidArgument, "trial count must be non-negative");
  std::mt19937_64 rng(seed);
  GornyCampaign out;
  out.trials = trials;
  for (int trial = 0; trial < trials; ++trial) {
    GornyCase c;
    UnivariateFunction psi;
    switch (trial % 3) {
    case 0:
      c.family = "polynomial";
      psi = detail::random_polynomial(rng);
      break;
    case 1:
      c.family = "trigonometric";
      psi = detail::random_trig(rng);
      break;
    default:
      c.family = "kernel";
      psi = detail::random_kernel_slice(rng);
      break;
    }
    c.l = 2 + static_cast<int>(rng() % 3);
    c.k = 1 + static_cast<int>(rng() % (c.l - 1));
    c.delta = c.family == "polynomial" ? 1.0 : detail::uniform(rng, 0.1, 2.0);
    c.report = gorny_oracle_check(psi, c.k, c.l, c.delta);
    if (c.report.rhs > 0) out.worst_ratio = std::max(out.worst_ratio, c.report.lhs / c.report.rhs);
    if (!c.report.holds) {
      ++out.violations;
      out.failures.push_back(c);
    }
  }
  return out;
}

struct RateSample {
  double d = 0;
  double error = 0;
};

struct MQRateFit {
  double C_hat = 0;
  double lambda_hat = 0;
  double r2 = 0;
};

struct GaussianRateFit {
  double Delta_hat = 0;
  double G_hat = 0;
  double g_hat = 0;
  double r2 = 0;
};

namespace detail {

inline void check_samples(const std::vector<RateSample>& samples, std::size_t minimum) {
  if (samples.size() < minimum) {
    throw Error(ErrorCode::DegenerateSamples, "need at least " + std::to_string(minimum) + " samples");
  }
  std::vector<double> ds;
  for (const auto& s : samples) {
    if (!(s.d > 0) || !std::isfinite(s.d)) throw Error(ErrorCode::InvalidArgument, "fill distances must be positive");
    if (!(s.error > 0) || !std::isfinite(s.error)) throw Error(ErrorCode::DomainError, "errors must be positive and finite");
    ds.push_back(s.d);
  }
  std::sort(ds.begin(), ds.end());
  if (std::adjacent_find(ds.begin(), ds.end()) != ds.end()) throw Error(ErrorCode::DegenerateSamples, "fill distances must be distinct");
}

struct LineFit {
  double intercept = 0;
  double slope = 0;
  double ss_res = 0;
  double ss_tot = 0;
};

inline LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  LineFit f;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    f.ss_tot += (y[i] - my) * (y[i] - my);
  }
  f.slope = sxx > 0 ? sxy / sxx : 0;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    f.ss_res += r * r;
  }
  return f;
}

inline double r_squared(const LineFit& f) { return f.ss_tot > 0 ? 1 - f.ss_res / f.ss_tot : 0.0; }

} // namespace detail

/// Least squares of log e = log C + (1/d) log lambda.
inline MQRateFit fit_mq_rate(const std::vector<RateSample>& samples) {
  detail::check_samples(samples, 3);
  std::vector<double> x, y;
  for (const auto& s : samples) {
    x.push_back(1 / s.d);
    y.push_back(std::log(s.error));
  }
  const auto line = detail::least_squares_line(x, y);
  return {std::exp(line.intercept), std::exp(line.slope), detail::r_squared(line)};
}

/// Least squares of log e = log Delta + g log(G d) / d. For fixed G the model
/// is linear in (log Delta, g); log G is found by a coarse scan followed by
/// golden-section refinement over (log(1/max d) - 40, log(1/max d)).
inline GaussianRateFit fit_gaussian_rate(const std::vector<RateSample>& samples) {
  detail::check_samples(samples, 4);
  double max_d = 0;
  std::vector<double> y;
  for (const auto& s : samples) {
    max_d = std::max(max_d, s.d);
    y.push_back(std::log(s.error));
  }
  const auto fit_at = [&](double log_g) {
    std::vector<double> x;
    for (const auto& s : samples) x.push_back((log_g + std::log(s.d)) / s.d);
    return detail::least_squares_line(x, y);
  };
  if (fit_at(0.0).ss_tot == 0) throw Error(ErrorCode::DegenerateSamples, "errors are constant");

  const double hi = -std::log(max_d), lo = hi - 40;
  constexpr int scan = 400;
  int best = 0;
  double best_u = lo, best_ss = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= scan; ++i) {
    // Stay strictly inside the open interval at the upper end.
    const double u = i == scan ? hi - 1e-9 : lo + (hi - lo) * i / scan;
    const double ss = fit_at(u).ss_res;
    if (ss < best_ss) {
      best_ss = ss;
      best_u = u;
      best = i;
    }
  }
  const double step = (hi - lo) / scan;
  double a = lo + step * std::max(best - 1, 0), b = std::min(lo + step * (best + 1), hi - 1e-9);
  const double phi = (std::sqrt(5.0) - 1) / 2;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = fit_at(x1).ss_res, f2 = fit_at(x2).ss_res;
  for (int iter = 0; iter < 200 && b - a > 1e-13 * (1 + std::abs(a)); ++iter) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = fit_at(x1).ss_res;
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = fit_at(x2).ss_res;
    }
  }
  double log_g = (a + b) / 2;
  if (best_ss < fit_at(log_g).ss_res) log_g = best_u;
  const auto line = fit_at(log_g);
  return {std::exp(line.intercept), std::exp(log_g), line.slope, detail::r_squared(line)};
}

} // namespace rbfx
