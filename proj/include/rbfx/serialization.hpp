#pragma once

// JSON documents for kernels, solved interpolants and rate-fit reports.
//
// Interpolant document (version 1):
//   {"format": "rbfx-interpolant", "version": 1, "scalar": "double" | "high",
//    "kernel": {"family": "multiquadric" | "gaussian", "beta": .., "c": .., "dim": ..},
//    "basis_order": "graded-lex", "nodes": [[..], ..], "c": [..], "b": [..],
//    "condition_estimate": ..}
// Coefficients are JSON numbers for "double" and decimal strings (full
// precision) for "high".

#include <cstdint>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>

#include <json.hpp>

#include "rbfx/bounds.hpp"
#include "rbfx/interpolant.hpp"

namespace rbfx {

inline constexpr int kInterpolantFormatVersion = 1;

namespace detail {

template <class Scalar>
constexpr const char* scalar_tag() {
  return std::is_same_v<Scalar, double> ? "double" : "high";
}

template <class Scalar>
nlohmann::json scalar_to_json(const Scalar& value) {
  if constexpr (std::is_same_v<Scalar, double>) {
    return value;
  } else {
    return value.str(std::numeric_limits<Scalar>::max_digits10, std::ios_base::scientific);
  }
}

template <class Scalar>
Scalar scalar_from_json(const nlohmann::json& j) {
  if constexpr (std::is_same_v<Scalar, double>) {
    if (!j.is_number()) throw Error(ErrorCode::ParseError, "expected a number");
    return j.get<double>();
  } else {
    if (j.is_number()) return Scalar(j.get<double>());
    if (!j.is_string()) throw Error(ErrorCode::ParseError, "expected a decimal string");
    return Scalar(j.get<std::string>());
  }
}

template <class Scalar>
nlohmann::json vector_to_json(const Vector<Scalar>& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(scalar_to_json(v[i]));
  return out;
}

template <class Scalar>
Vector<Scalar> vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, "expected an array");
  Vector<Scalar> out(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out[static_cast<Eigen::Index>(i)] = scalar_from_json<Scalar>(j[i]);
  return out;
}

inline const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::ParseError, std::string("missing field '") + key + "'");
  return j.at(key);
}

} // namespace detail

inline nlohmann::json kernel_to_json(const Kernel& kernel) {
  nlohmann::json j = {{"family", to_string(kernel.family())}, {"beta", kernel.beta()}, {"dim", kernel.dim()}};
  if (kernel.family() == KernelFamily::Multiquadric) j["c"] = kernel.c();
  return j;
}

/// Accepts "multiquadric"/"mq" and "gaussian".
inline Kernel kernel_from_json(const nlohmann::json& j) {
  try {
    const auto family = detail::require(j, "family").get<std::string>();
    const double beta = detail::require(j, "beta").get<double>();
    const int dim = j.value("dim", 1);
    if (family == "multiquadric" || family == "mq") {
      return Kernel::multiquadric(beta, detail::require(j, "c").get<double>(), dim);
    }
    if (family == "gaussian") return Kernel::gaussian(beta, dim);
    throw Error(ErrorCode::ParseError, "unknown kernel family '" + family + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

template <class Scalar>
nlohmann::json interpolant_to_json(const Interpolant<Scalar>& s) {
  auto nodes = nlohmann::json::array();
  for (int i = 0; i < s.nodes().size(); ++i) {
    auto row = nlohmann::json::array();
    for (int k = 0; k < s.nodes().dim(); ++k) row.push_back(s.nodes().matrix()(i, k));
    nodes.push_back(row);
  }
  return {{"format", "rbfx-interpolant"},
          {"version", kInterpolantFormatVersion},
          {"scalar", detail::scalar_tag<Scalar>()},
          {"kernel", kernel_to_json(s.kernel())},
          {"basis_order", s.basis().order_tag()},
          {"nodes", nodes},
          {"c", detail::vector_to_json(s.coeffs())},
          {"b", detail::vector_to_json(s.polycoeffs())},
          {"condition_estimate", s.condition_estimate()}};
}

template <class Scalar>
Interpolant<Scalar> interpolant_from_json(const nlohmann::json& j) {
  try {
    if (detail::require(j, "format") != "rbfx-interpolant") throw Error(ErrorCode::ParseError, "not an interpolant document");
    const int version = detail::require(j, "version").get<int>();
    if (version != kInterpolantFormatVersion) {
      throw Error(ErrorCode::ParseError, "unsupported interpolant version " + std::to_string(version));
    }
    const Kernel kernel = kernel_from_json(detail::require(j, "kernel"));
    const MonomialBasis basis(kernel.dim(), kernel.cpd_order());
    if (detail::require(j, "basis_order") != basis.order_tag()) throw Error(ErrorCode::ParseError, "unknown basis order");
    const auto& rows = detail::require(j, "nodes");
    Eigen::MatrixXd nodes(rows.size(), kernel.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != static_cast<std::size_t>(kernel.dim())) {
        throw Error(ErrorCode::DimensionMismatch, "node dimension does not match kernel");
      }
      for (int k = 0; k < kernel.dim(); ++k) nodes(static_cast<Eigen::Index>(i), k) = rows[i][k].get<double>();
    }
    Vector<Scalar> b = detail::vector_from_json<Scalar>(detail::require(j, "b"));
    if (b.size() != basis.size()) {
      throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(basis.size()) + " polynomial coefficients");
    }
    return Interpolant<Scalar>(kernel, PointSet(nodes), detail::vector_from_json<Scalar>(detail::require(j, "c")),
                               std::move(b), j.value("condition_estimate", 0.0));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

/// {model, params, r2, n_samples, regime_counts}.
struct FitReport {
  std::string model;
  std::map<std::string, double> params;
  double r2 = 0;
  int n_samples = 0;
  std::map<std::string, int> regime_counts;
};

inline FitReport make_fit_report(const MQRateFit& fit, int n_samples) {
  return {"mq", {{"C_hat", fit.C_hat}, {"lambda_hat", fit.lambda_hat}}, fit.r2, n_samples, {}};
}

inline FitReport make_fit_report(const GaussianRateFit& fit, int n_samples) {
  return {"gaussian", {{"Delta_hat", fit.Delta_hat}, {"G_hat", fit.G_hat}, {"g_hat", fit.g_hat}}, fit.r2, n_samples, {}};
}

inline nlohmann::json to_json(const FitReport& r) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : r.params) params[k] = v;
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [k, v] : r.regime_counts) counts[k] = v;
  return {{"model", r.model}, {"params", params}, {"r2", r.r2}, {"n_samples", r.n_samples}, {"regime_counts", counts}};
}

inline FitReport fit_report_from_json(const nlohmann::json& j) {
  try {
    FitReport r;
    r.model = detail::require(j, "model").get<std::string>();
    if (r.model != "mq" && r.model != "gaussian") throw Error(ErrorCode::ParseError, "unknown model '" + r.model + "'");
    for (const auto& [k, v] : detail::require(j, "params").items()) r.params[k] = v.get<double>();
    r.r2 = detail::require(j, "r2").get<double>();
    r.n_samples = detail::require(j, "n_samples").get<int>();
    for (const auto& [k, v] : detail::require(j, "regime_counts").items()) r.regime_counts[k] = v.get<int>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

} // namespace rbfx
