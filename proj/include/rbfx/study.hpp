#pragma once

// Refinement studies: interpolate a known kernel expansion on a sequence of
// node sets, measure sup-errors of f - s and D^alpha(f - s), fit decay rates
// and check the derivative bound shape. Config schema: docs/config.md.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rbfx/bounds.hpp"
#include "rbfx/geometry.hpp"
#include "rbfx/interpolant.hpp"
#include "rbfx/serialization.hpp"

namespace rbfx {

inline constexpr int kStudyConfigVersion = 1;

inline constexpr const char* kRowsHeader = "level,d,N,kernel,beta,c,alpha,sup_error,norm_f,regime,cond_estimate";

enum class Precision { Double, High };

struct ApproximandSpec {
  enum class Centers { Explicit, Halton, Random, Nodes };
  Centers centers = Centers::Explicit;
  std::vector<std::vector<double>> points; // Explicit
  int count = 0;                           // Halton, Random
  std::uint64_t center_seed = 0;           // Random
  std::vector<double> weights;             // empty: drawn from weight_seed
  std::uint64_t weight_seed = 0;
  std::vector<double> polynomial; // graded-lex coefficients of P_{m-1}; empty = 0
};

struct RefinementSpec {
  PointScheme::Kind scheme = PointScheme::Kind::Grid;
  std::vector<double> spacings; // Grid, strictly decreasing
  std::vector<int> counts;      // Halton, Random, strictly increasing
  std::size_t levels() const { return scheme == PointScheme::Kind::Grid ? spacings.size() : counts.size(); }
};

struct StudyConfig {
  std::string name = "study";
  Kernel kernel = Kernel::gaussian(1.0, 1);
  CubeDomain domain = CubeDomain::unit(1);
  ApproximandSpec approximand;
  RefinementSpec refinement;
  int l = 2;
  std::vector<MultiIndex> alphas;
  double delta = 0.1;
  int probe_resolution = 200;
  int fill_resolution = 0; // 0: default_fill_resolution(dim)
  Precision precision = Precision::Double;
  double max_condition = 0; // 0: 1 / epsilon of the scalar type
  double Cprime = 1.0;
  double min_pass_fraction = 0.8;
  double rate_slack = 0.25;
  std::uint64_t seed = 1;
  int threads = 0; // 0: hardware concurrency
  std::string rows_file = "rows.csv";
  std::string summary_file = "summary.json";
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    config_error(std::string("field '") + key + "' has the wrong type");
  }
}

inline std::vector<std::vector<double>> point_rows(const nlohmann::json& j, int dim, const char* what) {
  std::vector<std::vector<double>> out;
  if (!j.is_array()) config_error(std::string(what) + " must be an array of points");
  for (const auto& p : j) {
    std::vector<double> row = p.is_number() ? std::vector<double>{p.get<double>()} : p.get<std::vector<double>>();
    if (static_cast<int>(row.size()) != dim) config_error(std::string(what) + ": point dimension mismatch");
    out.push_back(std::move(row));
  }
  return out;
}

inline MultiIndex parse_alpha(const nlohmann::json& j, int dim) {
  MultiIndex a = j.is_number() ? MultiIndex{j.get<int>()} : j.get<MultiIndex>();
  if (static_cast<int>(a.size()) != dim) config_error("multi-index dimension mismatch");
  for (int v : a) {
    if (v < 0) config_error("negative multi-index entry");
  }
  return a;
}

} // namespace detail

inline StudyConfig parse_study_config(const nlohmann::json& j) {
  using detail::config_error;
  if (!j.is_object()) config_error("config must be a JSON object");
  if (!j.contains("version")) config_error("missing 'version'");
  if (detail::get_or<int>(j, "version", 0) != kStudyConfigVersion) config_error("unsupported config version");
  StudyConfig c;
  try {
    c.name = detail::get_or<std::string>(j, "name", c.name);
    if (!j.contains("domain")) config_error("missing 'domain'");
    const auto& dom = j.at("domain");
    c.domain = CubeDomain(dom.at("lower").get<std::vector<double>>(), dom.at("side").get<double>());
    const int dim = c.domain.dim();

    if (!j.contains("kernel")) config_error("missing 'kernel'");
    nlohmann::json kj = j.at("kernel");
    kj["dim"] = dim;
    c.kernel = kernel_from_json(kj);
    const int m = c.kernel.cpd_order();

    if (!j.contains("approximand")) config_error("missing 'approximand'");
    const auto& aj = j.at("approximand");
    auto& a = c.approximand;
    const auto& cj = aj.at("centers");
    if (cj.is_string() && cj.get<std::string>() == "nodes") {
      a.centers = ApproximandSpec::Centers::Nodes;
    } else if (cj.is_array()) {
      a.centers = ApproximandSpec::Centers::Explicit;
      a.points = detail::point_rows(cj, dim, "approximand centers");
    } else if (cj.is_object()) {
      const auto scheme = cj.at("scheme").get<std::string>();
      a.count = cj.at("count").get<int>();
      if (a.count < 0) config_error("approximand center count must be non-negative");
      if (scheme == "halton") {
        a.centers = ApproximandSpec::Centers::Halton;
      } else if (scheme == "random") {
        a.centers = ApproximandSpec::Centers::Random;
        a.center_seed = cj.value("seed", std::uint64_t{1});
      } else {
        config_error("unknown approximand center scheme '" + scheme + "'");
      }
    } else {
      config_error("approximand centers must be \"nodes\", a point list or a scheme object");
    }
    a.weights = detail::get_or<std::vector<double>>(aj, "weights", {});
    if (!a.weights.empty() && a.centers != ApproximandSpec::Centers::Explicit) {
      config_error("explicit weights need explicit centers");
    }
    if (!a.weights.empty() && a.weights.size() != a.points.size()) config_error("one weight per approximand center");
    a.polynomial = detail::get_or<std::vector<double>>(aj, "polynomial", {});
    if (!a.polynomial.empty() && static_cast<int>(a.polynomial.size()) != MonomialBasis(dim, m).size()) {
      config_error("approximand polynomial needs " + std::to_string(MonomialBasis(dim, m).size()) + " coefficients");
    }

    c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);
    a.weight_seed = detail::get_or<std::uint64_t>(aj, "weight_seed", c.seed);

    if (!j.contains("refinement")) config_error("missing 'refinement'");
    const auto& rj = j.at("refinement");
    const auto scheme = rj.value("scheme", std::string("grid"));
    if (scheme == "grid") {
      c.refinement.scheme = PointScheme::Kind::Grid;
      c.refinement.spacings = rj.at("spacings").get<std::vector<double>>();
      for (std::size_t i = 0; i < c.refinement.spacings.size(); ++i) {
        if (!(c.refinement.spacings[i] > 0)) config_error("spacings must be positive");
        if (i > 0 && !(c.refinement.spacings[i] < c.refinement.spacings[i - 1])) {
          config_error("spacings must be strictly decreasing");
        }
      }
    } else if (scheme == "halton" || scheme == "random") {
      c.refinement.scheme = scheme == "halton" ? PointScheme::Kind::Halton : PointScheme::Kind::Random;
      c.refinement.counts = rj.at("counts").get<std::vector<int>>();
      for (std::size_t i = 0; i < c.refinement.counts.size(); ++i) {
        if (c.refinement.counts[i] < 1) config_error("counts must be positive");
        if (i > 0 && !(c.refinement.counts[i] > c.refinement.counts[i - 1])) {
          config_error("counts must be strictly increasing");
        }
      }
    } else {
      config_error("unknown refinement scheme '" + scheme + "'");
    }
    if (c.refinement.levels() == 0) config_error("refinement needs at least one level");

    if (j.contains("derivatives")) {
      const auto& dj = j.at("derivatives");
      c.l = dj.value("l", c.l);
      for (const auto& aj2 : dj.value("alphas", nlohmann::json::array())) c.alphas.push_back(detail::parse_alpha(aj2, dim));
    }
    if (c.l < 1) config_error("l must be at least 1");
    for (const auto& alpha : c.alphas) {
      const int k = order(alpha);
      if (k < 1 || k >= c.l) config_error("every alpha needs 0 < |alpha| < l");
      if (k > c.kernel.max_derivative_order()) config_error("alpha exceeds the derivative cap");
    }

    c.delta = detail::get_or<double>(j, "delta", c.delta);
    if (!(c.delta > 0) || !(2 * c.delta < c.domain.side())) config_error("delta must satisfy 0 < 2 delta < side");
    c.probe_resolution = detail::get_or<int>(j, "probe_resolution", c.probe_resolution);
    if (c.probe_resolution < 2) config_error("probe_resolution must be at least 2");
    c.fill_resolution = detail::get_or<int>(j, "fill_resolution", c.fill_resolution);
    if (c.fill_resolution < 0) config_error("fill_resolution must be non-negative");

    const auto precision = detail::get_or<std::string>(j, "precision", "double");
    if (precision == "double") {
      c.precision = Precision::Double;
    } else if (precision == "high") {
      c.precision = Precision::High;
    } else {
      config_error("precision must be \"double\" or \"high\"");
    }
    if (j.contains("tolerances")) c.max_condition = detail::get_or<double>(j.at("tolerances"), "max_condition", 0.0);
    if (c.max_condition < 0) config_error("max_condition must be non-negative");
    if (j.contains("bounds")) {
      const auto& bj = j.at("bounds");
      c.Cprime = detail::get_or<double>(bj, "Cprime", c.Cprime);
      c.min_pass_fraction = detail::get_or<double>(bj, "min_pass_fraction", c.min_pass_fraction);
      c.rate_slack = detail::get_or<double>(bj, "rate_slack", c.rate_slack);
    }
    if (!(c.Cprime > 0)) config_error("Cprime must be positive");
    if (!(c.min_pass_fraction >= 0 && c.min_pass_fraction <= 1)) config_error("min_pass_fraction must lie in [0, 1]");
    if (!(c.rate_slack >= 0 && c.rate_slack <= 1)) config_error("rate_slack must lie in [0, 1]");
    c.threads = detail::get_or<int>(j, "threads", c.threads);
    if (j.contains("outputs")) {
      c.rows_file = detail::get_or<std::string>(j.at("outputs"), "rows", c.rows_file);
      c.summary_file = detail::get_or<std::string>(j.at("outputs"), "summary", c.summary_file);
    }
  } catch (const nlohmann::json::exception& e) {
    config_error(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    config_error(e.what());
  }
  return c;
}

inline StudyConfig load_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config '" + path + "'");
  try {
    return parse_study_config(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

/// Measurement at one refinement level and one multi-index (alpha = 0 is E0).
struct StudyRow {
  int level = 0;
  double d = 0;
  int N = 0;
  MultiIndex alpha;
  double sup_error = std::numeric_limits<double>::quiet_NaN();
  double norm_f = 0;
  double cond_estimate = std::numeric_limits<double>::quiet_NaN();
  bool solved = false;
  std::string regime = "n/a";
};

struct LevelInfo {
  int level = 0;
  double d = 0;
  int N = 0;
  bool covered = false; // every subcube of side 2d holds a node
  bool solved = false;
  double cond_estimate = std::numeric_limits<double>::quiet_NaN();
  double norm_f = 0;
  std::string failure;
};

/// Rate fit of one error series (alpha = 0 for E0).
struct SeriesFit {
  MultiIndex alpha;
  int n_samples = 0;
  std::optional<MQRateFit> mq;
  std::optional<GaussianRateFit> gaussian;
  /// -slope of log e against 1/d, i.e. -log(lambda_hat); NaN when unavailable.
  double decay_exponent = std::numeric_limits<double>::quiet_NaN();
  std::string failure;
};

struct StudyResult {
  StudyConfig config;
  std::vector<LevelInfo> levels;
  std::vector<StudyRow> rows; // sorted by decreasing d, E0 first within a level
  std::vector<SeriesFit> fits; // E0 first, then config.alphas order

  int solver_failures() const {
    return static_cast<int>(std::count_if(levels.begin(), levels.end(), [](const LevelInfo& l) { return !l.solved; }));
  }
  const SeriesFit& e0_fit() const { return fits.front(); }
};

namespace detail {

inline MultiIndex zero_alpha(int dim) { return MultiIndex(dim, 0); }

inline bool is_zero(const MultiIndex& a) { return order(a) == 0; }

inline std::string alpha_label(const MultiIndex& a) { return is_zero(a) ? "0" : to_string(a); }

/// Approximand centers for one level; `nodes` only matters for the Nodes scheme.
inline PointSet approximand_centers(const StudyConfig& c, const PointSet& nodes) {
  const auto& a = c.approximand;
  switch (a.centers) {
  case ApproximandSpec::Centers::Explicit:
    return a.points.empty() ? PointSet(Eigen::MatrixXd(0, c.domain.dim())) : PointSet::from_rows(a.points);
  case ApproximandSpec::Centers::Halton: return generate_points(c.domain, PointScheme::halton(a.count));
  case ApproximandSpec::Centers::Random: return generate_points(c.domain, PointScheme::random(a.count, a.center_seed));
  case ApproximandSpec::Centers::Nodes: return nodes;
  }
  return nodes;
}

/// Weights uniform in [-1, 1] (or given), projected onto the moment-condition subspace.
template <class Scalar>
KernelExpansion<Scalar> build_approximand(const StudyConfig& c, const PointSet& centers) {
  const int count = centers.size();
  const MonomialBasis basis(c.kernel.dim(), c.kernel.cpd_order());
  Vector<Scalar> a(count);
  if (!c.approximand.weights.empty()) {
    for (int i = 0; i < count; ++i) a[i] = Scalar(c.approximand.weights[i]);
  } else {
    std::mt19937_64 rng(c.approximand.weight_seed);
    for (int i = 0; i < count; ++i) a[i] = Scalar(2 * unit_uniform(rng) - 1);
  }
  if (basis.size() > 0 && count > 0) {
    const Matrix<Scalar> P = basis_matrix<Scalar>(basis, centers.matrix().cast<Scalar>());
    const Eigen::HouseholderQR<Matrix<Scalar>> qr(P);
    const Matrix<Scalar> Q = qr.householderQ() * Matrix<Scalar>::Identity(count, std::min(count, basis.size()));
    a -= Q * (Q.transpose() * a);
  }
  Vector<Scalar> p = Vector<Scalar>::Zero(basis.size());
  for (std::size_t i = 0; i < c.approximand.polynomial.size(); ++i) p[i] = Scalar(c.approximand.polynomial[i]);
  return KernelExpansion<Scalar>(c.kernel, centers.matrix().cast<Scalar>(), std::move(a), std::move(p));
}

inline PointScheme level_scheme(const StudyConfig& c, int level) {
  const auto& r = c.refinement;
  switch (r.scheme) {
  case PointScheme::Kind::Grid: return PointScheme::grid(r.spacings[level]);
  case PointScheme::Kind::Halton: return PointScheme::halton(r.counts[level]);
  case PointScheme::Kind::Random: return PointScheme::random(r.counts[level], c.seed + static_cast<std::uint64_t>(level));
  }
  return PointScheme::grid(r.spacings[level]);
}

struct LevelOutcome {
  LevelInfo info;
  std::vector<double> errors; // E0, then one per alpha
};

template <class Scalar>
LevelOutcome run_level(const StudyConfig& c, int level, const PointSet& probes, const PointSet& interior) {
  LevelOutcome out;
  out.info.level = level;
  const PointSet nodes = generate_points(c.domain, level_scheme(c, level));
  out.info.N = nodes.size();
  out.info.d = fill_distance(c.domain, nodes, c.fill_resolution > 0 ? c.fill_resolution : default_fill_resolution(c.domain.dim()));
  out.info.covered = 2 * out.info.d <= c.domain.side() && coverage_check(c.domain, nodes, out.info.d);
  out.errors.assign(1 + c.alphas.size(), std::numeric_limits<double>::quiet_NaN());

  const KernelExpansion<Scalar> f = build_approximand<Scalar>(c, approximand_centers(c, nodes));
  out.info.norm_f = to_double(native_norm(f));
  Vector<Scalar> y(nodes.size());
  for (int i = 0; i < nodes.size(); ++i) y[i] = f.evaluate(nodes.point(i).template cast<Scalar>());
  try {
    const Interpolant<Scalar> s = solve<Scalar>(c.kernel, nodes, y, SolveOptions{c.max_condition});
    out.info.solved = true;
    out.info.cond_estimate = s.condition_estimate();
    using std::abs;
    Scalar e0(0);
    for (int i = 0; i < probes.size(); ++i) {
      const Vector<Scalar> x = probes.point(i).template cast<Scalar>();
      e0 = std::max(e0, Scalar(abs(f.evaluate(x) - s.evaluate(x))));
    }
    out.errors[0] = to_double(e0);
    for (std::size_t k = 0; k < c.alphas.size(); ++k) {
      Scalar ek(0);
      for (int i = 0; i < interior.size(); ++i) {
        const Vector<Scalar> x = interior.point(i).template cast<Scalar>();
        ek = std::max(ek, Scalar(abs(f.evaluate_derivative(c.alphas[k], x) - s.evaluate_derivative(c.alphas[k], x))));
      }
      out.errors[k + 1] = to_double(ek);
    }
  } catch (const SingularSystemError& e) {
    out.info.cond_estimate = e.condition_estimate();
    out.info.failure = e.what();
  } catch (const Error& e) {
    out.info.failure = e.what();
  }
  return out;
}

/// Probe points y with the closed ball of radius delta inside the cube.
inline PointSet interior_probes(const CubeDomain& domain, const PointSet& probes, double delta) {
  const double slack = 1e-12 * domain.side();
  std::vector<int> keep;
  for (int i = 0; i < probes.size(); ++i) {
    bool inside = true;
    for (int k = 0; k < domain.dim(); ++k) {
      const double v = probes.matrix()(i, k);
      inside = inside && v >= domain.lower(k) + delta - slack && v <= domain.upper(k) - delta + slack;
    }
    if (inside) keep.push_back(i);
  }
  Eigen::MatrixXd m(keep.size(), domain.dim());
  for (std::size_t i = 0; i < keep.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = probes.matrix().row(keep[i]);
  return PointSet(m);
}

inline SeriesFit fit_series(const StudyResult& r, const MultiIndex& alpha) {
  SeriesFit fit;
  fit.alpha = alpha;
  std::vector<RateSample> samples;
  for (const auto& row : r.rows) {
    if (row.alpha == alpha && row.solved && std::isfinite(row.sup_error)) samples.push_back({row.d, row.sup_error});
  }
  fit.n_samples = static_cast<int>(samples.size());
  try {
    fit.mq = fit_mq_rate(samples);
    fit.decay_exponent = -std::log(fit.mq->lambda_hat);
    if (r.config.kernel.family() == KernelFamily::Gaussian) fit.gaussian = fit_gaussian_rate(samples);
  } catch (const Error& e) {
    fit.failure = e.what();
  }
  return fit;
}

} // namespace detail

template <class Scalar>
StudyResult run_study(const StudyConfig& config) {
  StudyResult result;
  result.config = config;
  const PointSet probes = generate_points(config.domain, PointScheme::grid(config.domain.side() / config.probe_resolution));
  const PointSet interior = detail::interior_probes(config.domain, probes, config.delta);
  const int n_levels = static_cast<int>(config.refinement.levels());
  std::vector<detail::LevelOutcome> outcomes(n_levels);
  const int threads = config.threads > 0 ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  for (int start = 0; start < n_levels; start += threads) {
    std::vector<std::future<detail::LevelOutcome>> batch;
    for (int level = start; level < std::min(n_levels, start + threads); ++level) {
      batch.push_back(std::async(std::launch::async, [&, level] {
        return detail::run_level<Scalar>(config, level, probes, interior);
      }));
    }
    for (int i = 0; i < static_cast<int>(batch.size()); ++i) outcomes[start + i] = batch[i].get();
  }
  std::stable_sort(outcomes.begin(), outcomes.end(), [](const auto& a, const auto& b) { return a.info.d > b.info.d; });

  const int dim = config.domain.dim();
  for (const auto& o : outcomes) {
    result.levels.push_back(o.info);
    for (std::size_t k = 0; k <= config.alphas.size(); ++k) {
      StudyRow row;
      row.level = o.info.level;
      row.d = o.info.d;
      row.N = o.info.N;
      row.alpha = k == 0 ? detail::zero_alpha(dim) : config.alphas[k - 1];
      row.sup_error = o.errors[k];
      row.norm_f = o.info.norm_f;
      row.cond_estimate = o.info.cond_estimate;
      row.solved = o.info.solved;
      row.regime = o.info.solved ? "n/a" : "solver-failure";
      result.rows.push_back(row);
    }
  }
  result.fits.push_back(detail::fit_series(result, detail::zero_alpha(dim)));
  for (const auto& alpha : config.alphas) result.fits.push_back(detail::fit_series(result, alpha));
  return result;
}

inline StudyResult run_study(const StudyConfig& config) {
  return config.precision == Precision::High ? run_study<HighPrecision>(config) : run_study<double>(config);
}

using BaseBoundParams = std::variant<MQBoundParams, GaussianBoundParams>;

inline double base_bound(const BaseBoundParams& p, double d, double norm_f) {
  return std::visit(
      [&](const auto& q) {
        if constexpr (std::is_same_v<std::decay_t<decltype(q)>, MQBoundParams>) {
          return mq_bound(q, d, norm_f);
        } else {
          return gaussian_bound(q, d, norm_f);
        }
      },
      p);
}

namespace detail {

inline const StudyRow* coarsest_solved(const StudyResult& r) {
  for (const auto& row : r.rows) {
    if (row.solved) return &row;
  }
  return nullptr;
}

} // namespace detail

/// Bound parameters from the E0 fit, with the approximand norm divided out
/// of the fitted constant (reference norm: coarsest solved level).
inline BaseBoundParams fitted_base_params(const StudyResult& r) {
  if (r.fits.empty()) throw Error(ErrorCode::InvalidArgument, "missing fits");
  const SeriesFit& fit = r.e0_fit();
  const StudyRow* ref = detail::coarsest_solved(r);
  if (!ref || !(ref->norm_f > 0)) throw Error(ErrorCode::InvalidArgument, "missing fits: approximand norm is zero");
  double d_max = 0;
  for (const auto& row : r.rows) {
    if (row.solved) d_max = std::max(d_max, row.d);
  }
  if (r.config.kernel.family() == KernelFamily::Gaussian) {
    if (!fit.gaussian) throw Error(ErrorCode::InvalidArgument, "missing fits: no Gaussian E0 fit (" + fit.failure + ")");
    GaussianBoundParams p{fit.gaussian->Delta_hat / ref->norm_f, fit.gaussian->G_hat, fit.gaussian->g_hat, d_max};
    p.validate();
    return p;
  }
  if (!fit.mq) throw Error(ErrorCode::InvalidArgument, "missing fits: no MQ E0 fit (" + fit.failure + ")");
  MQBoundParams p{fit.mq->C_hat / ref->norm_f, fit.mq->lambda_hat, d_max, 1.0};
  if (!(p.lambda < 1)) throw Error(ErrorCode::InvalidArgument, "missing fits: E0 does not decay (lambda_hat >= 1)");
  p.validate();
  return p;
}

struct BoundCheckRow {
  int level = 0;
  MultiIndex alpha;
  double d = 0;
  double error = 0;
  double M0 = 0;
  double Ml = 0;
  double Mbar = 0;
  double bound = 0;
  double margin = 0; // bound / error; >= 1 passes
  Regime regime = Regime::SmallD;
  bool calibration = false;
  bool passed = false;
};

struct AlphaCheck {
  MultiIndex alpha;
  double C_alpha = 0;
  int checked = 0; // excluding the calibration row
  int passes = 0;
  double pass_fraction = 0;
  bool passed = false;
};

struct BoundCheckReport {
  std::vector<BoundCheckRow> rows;
  std::vector<AlphaCheck> alphas;
  std::map<std::string, int> regime_counts;
  int large_d_rows() const {
    const auto it = regime_counts.find("large-d");
    return it == regime_counts.end() ? 0 : it->second;
  }
  bool passed = true;
};

/// Calibrates C_alpha on the coarsest solved level (margin exactly 1) and
/// checks E_alpha <= C_alpha M0^(1-k/l) Mbar^(k/l) on the remaining levels,
/// with M0 from the base bound and M_l = Cprime ||f||_h.
inline BoundCheckReport check_bounds(const StudyResult& r, const BaseBoundParams& base, const DerivativeBoundParams& deriv,
                                     double min_pass_fraction) {
  BoundCheckReport report;
  for (const auto& alpha : r.config.alphas) {
    const int k = order(alpha);
    AlphaCheck check;
    check.alpha = alpha;
    bool calibrated = false;
    for (const auto& row : r.rows) {
      if (row.alpha != alpha || !row.solved || !std::isfinite(row.sup_error)) continue;
      BoundCheckRow b;
      b.level = row.level;
      b.alpha = alpha;
      b.d = row.d;
      b.error = row.sup_error;
      b.M0 = base_bound(base, row.d, row.norm_f);
      b.Ml = deriv.Cprime * row.norm_f;
      const auto unit = derivative_bound_relaxed(k, deriv.l, deriv.delta, 1.0, b.M0, b.Ml);
      b.Mbar = unit.m_bar;
      b.regime = unit.regime;
      if (!calibrated) {
        if (!(unit.value > 0) || !(row.sup_error > 0)) continue;
        check.C_alpha = row.sup_error / unit.value;
        b.calibration = true;
        calibrated = true;
      }
      b.bound = check.C_alpha * unit.value;
      b.margin = b.calibration ? 1.0 : (b.error > 0 ? b.bound / b.error : std::numeric_limits<double>::infinity());
      b.passed = b.calibration || b.error <= b.bound;
      if (!b.calibration) {
        ++check.checked;
        check.passes += b.passed;
      }
      ++report.regime_counts[to_string(b.regime)];
      report.rows.push_back(b);
    }
    check.pass_fraction = check.checked > 0 ? static_cast<double>(check.passes) / check.checked : 0.0;
    check.passed = calibrated && check.checked > 0 && check.pass_fraction >= min_pass_fraction;
    report.passed = report.passed && check.passed;
    report.alphas.push_back(check);
  }
  return report;
}

inline BoundCheckReport check_bounds(const StudyResult& r) {
  DerivativeBoundParams deriv;
  deriv.l = r.config.l;
  deriv.delta = r.config.delta;
  deriv.Cprime = r.config.Cprime;
  return check_bounds(r, fitted_base_params(r), deriv, r.config.min_pass_fraction);
}

/// Copies the per-level regime of a bound check into the study rows.
inline void annotate_regimes(StudyResult& r, const BoundCheckReport& report) {
  std::map<int, Regime> by_level;
  for (const auto& b : report.rows) by_level[b.level] = b.regime;
  for (auto& row : r.rows) {
    const auto it = by_level.find(row.level);
    if (row.solved && it != by_level.end()) row.regime = to_string(it->second);
  }
}

/// Decay-rate shape: exponent(E_alpha) >= (1 - |alpha|/l) exponent(E0) (1 - slack).
struct RateCheck {
  MultiIndex alpha;
  double ratio = std::numeric_limits<double>::quiet_NaN(); // exponent(E_alpha) / exponent(E0)
  double required = 0;
  bool passed = false;
};

inline std::vector<RateCheck> check_rates(const StudyResult& r) {
  std::vector<RateCheck> out;
  const double e0 = r.e0_fit().decay_exponent;
  for (std::size_t i = 1; i < r.fits.size(); ++i) {
    RateCheck c;
    c.alpha = r.fits[i].alpha;
    c.required = (1.0 - static_cast<double>(order(c.alpha)) / r.config.l) * (1.0 - r.config.rate_slack);
    if (std::isfinite(e0) && e0 > 0 && std::isfinite(r.fits[i].decay_exponent)) {
      c.ratio = r.fits[i].decay_exponent / e0;
      c.passed = c.ratio >= c.required;
    }
    out.push_back(c);
  }
  return out;
}

/// Spearman rank correlation (average ranks for ties).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int i, int j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t t = i; t <= j; ++t) r[idx[t]] = (i + j) / 2.0 + 1;
      i = j + 1;
    }
    return r;
  };
  if (a.size() != b.size() || a.size() < 2) throw Error(ErrorCode::DegenerateSamples, "need two equal-length samples");
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size()), mean = (n + 1) / 2;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string rows_to_csv(const StudyResult& r) {
  const Kernel& k = r.config.kernel;
  const std::string c = k.family() == KernelFamily::Multiquadric ? format_number(k.c()) : "";
  std::string out = std::string(kRowsHeader) + "\n";
  for (const auto& row : r.rows) {
    out += std::to_string(row.level) + "," + format_number(row.d) + "," + std::to_string(row.N) + "," +
           to_string(k.family()) + "," + format_number(k.beta()) + "," + c + "," + detail::alpha_label(row.alpha) + "," +
           format_number(row.sup_error) + "," + format_number(row.norm_f) + "," + row.regime + "," +
           format_number(row.cond_estimate) + "\n";
  }
  return out;
}

/// One parsed line of a rows CSV.
struct CsvRow {
  int level = 0;
  double d = 0;
  int N = 0;
  std::string kernel;
  std::string alpha;
  double sup_error = 0;
  double norm_f = 0;
  std::string regime;
  double cond_estimate = 0;
};

inline std::vector<CsvRow> rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kRowsHeader) throw Error(ErrorCode::ParseError, "unexpected rows CSV header");
  std::vector<CsvRow> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 11) throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 11 fields");
    try {
      const auto num = [](const std::string& s) {
        std::istringstream is(s);
        is.imbue(std::locale::classic());
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        double v;
        if (!(is >> v) || !is.eof()) throw Error(ErrorCode::ParseError, "bad number '" + s + "'");
        return v;
      };
      out.push_back({std::stoi(f[0]), num(f[1]), std::stoi(f[2]), f[3], f[6], num(f[7]), num(f[8]), f[9], num(f[10])});
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad integer field");
    }
  }
  return out;
}

/// Fit report for the rows with the given alpha label ("0" for E0).
inline FitReport fit_rows(const std::vector<CsvRow>& rows, const std::string& model, const std::string& alpha = "0") {
  std::vector<RateSample> samples;
  std::map<std::string, int> regimes;
  for (const auto& row : rows) {
    if (row.regime == "small-d" || row.regime == "large-d") {
      if (row.alpha != "0") ++regimes[row.regime];
    }
    if (row.alpha == alpha && std::isfinite(row.sup_error)) samples.push_back({row.d, row.sup_error});
  }
  FitReport report;
  if (model == "mq") {
    report = make_fit_report(fit_mq_rate(samples), static_cast<int>(samples.size()));
  } else if (model == "gaussian") {
    report = make_fit_report(fit_gaussian_rate(samples), static_cast<int>(samples.size()));
  } else {
    throw Error(ErrorCode::InvalidArgument, "model must be mq or gaussian");
  }
  report.regime_counts = regimes;
  return report;
}

} // namespace rbfx
