#pragma once

// Cube domains, point sets, fill distance, subcube coverage and node
// generators. Geometry is always carried out in double precision; the
// interpolation layer casts nodes to its own scalar type.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbfx/error.hpp"

namespace rbfx {

using Point = Eigen::VectorXd;

/// Axis-aligned cube [lower, lower + side]^n.
class CubeDomain {
public:
  CubeDomain(std::vector<double> lower, double side) : lower_(std::move(lower)), side_(side) {
    if (lower_.empty()) {
      throw Error(ErrorCode::InvalidArgument, "cube dimension must be at least 1");
    }
    if (!(side_ > 0.0) || !std::isfinite(side_)) {
      throw Error(ErrorCode::InvalidArgument, "cube side must be positive and finite");
    }
    for (double v : lower_) {
      if (!std::isfinite(v)) throw Error(ErrorCode::DomainError, "cube corner is not finite");
    }
  }

  static CubeDomain unit(int dim) { return CubeDomain(std::vector<double>(dim, 0.0), 1.0); }

  int dim() const { return static_cast<int>(lower_.size()); }
  const std::vector<double>& lower() const { return lower_; }
  double side() const { return side_; }
  double lower(int axis) const { return lower_[axis]; }
  double upper(int axis) const { return lower_[axis] + side_; }

  bool contains(const Point& x, double slack = 0.0) const {
    for (int i = 0; i < dim(); ++i) {
      if (x[i] < lower(i) - slack || x[i] > upper(i) + slack) return false;
    }
    return true;
  }

  CubeDomain scaled(double t) const {
    std::vector<double> lo(lower_);
    for (double& v : lo) v *= t;
    return CubeDomain(std::move(lo), side_ * t);
  }

private:
  std::vector<double> lower_;
  double side_;
};

/// Ordered list of pairwise-distinct finite points; row i is x_i.
class PointSet {
public:
  PointSet() = default;

  explicit PointSet(Eigen::MatrixXd points) : points_(std::move(points)) {
    if (points_.cols() < 1) throw Error(ErrorCode::InvalidArgument, "point dimension must be at least 1");
    if (!points_.allFinite()) throw Error(ErrorCode::DomainError, "point set contains non-finite coordinates");
    check_distinct();
  }

  static PointSet from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw Error(ErrorCode::EmptyPointSet, "no points given");
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.front().size()) {
        throw Error(ErrorCode::DimensionMismatch, "ragged point rows");
      }
      for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    }
    return PointSet(std::move(m));
  }

  int dim() const { return static_cast<int>(points_.cols()); }
  int size() const { return static_cast<int>(points_.rows()); }
  bool empty() const { return points_.rows() == 0; }
  Point point(int i) const { return points_.row(i).transpose(); }
  const Eigen::MatrixXd& matrix() const { return points_; }

  PointSet with_point(const Point& y) const {
    Eigen::MatrixXd m(points_.rows() + 1, points_.cols());
    m.topRows(points_.rows()) = points_;
    m.row(points_.rows()) = y.transpose();
    return PointSet(std::move(m));
  }

  PointSet permuted(const std::vector<int>& order) const {
    Eigen::MatrixXd m(points_.rows(), points_.cols());
    for (int i = 0; i < size(); ++i) m.row(i) = points_.row(order[i]);
    return PointSet(std::move(m));
  }

  PointSet scaled(double t) const { return PointSet(points_ * t); }

private:
  void check_distinct() const {
    std::vector<int> order(points_.rows());
    std::iota(order.begin(), order.end(), 0);
    auto lex_less = [&](int a, int b) {
      for (int j = 0; j < points_.cols(); ++j) {
        if (points_(a, j) != points_(b, j)) return points_(a, j) < points_(b, j);
      }
      return false;
    };
    std::sort(order.begin(), order.end(), lex_less);
    for (std::size_t i = 1; i < order.size(); ++i) {
      if (!lex_less(order[i - 1], order[i])) {
        throw Error(ErrorCode::DuplicatePoints,
                    "points " + std::to_string(order[i - 1]) + " and " + std::to_string(order[i]) +
                        " coincide");
      }
    }
  }

  Eigen::MatrixXd points_;
};

namespace detail {

// Calls fn(point) for every vertex of the r^n cell grid and every cell center.
template <class Fn>
void for_each_sample(const CubeDomain& domain, int r, Fn&& fn) {
  const int n = domain.dim();
  const double h = domain.side() / r;
  for (int pass = 0; pass < 2; ++pass) {
    const int count = pass == 0 ? r + 1 : r;
    const double offset = pass == 0 ? 0.0 : 0.5 * h;
    std::vector<int> idx(n, 0);
    Point y(n);
    while (true) {
      for (int i = 0; i < n; ++i) y[i] = domain.lower(i) + offset + idx[i] * h;
      fn(y);
      int axis = 0;
      while (axis < n && ++idx[axis] == count) idx[axis++] = 0;
      if (axis == n) break;
    }
  }
}

inline double nearest_distance(const Eigen::MatrixXd& nodes, const Point& y) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
    best = std::min(best, (nodes.row(i).transpose() - y).squaredNorm());
  }
  return std::sqrt(best);
}

} // namespace detail

/// Default per-axis sampling resolution for fill_distance.
inline int default_fill_resolution(int dim) { return dim <= 2 ? 128 : 32; }

/// Sampled fill distance: the largest nearest-node distance over the vertices
/// and cell centers of an r^n grid on the domain. This is a lower bound on the
/// true supremum and converges to it as r grows; the gap is at most half the
/// grid cell diameter.
inline double fill_distance(const CubeDomain& domain, const PointSet& nodes, int resolution) {
  if (nodes.empty()) throw Error(ErrorCode::EmptyPointSet, "fill distance of empty set");
  if (nodes.dim() != domain.dim()) throw Error(ErrorCode::DimensionMismatch, "nodes vs domain");
  if (resolution < 1) throw Error(ErrorCode::InvalidArgument, "resolution must be positive");
  double worst = 0.0;
  detail::for_each_sample(domain, resolution, [&](const Point& y) {
    worst = std::max(worst, detail::nearest_distance(nodes.matrix(), y));
  });
  return worst;
}

/// Lattice sampler for the subcube condition: every cube of side 2d whose
/// corner lies on the step-d lattice of E (plus the positions flush with the
/// upper faces) must contain a node. Necessary for the continuum condition,
/// not sufficient; `lattice_refinement` > 1 divides the lattice step to
/// tighten the sampler.
inline bool coverage_check(const CubeDomain& cube, const PointSet& nodes, double d,
                           int lattice_refinement = 1) {
  if (!(d > 0.0) || 2.0 * d > cube.side() * (1.0 + 1e-12)) {
    throw Error(ErrorCode::OutOfRange, "coverage requires 0 < 2d <= side");
  }
  if (lattice_refinement < 1) throw Error(ErrorCode::InvalidArgument, "lattice refinement must be >= 1");
  if (nodes.dim() != cube.dim()) throw Error(ErrorCode::DimensionMismatch, "nodes vs cube");
  const int n = cube.dim();
  const double width = std::min(2.0 * d, cube.side());

  // Corner offsets along one axis (same for every axis, relative to lower).
  std::vector<double> offsets;
  const double last = cube.side() - width;
  for (int k = 0;; ++k) {
    const double o = k * d / lattice_refinement;
    if (o > last * (1.0 + 1e-12) + 1e-15) break;
    offsets.push_back(std::min(o, last));
  }
  if (offsets.empty() || offsets.back() < last) offsets.push_back(last);

  const double tol = 1e-12 * cube.side();
  std::vector<std::size_t> idx(n, 0);
  while (true) {
    bool hit = false;
    for (int p = 0; p < nodes.size() && !hit; ++p) {
      bool inside = true;
      for (int i = 0; i < n && inside; ++i) {
        const double lo = cube.lower(i) + offsets[idx[i]];
        const double x = nodes.matrix()(p, i);
        inside = x >= lo - tol && x <= lo + width + tol;
      }
      hit = inside;
    }
    if (!hit) return false;
    int axis = 0;
    while (axis < n && ++idx[axis] == offsets.size()) idx[axis++] = 0;
    if (axis == n) break;
  }
  return true;
}

/// Node generation scheme.
struct PointScheme {
  enum class Kind { Grid, Halton, Random };
  Kind kind = Kind::Grid;
  double spacing = 0.0;
  int count = 0;
  std::uint64_t seed = 0;

  static PointScheme grid(double spacing) { return {Kind::Grid, spacing, 0, 0}; }
  static PointScheme halton(int count) { return {Kind::Halton, 0.0, count, 0}; }
  static PointScheme random(int count, std::uint64_t seed) { return {Kind::Random, 0.0, count, seed}; }
};

/// Radical inverse of i in the given base.
inline double radical_inverse(std::uint64_t i, int base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

inline std::vector<int> first_primes(int count) {
  std::vector<int> primes;
  for (int c = 2; static_cast<int>(primes.size()) < count; ++c) {
    bool prime = true;
    for (int p : primes) {
      if (p * p > c) break;
      if (c % p == 0) { prime = false; break; }
    }
    if (prime) primes.push_back(c);
  }
  return primes;
}

/// Uniform double in [0, 1) from the top 53 bits; portable across standard
/// libraries, unlike std::uniform_real_distribution.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Grid: lattice with faces included and step at most `spacing` (the side is
/// split into ceil(side / spacing) equal intervals). Halton: points 1..count of
/// the Halton sequence with the first n primes as bases. Random: i.i.d.
/// uniform from a seeded mt19937_64.
inline PointSet generate_points(const CubeDomain& domain, const PointScheme& scheme) {
  const int n = domain.dim();
  switch (scheme.kind) {
  case PointScheme::Kind::Grid: {
    if (!(scheme.spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid spacing must be positive");
    const int intervals = std::max(1, static_cast<int>(std::ceil(domain.side() / scheme.spacing - 1e-9)));
    const double step = domain.side() / intervals;
    int total = 1;
    for (int i = 0; i < n; ++i) total *= intervals + 1;
    Eigen::MatrixXd m(total, n);
    std::vector<int> idx(n, 0);
    for (int row = 0; row < total; ++row) {
      for (int i = 0; i < n; ++i) {
        m(row, i) = idx[i] == intervals ? domain.upper(i) : domain.lower(i) + idx[i] * step;
      }
      int axis = 0;
      while (axis < n && ++idx[axis] == intervals + 1) idx[axis++] = 0;
    }
    return PointSet(std::move(m));
  }
  case PointScheme::Kind::Halton: {
    if (scheme.count < 1) throw Error(ErrorCode::InvalidArgument, "halton count must be positive");
    const auto bases = first_primes(n);
    Eigen::MatrixXd m(scheme.count, n);
    for (int k = 0; k < scheme.count; ++k) {
      for (int i = 0; i < n; ++i) {
        m(k, i) = domain.lower(i) + domain.side() * radical_inverse(k + 1, bases[i]);
      }
    }
    return PointSet(std::move(m));
  }
  case PointScheme::Kind::Random: {
    if (scheme.count < 1) throw Error(ErrorCode::InvalidArgument, "random count must be positive");
    std::mt19937_64 rng(scheme.seed);
    Eigen::MatrixXd m(scheme.count, n);
    for (int k = 0; k < scheme.count; ++k) {
      for (int i = 0; i < n; ++i) m(k, i) = domain.lower(i) + domain.side() * unit_uniform(rng);
    }
    return PointSet(std::move(m));
  }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown point scheme");
}

/// CSV: one point per row, coordinates only, '.' decimal, no header, LF.
inline std::string to_csv(const PointSet& points) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << std::setprecision(17);
  for (int i = 0; i < points.size(); ++i) {
    for (int j = 0; j < points.dim(); ++j) {
      if (j) out << ',';
      out << points.matrix()(i, j);
    }
    out << '\n';
  }
  return out.str();
}

inline PointSet point_set_from_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream fields(line);
    fields.imbue(std::locale::classic());
    std::string field;
    while (std::getline(fields, field, ',')) {
      std::istringstream value(field);
      value.imbue(std::locale::classic());
      double v = 0.0;
      if (!(value >> v)) throw Error(ErrorCode::ParseError, "bad coordinate '" + field + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  return PointSet::from_rows(rows);
}

inline void write_csv(const PointSet& points, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
  out << to_csv(points);
}

inline PointSet read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return point_set_from_csv(buffer.str());
}

} // namespace rbfx
