#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>
#include <utility>
#include <vector>

#include "conformal/data.hpp"
#include "conformal/errors.hpp"
#include "conformal/models.hpp"

namespace conformal {

enum class score_kind { l2, mahalanobis, max };
enum class modulation_kind { identity, stdev, alpha_max };

inline const char* score_name(score_kind s) {
  switch (s) {
    case score_kind::l2: return "l2";
    case score_kind::mahalanobis: return "mahalanobis";
    case score_kind::max: return "max";
  }
  return "?";
}

inline const char* modulation_name(modulation_kind m) {
  switch (m) {
    case modulation_kind::identity: return "identity";
    case modulation_kind::stdev: return "st-dev";
    case modulation_kind::alpha_max: return "alpha-max";
  }
  return "?";
}

// Fitted modulation values never drop below this floor, so scores stay finite
// on exactly-interpolated training data.
inline constexpr double kModulationFloor = 1e-12;

namespace detail {

// Order-statistic indices of the form ceil(a*(n+1)) are computed from real
// arithmetic whose mathematically exact value is often an integer; a bare
// ceil/floor would then be off by one from rounding noise.
inline long long ceil_index(double v) { return static_cast<long long>(std::ceil(v - 1e-9)); }
inline long long floor_index(double v) { return static_cast<long long>(std::floor(v + 1e-9)); }

inline double trapezoid(const Vector& grid, const Vector& vals) {
  double acc = 0.0;
  for (Index t = 1; t < grid.size(); ++t)
    acc += 0.5 * (vals[t] + vals[t - 1]) * (grid[t] - grid[t - 1]);
  return acc;
}

inline void check_modulation(const Vector& s) {
  for (Index j = 0; j < s.size(); ++j)
    require(s[j] > 0.0, errc::non_positive_modulation, "modulation must be strictly positive");
}

// k-th smallest (1-based) of a copy of the values.
inline double kth_smallest(std::vector<double> v, std::size_t k) {
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
  return v[k - 1];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Nonconformity scores
// ---------------------------------------------------------------------------

// Multivariate residual score. l2 and max divide the residual by the
// modulation componentwise; mahalanobis is the unmodulated quadratic form.
inline double score_multi(score_kind kind, const Vector& r, const Vector& s,
                          const Matrix* cov_inv = nullptr) {
  switch (kind) {
    case score_kind::l2: {
      detail::check_modulation(s);
      return (r.array() / s.array()).matrix().norm();
    }
    case score_kind::max: {
      detail::check_modulation(s);
      return (r.array().abs() / s.array()).maxCoeff();
    }
    case score_kind::mahalanobis: {
      require(cov_inv != nullptr, errc::missing_covariance,
              "mahalanobis score needs an inverse residual covariance");
      return r.dot(*cov_inv * r);
    }
  }
  return 0.0;
}

// Functional sup score: max over components of the grid-max of |r|/s.
inline double score_fun(const CurveSet& r, const CurveSet& s) {
  require(r.size() == s.size(), errc::grid_mismatch,
          "residual and modulation component counts differ");
  double best = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) {
    require(r[j].size() == s[j].size(), errc::grid_mismatch,
            "residual and modulation grids differ on component " + std::to_string(j));
    detail::check_modulation(s[j]);
    best = std::max(best, (r[j].array().abs() / s[j].array()).maxCoeff());
  }
  return best;
}

// Conformity: the inverse of the sup-modulated score; a zero score is
// perfectly conformal.
inline double conformity_max(double score) {
  return score == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / score;
}

inline double conformity_max(const Vector& r, const Vector& s) {
  return conformity_max(score_multi(score_kind::max, r, s));
}

inline double conformity_max(const CurveSet& r, const CurveSet& s) {
  return conformity_max(score_fun(r, s));
}

// ---------------------------------------------------------------------------
// Modulation fitting
// ---------------------------------------------------------------------------

namespace detail {

inline double sample_sd(const Vector& v) {
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

// gamma = the ceil((m+1)(1-alpha))-th smallest sup-score, clamped to the
// largest when the index overflows m.
inline double alpha_max_gamma(const std::vector<double>& sups, double alpha) {
  const auto m = static_cast<long long>(sups.size());
  long long k = ceil_index(static_cast<double>(m + 1) * (1.0 - alpha));
  k = std::clamp<long long>(k, 1, m);
  return kth_smallest(sups, static_cast<std::size_t>(k));
}

}  // namespace detail

// Multivariate modulation from a residual matrix (one row per observation).
// identity: s = 1. st-dev: per-component sample standard deviation.
// alpha-max: componentwise max over the non-extreme observations H1, scaled so
// the components sum to one.
inline Vector fit_modulation_multi(modulation_kind kind, const Matrix& residuals, double alpha) {
  const Index q = residuals.cols();
  switch (kind) {
    case modulation_kind::identity:
      return Vector::Ones(q);
    case modulation_kind::stdev: {
      require(residuals.rows() >= 2, errc::too_few_residuals,
              "st-dev modulation needs at least 2 residuals");
      Vector s(q);
      for (Index j = 0; j < q; ++j)
        s[j] = std::max(detail::sample_sd(residuals.col(j)), kModulationFloor);
      return s;
    }
    case modulation_kind::alpha_max: {
      require(residuals.rows() >= 1, errc::too_few_residuals,
              "alpha-max modulation needs at least 1 residual");
      require(alpha > 0.0 && alpha < 1.0, errc::bad_alpha, "alpha must lie in (0,1)");
      std::vector<double> sups(static_cast<std::size_t>(residuals.rows()));
      for (Index h = 0; h < residuals.rows(); ++h)
        sups[static_cast<std::size_t>(h)] = residuals.row(h).array().abs().maxCoeff();
      const double gamma = detail::alpha_max_gamma(sups, alpha);
      Vector comp_max = Vector::Zero(q);
      for (Index h = 0; h < residuals.rows(); ++h) {
        if (sups[static_cast<std::size_t>(h)] > gamma) continue;
        comp_max = comp_max.cwiseMax(residuals.row(h).array().abs().matrix().transpose());
      }
      const double norm = comp_max.sum();
      Vector s(q);
      for (Index j = 0; j < q; ++j)
        s[j] = norm > 0.0 ? std::max(comp_max[j] / norm, kModulationFloor) : kModulationFloor;
      return s;
    }
  }
  return Vector::Ones(q);
}

// Functional modulation from residual curve sets. st-dev is the pointwise
// standard deviation curve; alpha-max normalizes by the summed trapezoidal
// integral of the componentwise H1 envelopes.
inline CurveSet fit_modulation_fd(modulation_kind kind, const std::vector<CurveSet>& residuals,
                                  double alpha, const std::vector<Vector>& grids) {
  const std::size_t q = grids.size();
  CurveSet s(q);
  switch (kind) {
    case modulation_kind::identity: {
      for (std::size_t j = 0; j < q; ++j) s[j] = Vector::Ones(grids[j].size());
      return s;
    }
    case modulation_kind::stdev: {
      require(residuals.size() >= 2, errc::too_few_residuals,
              "st-dev modulation needs at least 2 residuals");
      for (std::size_t j = 0; j < q; ++j) {
        Vector curve(grids[j].size());
        Vector column(static_cast<Index>(residuals.size()));
        for (Index t = 0; t < grids[j].size(); ++t) {
          for (std::size_t h = 0; h < residuals.size(); ++h)
            column[static_cast<Index>(h)] = residuals[h][j][t];
          curve[t] = std::max(detail::sample_sd(column), kModulationFloor);
        }
        s[j] = std::move(curve);
      }
      return s;
    }
    case modulation_kind::alpha_max: {
      require(!residuals.empty(), errc::too_few_residuals,
              "alpha-max modulation needs at least 1 residual");
      require(alpha > 0.0 && alpha < 1.0, errc::bad_alpha, "alpha must lie in (0,1)");
      std::vector<double> sups(residuals.size(), 0.0);
      for (std::size_t h = 0; h < residuals.size(); ++h)
        for (std::size_t j = 0; j < q; ++j)
          sups[h] = std::max(sups[h], residuals[h][j].array().abs().maxCoeff());
      const double gamma = detail::alpha_max_gamma(sups, alpha);
      CurveSet envelope(q);
      for (std::size_t j = 0; j < q; ++j) envelope[j] = Vector::Zero(grids[j].size());
      for (std::size_t h = 0; h < residuals.size(); ++h) {
        if (sups[h] > gamma) continue;
        for (std::size_t j = 0; j < q; ++j)
          envelope[j] = envelope[j].cwiseMax(residuals[h][j].array().abs().matrix());
      }
      double norm = 0.0;
      for (std::size_t j = 0; j < q; ++j) norm += detail::trapezoid(grids[j], envelope[j]);
      for (std::size_t j = 0; j < q; ++j) {
        s[j] = Vector(grids[j].size());
        for (Index t = 0; t < grids[j].size(); ++t)
          s[j][t] = norm > 0.0 ? std::max(envelope[j][t] / norm, kModulationFloor)
                               : kModulationFloor;
      }
      return s;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Residual covariance for the mahalanobis score
// ---------------------------------------------------------------------------

struct ResidualCovariance {
  Matrix cov;  // regularized sample covariance
  Matrix inv;
};

// Sample covariance of the residual rows, nudged to positive definite when
// needed, then inverted.
inline ResidualCovariance residual_covariance(const Matrix& residuals) {
  require(residuals.rows() >= 2, errc::too_few_residuals,
          "covariance needs at least 2 residuals");
  const Index q = residuals.cols();
  Matrix centered = residuals.rowwise() - residuals.colwise().mean();
  Matrix cov = centered.transpose() * centered / static_cast<double>(residuals.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const double max_ev = eig.eigenvalues().maxCoeff();
  if (eig.eigenvalues().minCoeff() <= 1e-12 * std::max(max_ev, 1.0)) {
    const double eps = std::max(1e-8 * cov.trace() / static_cast<double>(q), 1e-12);
    cov += eps * Matrix::Identity(q, q);
  }
  Matrix inv = cov.llt().solve(Matrix::Identity(q, q));
  return ResidualCovariance{std::move(cov), std::move(inv)};
}

namespace detail {

// Middle order statistics of the finite entries; pooled multi-split bounds
// can carry the +-inf radius sentinel, which must not poison the conformity
// center. The two middle values are kept separate: deviations measured as
// |(x - m1) + (x - m2)| / 2 are exactly symmetric for a (lo, up) pair that
// happens to be the two middle values, so paired bounds tie exactly instead
// of being split apart by midpoint rounding.
inline std::pair<double, double> finite_median_pair(std::vector<double>& scratch) {
  scratch.erase(std::remove_if(scratch.begin(), scratch.end(),
                               [](double v) { return !std::isfinite(v); }),
                scratch.end());
  if (scratch.empty()) return {0.0, 0.0};
  std::sort(scratch.begin(), scratch.end());
  const std::size_t n = scratch.size();
  if (n % 2 == 1) return {scratch[n / 2], scratch[n / 2]};
  return {scratch[n / 2 - 1], scratch[n / 2]};
}

inline double finite_median(std::vector<double>& scratch) {
  const auto [m1, m2] = finite_median_pair(scratch);
  return 0.5 * (m1 + m2);
}

// Sample sd of the finite entries, floored; scale 1 when fewer than two
// finite values remain.
inline double finite_scale(std::vector<double>& scratch) {
  scratch.erase(std::remove_if(scratch.begin(), scratch.end(),
                               [](double v) { return !std::isfinite(v); }),
                scratch.end());
  if (scratch.size() < 2) return 1.0;
  Eigen::Map<const Vector> v(scratch.data(), static_cast<Index>(scratch.size()));
  return std::max(sample_sd(v), kModulationFloor);
}

}  // namespace detail

// Conformity center for the jackknife+ and multi-split level sets: the
// componentwise pair of middle order statistics (both equal for odd counts).
struct MedianPair {
  Vector m1;
  Vector m2;

  Vector midpoint() const { return 0.5 * (m1 + m2); }
};

inline MedianPair componentwise_median_pair(const std::vector<Vector>& points) {
  require(!points.empty(), errc::empty_set, "median of an empty set");
  const Index q = points.front().size();
  MedianPair med{Vector(q), Vector(q)};
  std::vector<double> col(points.size());
  for (Index j = 0; j < q; ++j) {
    for (std::size_t i = 0; i < points.size(); ++i) col[i] = points[i][j];
    std::tie(med.m1[j], med.m2[j]) = detail::finite_median_pair(col);
    col.resize(points.size());
  }
  return med;
}

inline Vector componentwise_median(const std::vector<Vector>& points) {
  return componentwise_median_pair(points).midpoint();
}

struct CurveMedianPair {
  CurveSet m1;
  CurveSet m2;
};

inline CurveMedianPair pointwise_median_pair(const std::vector<CurveSet>& curves) {
  require(!curves.empty(), errc::empty_set, "median of an empty set");
  CurveMedianPair med;
  med.m1.resize(curves.front().size());
  med.m2.resize(curves.front().size());
  std::vector<double> vals(curves.size());
  for (std::size_t j = 0; j < med.m1.size(); ++j) {
    med.m1[j] = Vector(curves.front()[j].size());
    med.m2[j] = Vector(curves.front()[j].size());
    for (Index t = 0; t < med.m1[j].size(); ++t) {
      for (std::size_t i = 0; i < curves.size(); ++i) vals[i] = curves[i][j][t];
      const auto [a, b] = detail::finite_median_pair(vals);
      med.m1[j][t] = a;
      med.m2[j][t] = b;
      vals.resize(curves.size());
    }
  }
  return med;
}

inline CurveSet pointwise_median(const std::vector<CurveSet>& curves) {
  const auto pair = pointwise_median_pair(curves);
  CurveSet mid(pair.m1.size());
  for (std::size_t j = 0; j < mid.size(); ++j) mid[j] = 0.5 * (pair.m1[j] + pair.m2[j]);
  return mid;
}

// Per-component spread of a pooled point set that may contain the infinite
// radius sentinel.
inline Vector pool_scale(const std::vector<Vector>& points) {
  require(!points.empty(), errc::empty_set, "scale of an empty set");
  const Index q = points.front().size();
  Vector s(q);
  std::vector<double> col(points.size());
  for (Index j = 0; j < q; ++j) {
    for (std::size_t i = 0; i < points.size(); ++i) col[i] = points[i][j];
    s[j] = detail::finite_scale(col);
    col.resize(points.size());
  }
  return s;
}

inline CurveSet pool_scale(const std::vector<CurveSet>& curves) {
  require(!curves.empty(), errc::empty_set, "scale of an empty set");
  CurveSet s(curves.front().size());
  std::vector<double> vals(curves.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    s[j] = Vector(curves.front()[j].size());
    for (Index t = 0; t < s[j].size(); ++t) {
      for (std::size_t i = 0; i < curves.size(); ++i) vals[i] = curves[i][j][t];
      s[j][t] = detail::finite_scale(vals);
      vals.resize(curves.size());
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Extended quantile (conformity level set)
// ---------------------------------------------------------------------------

namespace detail {

// Indices of the k smallest scores; stable, so ties keep the first occurrence
// in input order. The returned indices are sorted ascending.
inline std::vector<std::size_t> most_conformal(const std::vector<double>& scores, std::size_t k) {
  require(k >= 1 && k <= scores.size(), errc::bad_level,
          "level count " + std::to_string(k) + " outside [1, " + std::to_string(scores.size()) +
              "]");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace detail

namespace detail {

// Deviation from a split center: |(x - m1) + (x - m2)| / 2 equals the
// distance to the midpoint but stays exactly symmetric under fp rounding
// for the two middle values themselves.
inline Vector pair_deviation(const Vector& x, const Vector& m1, const Vector& m2) {
  Vector d(x.size());
  for (Index j = 0; j < x.size(); ++j) d[j] = 0.5 * ((x[j] - m1[j]) + (x[j] - m2[j]));
  return d;
}

}  // namespace detail

// Ranks points by the conformity of (point - center) under the sup-modulated
// score and keeps the k most conformal; returns their input indices.
inline std::vector<std::size_t> extended_quantile(const std::vector<Vector>& points,
                                                  std::size_t k, const Vector& s,
                                                  const MedianPair& center) {
  std::vector<double> scores(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    scores[i] =
        score_multi(score_kind::max, detail::pair_deviation(points[i], center.m1, center.m2), s);
  return detail::most_conformal(scores, k);
}

inline std::vector<std::size_t> extended_quantile(const std::vector<Vector>& points,
                                                  std::size_t k, const Vector& s,
                                                  const Vector& center) {
  return extended_quantile(points, k, s, MedianPair{center, center});
}

inline std::vector<std::size_t> extended_quantile(const std::vector<CurveSet>& points,
                                                  std::size_t k, const CurveSet& s,
                                                  const CurveMedianPair& center) {
  std::vector<double> scores(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    CurveSet diff(points[i].size());
    for (std::size_t j = 0; j < points[i].size(); ++j)
      diff[j] = detail::pair_deviation(points[i][j], center.m1[j], center.m2[j]);
    scores[i] = score_fun(diff, s);
  }
  return detail::most_conformal(scores, k);
}

inline std::vector<std::size_t> extended_quantile(const std::vector<CurveSet>& points,
                                                  std::size_t k, const CurveSet& s,
                                                  const CurveSet& center) {
  return extended_quantile(points, k, s, CurveMedianPair{center, center});
}

// ---------------------------------------------------------------------------
// Jackknife+ order statistics
// ---------------------------------------------------------------------------

// Calibration rank of the classical split method: k = ceil((l+1)(1-alpha)).
inline long long split_rank(std::size_t l, double alpha) {
  return detail::ceil_index(static_cast<double>(l + 1) * (1.0 - alpha));
}

// Smoothed rank k = ceil(l + tau - (l+1)alpha); tau = 1 recovers the
// classical rank.
inline long long split_rank_smoothed(std::size_t l, double alpha, double tau) {
  return detail::ceil_index(static_cast<double>(l) + tau - static_cast<double>(l + 1) * alpha);
}

namespace detail {

// d = k-th smallest calibration score; out-of-range ranks collapse to the
// sentinel radii (0 below, +inf above).
inline double split_radius(const std::vector<double>& scores, long long k) {
  if (k < 1) return 0.0;
  if (k > static_cast<long long>(scores.size())) return std::numeric_limits<double>::infinity();
  return kth_smallest(scores, static_cast<std::size_t>(k));
}

}  // namespace detail

struct JackknifeBounds {
  double lower;
  double upper;
};

// lower = floor(alpha*(n+1))-th smallest (index 0 -> -inf),
// upper = ceil((1-alpha)*(n+1))-th smallest (index > n -> +inf).
inline JackknifeBounds jk_quantiles(std::vector<double> values, double alpha) {
  require(!values.empty(), errc::empty_set, "jackknife quantiles need at least one value");
  require(alpha > 0.0 && alpha < 1.0, errc::bad_alpha, "alpha must lie in (0,1)");
  const auto n = static_cast<long long>(values.size());
  std::sort(values.begin(), values.end());
  const long long lo_idx = detail::floor_index(alpha * static_cast<double>(n + 1));
  const long long up_idx = detail::ceil_index((1.0 - alpha) * static_cast<double>(n + 1));
  JackknifeBounds out{};
  out.lower = lo_idx < 1 ? -std::numeric_limits<double>::infinity()
                         : values[static_cast<std::size_t>(lo_idx - 1)];
  out.upper = up_idx > n ? std::numeric_limits<double>::infinity()
                         : values[static_cast<std::size_t>(up_idx - 1)];
  return out;
}

// ---------------------------------------------------------------------------
// Axis-aligned bounding boxes
// ---------------------------------------------------------------------------

inline std::pair<Vector, Vector> bounding_box(const std::vector<Vector>& points) {
  require(!points.empty(), errc::empty_set, "bounding box of an empty set");
  Vector lo = points.front();
  Vector up = points.front();
  for (const auto& pt : points) {
    lo = lo.cwiseMin(pt);
    up = up.cwiseMax(pt);
  }
  return {lo, up};
}

inline std::pair<CurveSet, CurveSet> bounding_box(const std::vector<CurveSet>& curves) {
  require(!curves.empty(), errc::empty_set, "bounding box of an empty set");
  CurveSet lo = curves.front();
  CurveSet up = curves.front();
  for (const auto& cs : curves)
    for (std::size_t j = 0; j < cs.size(); ++j) {
      lo[j] = lo[j].cwiseMin(cs[j]);
      up[j] = up[j].cwiseMax(cs[j]);
    }
  return {lo, up};
}


}  // namespace conformal
