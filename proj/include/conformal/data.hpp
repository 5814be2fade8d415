#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "conformal/errors.hpp"
#include "conformal/rng.hpp"

namespace conformal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class method_kind { full, split, msplit, jackplus };

inline const char* method_name(method_kind m) {
  switch (m) {
    case method_kind::full: return "full";
    case method_kind::split: return "split";
    case method_kind::msplit: return "msplit";
    case method_kind::jackplus: return "jackplus";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

// n x p features paired with n x q responses.
struct TabularDataset {
  Matrix x;
  Matrix y;

  Index n() const { return x.rows(); }
  Index p() const { return x.cols(); }
  Index q() const { return y.cols(); }
};

inline TabularDataset validate_tabular(Matrix x, Matrix y) {
  require(x.rows() == y.rows(), errc::dimension_mismatch,
          "x has " + std::to_string(x.rows()) + " rows but y has " + std::to_string(y.rows()));
  require(x.rows() >= 2, errc::too_few_rows,
          "need at least 2 observations, got " + std::to_string(x.rows()));
  require(x.allFinite(), errc::non_finite, "x contains NaN or infinite entries");
  require(y.allFinite(), errc::non_finite, "y contains NaN or infinite entries");
  return TabularDataset{std::move(x), std::move(y)};
}

// Per-observation response curves: n observations, q components, each
// component evaluated on a shared strictly increasing grid.
struct FunctionalDataset {
  std::vector<std::vector<Vector>> y;  // n x q evaluation vectors
  std::vector<Vector> grids;           // q grids

  std::size_t n() const { return y.size(); }
  std::size_t q() const { return grids.size(); }
};

inline void check_grid(const Vector& grid, const std::string& where) {
  require(grid.size() >= 2, errc::grid_mismatch, where + ": grid needs at least 2 points");
  require(grid.allFinite(), errc::non_finite, where + ": grid contains non-finite values");
  for (Index t = 1; t < grid.size(); ++t)
    require(grid[t] > grid[t - 1], errc::grid_mismatch, where + ": grid not strictly increasing");
}

inline FunctionalDataset validate_functional(std::vector<std::vector<Vector>> curves,
                                             std::vector<Vector> grids) {
  require(!grids.empty(), errc::grid_mismatch, "no response grids given");
  for (std::size_t j = 0; j < grids.size(); ++j)
    check_grid(grids[j], "component " + std::to_string(j));
  require(!curves.empty(), errc::too_few_rows, "no observations");
  for (std::size_t i = 0; i < curves.size(); ++i) {
    require(curves[i].size() == grids.size(), errc::dimension_mismatch,
            "observation " + std::to_string(i) + " has " + std::to_string(curves[i].size()) +
                " components, expected " + std::to_string(grids.size()));
    for (std::size_t j = 0; j < grids.size(); ++j) {
      require(curves[i][j].size() == grids[j].size(), errc::grid_mismatch,
              "observation " + std::to_string(i) + ", component " + std::to_string(j) +
                  ": " + std::to_string(curves[i][j].size()) + " evaluations on a " +
                  std::to_string(grids[j].size()) + "-point grid");
      require(curves[i][j].allFinite(), errc::non_finite,
              "observation " + std::to_string(i) + ", component " + std::to_string(j) +
                  " contains non-finite values");
    }
  }
  return FunctionalDataset{std::move(curves), std::move(grids)};
}

inline Matrix select_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(rows[i]));
  return out;
}

inline FunctionalDataset select_obs(const FunctionalDataset& ds,
                                    const std::vector<std::size_t>& rows) {
  FunctionalDataset out;
  out.grids = ds.grids;
  out.y.reserve(rows.size());
  for (std::size_t i : rows) out.y.push_back(ds.y[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Train / calibration split
// ---------------------------------------------------------------------------

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> calib;

  std::size_t m() const { return train.size(); }
  std::size_t l() const { return calib.size(); }
};

// |train| = round(rho * n), clamped so both parts stay nonempty. The seed
// fully determines the partition; an explicit training set overrides both
// rho and seed.
inline SplitIndices make_split(std::size_t n, double rho, std::uint64_t seed,
                               const std::optional<std::vector<std::size_t>>& explicit_train = {}) {
  require(n >= 2, errc::too_few_rows, "cannot split fewer than 2 observations");
  if (explicit_train) {
    const auto& sel = *explicit_train;
    require(!sel.empty() && sel.size() < n, errc::bad_explicit,
            "explicit training set must be a nonempty proper subset");
    std::vector<bool> taken(n, false);
    for (std::size_t i : sel) {
      require(i < n, errc::bad_explicit, "explicit index " + std::to_string(i) + " out of range");
      require(!taken[i], errc::bad_explicit, "explicit index " + std::to_string(i) + " repeated");
      taken[i] = true;
    }
    SplitIndices out;
    for (std::size_t i = 0; i < n; ++i) (taken[i] ? out.train : out.calib).push_back(i);
    return out;
  }
  require(rho > 0.0 && rho < 1.0, errc::bad_rho, "rho must lie in (0,1)");
  const auto m = static_cast<std::size_t>(std::clamp<long long>(
      std::llround(rho * static_cast<double>(n)), 1, static_cast<long long>(n) - 1));
  std::mt19937_64 gen(seed);
  auto perm = random_permutation(n, gen);
  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
  out.calib.assign(perm.begin() + static_cast<std::ptrdiff_t>(m), perm.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.calib.begin(), out.calib.end());
  return out;
}

// ---------------------------------------------------------------------------
// Prediction regions
// ---------------------------------------------------------------------------

// Box region per test point, plus the exact score geometry when the score
// ball is not a box (l2 / mahalanobis split regions): the lo/up box then
// circumscribes the ball or ellipsoid, and size/membership use the exact set.
struct MultiRegion {
  enum class geometry { box, ball, ellipsoid };

  Vector pred;
  Vector lo;
  Vector up;
  double alpha = 0.0;
  method_kind method = method_kind::split;
  geometry geom = geometry::box;
  double radius = 0.0;  // score threshold d for ball/ellipsoid
  Vector scale;         // per-component modulation for ball
  Matrix cov_inv;       // inverse residual covariance for ellipsoid

  Index q() const { return lo.size(); }
};

inline double unit_ball_volume(Index q) {
  const double qd = static_cast<double>(q);
  return std::pow(std::acos(-1.0), qd / 2.0) / std::tgamma(qd / 2.0 + 1.0);
}

inline double region_size(const MultiRegion& r) {
  switch (r.geom) {
    case MultiRegion::geometry::ball: {
      double v = unit_ball_volume(r.q());
      for (Index j = 0; j < r.q(); ++j) v *= r.radius * r.scale[j];
      return v;
    }
    case MultiRegion::geometry::ellipsoid: {
      const double det_inv = r.cov_inv.determinant();
      return unit_ball_volume(r.q()) * std::pow(r.radius, static_cast<double>(r.q()) / 2.0) /
             std::sqrt(det_inv);
    }
    case MultiRegion::geometry::box:
      break;
  }
  double v = 1.0;
  for (Index j = 0; j < r.q(); ++j) {
    const double w = r.up[j] - r.lo[j];
    if (w < 0.0) return 0.0;  // empty region
    v *= w;
  }
  return v;
}

inline bool region_contains(const MultiRegion& r, const Vector& y) {
  switch (r.geom) {
    case MultiRegion::geometry::ball: {
      double ss = 0.0;
      for (Index j = 0; j < r.q(); ++j) {
        const double z = (y[j] - r.pred[j]) / r.scale[j];
        ss += z * z;
      }
      return std::sqrt(ss) <= r.radius;
    }
    case MultiRegion::geometry::ellipsoid: {
      const Vector d = y - r.pred;
      return d.dot(r.cov_inv * d) <= r.radius;
    }
    case MultiRegion::geometry::box:
      break;
  }
  for (Index j = 0; j < r.q(); ++j)
    if (y[j] < r.lo[j] || y[j] > r.up[j]) return false;
  return true;
}

// Simultaneous band for a functional response: per-component bound curves on
// the response grids.
struct FunctionalBand {
  std::vector<Vector> t;     // q grids
  std::vector<Vector> pred;  // q predicted curves (may be empty)
  std::vector<Vector> lo;
  std::vector<Vector> up;
  double alpha = 0.0;
  method_kind method = method_kind::split;

  std::size_t q() const { return t.size(); }
};

// Mean band width: average over components of the grid-mean of up - lo.
inline double region_size(const FunctionalBand& b) {
  double total = 0.0;
  for (std::size_t j = 0; j < b.q(); ++j) total += (b.up[j] - b.lo[j]).mean();
  return total / static_cast<double>(b.q());
}

inline bool region_contains(const FunctionalBand& b, const std::vector<Vector>& y) {
  for (std::size_t j = 0; j < b.q(); ++j)
    for (Index t = 0; t < b.t[j].size(); ++t)
      if (y[j][t] < b.lo[j][t] || y[j][t] > b.up[j][t]) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Full-conformal p-value surface
// ---------------------------------------------------------------------------

// Candidate grid (cartesian product of per-component axes, row-major with the
// last axis fastest) and one p-value per candidate.
struct PValueSurface {
  std::vector<Vector> axes;   // q axes
  std::vector<double> pvals;  // one delta per candidate
  Vector x0;                  // test features this surface belongs to
  Vector pred;                // plain model prediction at x0
  double alpha = 0.0;

  std::size_t q() const { return axes.size(); }

  std::size_t candidate_count() const {
    std::size_t total = 1;
    for (const auto& a : axes) total *= static_cast<std::size_t>(a.size());
    return total;
  }

  Vector candidate(std::size_t flat) const {
    Vector y(static_cast<Index>(axes.size()));
    for (std::size_t j = axes.size(); j-- > 0;) {
      const auto len = static_cast<std::size_t>(axes[j].size());
      y[static_cast<Index>(j)] = axes[j][static_cast<Index>(flat % len)];
      flat /= len;
    }
    return y;
  }
};

// Region mass of {delta > alpha} counted in grid cells of volume
// prod_j step_j.
inline double region_size(const PValueSurface& s) {
  double cell = 1.0;
  for (const auto& a : s.axes) {
    if (a.size() < 2) return 0.0;
    cell *= (a[a.size() - 1] - a[0]) / static_cast<double>(a.size() - 1);
  }
  std::size_t inside = 0;
  for (double p : s.pvals) inside += (p > s.alpha) ? 1 : 0;
  return cell * static_cast<double>(inside);
}

// Membership on the candidate grid: the nearest candidate decides.
inline bool surface_contains(const PValueSurface& s, const Vector& y) {
  std::size_t flat = 0;
  for (std::size_t j = 0; j < s.q(); ++j) {
    const auto& axis = s.axes[j];
    Index best = 0;
    for (Index t = 1; t < axis.size(); ++t)
      if (std::abs(axis[t] - y[static_cast<Index>(j)]) <
          std::abs(axis[best] - y[static_cast<Index>(j)]))
        best = t;
    flat = flat * static_cast<std::size_t>(axis.size()) + static_cast<std::size_t>(best);
  }
  return s.pvals[flat] > s.alpha;
}

}  // namespace conformal
