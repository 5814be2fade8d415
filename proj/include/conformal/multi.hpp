#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "conformal/data.hpp"
#include "conformal/errors.hpp"
#include "conformal/models.hpp"
#include "conformal/parallel.hpp"
#include "conformal/rng.hpp"
#include "conformal/scores.hpp"

namespace conformal {

// ---------------------------------------------------------------------------
// Full conformal
// ---------------------------------------------------------------------------

struct FullConfig {
  double alpha = 0.1;
  score_kind score = score_kind::l2;
  modulation_kind s_type = modulation_kind::stdev;  // identity / st-dev only
  Index num_grid_pts_dim = 100;
  double grid_factor = 1.25;
  std::size_t candidate_cap = 1000000;
  unsigned threads = 1;
};

namespace detail {

inline Vector linspace(double lo, double up, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i)
    v[i] = lo + (up - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

}  // namespace detail

// Candidate axes: num_grid_pts_dim points equally spaced in
// [-grid_factor * max|y_k|, +grid_factor * max|y_k|] per response dimension.
inline std::vector<Vector> full_candidate_axes(const Matrix& y, Index num_grid_pts_dim,
                                               double grid_factor) {
  require(num_grid_pts_dim >= 2, errc::bad_config, "num_grid_pts_dim must be at least 2");
  require(grid_factor >= 1.0, errc::bad_config, "grid_factor must be at least 1");
  std::vector<Vector> axes;
  axes.reserve(static_cast<std::size_t>(y.cols()));
  for (Index k = 0; k < y.cols(); ++k) {
    const double top = grid_factor * y.col(k).array().abs().maxCoeff();
    axes.push_back(detail::linspace(-top, top, num_grid_pts_dim));
  }
  return axes;
}

// Fraction of augmented scores at least as nonconforming as the candidate,
// which sits in the last slot. The candidate counts itself, so the result
// lives on the ladder {1/(n+1), ..., 1}.
inline double delta_from_scores(const std::vector<double>& augmented_scores) {
  const double r_new = augmented_scores.back();
  std::size_t count = 0;
  for (double r : augmented_scores) count += (r >= r_new) ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(augmented_scores.size());
}

namespace detail {

// One full-conformal p-value: retrain on the augmented set and rank the
// candidate's score.
inline double full_delta(const TabularDataset& ds, const Vector& x0_row, const Vector& candidate,
                         const Model& model, score_kind kind, modulation_kind s_type,
                         double alpha) {
  const Index n = ds.n();
  Matrix x_aug(n + 1, ds.p());
  x_aug.topRows(n) = ds.x;
  x_aug.row(n) = x0_row.transpose();
  Matrix y_aug(n + 1, ds.q());
  y_aug.topRows(n) = ds.y;
  y_aug.row(n) = candidate.transpose();

  const ModelFit fit = model.train(x_aug, y_aug);
  const Matrix resid = y_aug - model.predict(fit, x_aug);

  Vector s = fit_modulation_multi(s_type, resid, alpha);
  Matrix cov_inv;
  if (kind == score_kind::mahalanobis) cov_inv = residual_covariance(resid).inv;

  std::vector<double> scores(static_cast<std::size_t>(n + 1));
  for (Index i = 0; i <= n; ++i)
    scores[static_cast<std::size_t>(i)] =
        score_multi(kind, resid.row(i).transpose(), s,
                    kind == score_kind::mahalanobis ? &cov_inv : nullptr);
  return delta_from_scores(scores);
}

}  // namespace detail

// Retrains the model for every candidate response on a q-dimensional grid and
// returns the p-value surface per test point.
inline std::vector<PValueSurface> conformal_full(const TabularDataset& ds, const Matrix& x0,
                                                 const Model& model, const FullConfig& cfg) {
  require(cfg.alpha > 0.0 && cfg.alpha < 1.0, errc::bad_alpha, "alpha must lie in (0,1)");
  require(cfg.s_type != modulation_kind::alpha_max, errc::bad_config,
          "alpha-max modulation is not available for full conformal");
  require(x0.cols() == ds.p(), errc::dimension_mismatch, "x0 column count differs from x");

  const auto axes = full_candidate_axes(ds.y, cfg.num_grid_pts_dim, cfg.grid_factor);
  std::size_t total = 1;
  for (const auto& a : axes) {
    total *= static_cast<std::size_t>(a.size());
    require(total <= cfg.candidate_cap, errc::grid_explosion,
            "candidate grid exceeds cap of " + std::to_string(cfg.candidate_cap) + " points");
  }

  const ModelFit base = model.train(ds.x, ds.y);
  const Matrix base_pred = model.predict(base, x0);

  std::vector<PValueSurface> out(static_cast<std::size_t>(x0.rows()));
  for (Index t = 0; t < x0.rows(); ++t) {
    PValueSurface surf;
    surf.axes = axes;
    surf.pvals.resize(total);
    surf.x0 = x0.row(t).transpose();
    surf.pred = base_pred.row(t).transpose();
    surf.alpha = cfg.alpha;
    parallel_for(total, cfg.threads, [&](std::size_t c) {
      surf.pvals[c] = detail::full_delta(ds, surf.x0, surf.candidate(c), model, cfg.score,
                                         cfg.s_type, cfg.alpha);
    });
    out[static_cast<std::size_t>(t)] = std::move(surf);
  }
  return out;
}

// Direct p-value of one candidate response, bypassing the grid. Used by the
// evaluation harness to test membership of a held-out response.
inline double conformal_full_pvalue(const TabularDataset& ds, const Vector& x0_row,
                                    const Vector& candidate, const Model& model,
                                    const FullConfig& cfg) {
  require(cfg.s_type != modulation_kind::alpha_max, errc::bad_config,
          "alpha-max modulation is not available for full conformal");
  return detail::full_delta(ds, x0_row, candidate, model, cfg.score, cfg.s_type, cfg.alpha);
}

// ---------------------------------------------------------------------------
// Split conformal
// ---------------------------------------------------------------------------

struct SplitConfig {
  double alpha = 0.1;
  double rho = 0.5;
  std::uint64_t seed = 0;
  std::optional<std::vector<std::size_t>> split;  // explicit training indices
  bool randomized = false;
  std::uint64_t seed_rand = 0;
  score_kind score = score_kind::l2;
  modulation_kind s_type = modulation_kind::stdev;
};

namespace detail {

inline MultiRegion split_region_for(const Vector& pred, double d, score_kind kind,
                                    const Vector& s, const Matrix& cov, const Matrix& cov_inv,
                                    double alpha) {
  MultiRegion r;
  r.pred = pred;
  r.alpha = alpha;
  r.method = method_kind::split;
  const Index q = pred.size();
  Vector half(q);
  switch (kind) {
    case score_kind::max:
      half = d * s;
      break;
    case score_kind::l2:
      half = d * s;
      r.geom = MultiRegion::geometry::ball;
      r.radius = d;
      r.scale = s;
      break;
    case score_kind::mahalanobis:
      for (Index j = 0; j < q; ++j) half[j] = std::sqrt(d * cov(j, j));
      r.geom = MultiRegion::geometry::ellipsoid;
      r.radius = d;
      r.cov_inv = cov_inv;
      break;
  }
  r.lo = pred - half;
  r.up = pred + half;
  return r;
}

}  // namespace detail

// Trains once on the split's training half, calibrates the score radius d on
// the other half, and returns the score-d region around the prediction at
// each test point.
inline std::vector<MultiRegion> conformal_split(const TabularDataset& ds, const Matrix& x0,
                                                const Model& model, const SplitConfig& cfg) {
  require(cfg.alpha > 0.0 && cfg.alpha < 1.0, errc::bad_alpha, "alpha must lie in (0,1)");
  require(x0.cols() == ds.p(), errc::dimension_mismatch, "x0 column count differs from x");

  const SplitIndices idx = make_split(static_cast<std::size_t>(ds.n()), cfg.rho, cfg.seed,
                                      cfg.split);
  require(idx.l() >= 1, errc::empty_calibration, "calibration set is empty");

  const ModelFit fit = model.train(select_rows(ds.x, idx.train), select_rows(ds.y, idx.train));
  const Matrix train_resid =
      select_rows(ds.y, idx.train) - model.predict(fit, select_rows(ds.x, idx.train));

  Vector s = Vector::Ones(ds.q());
  Matrix cov, cov_inv;
  if (cfg.score == score_kind::mahalanobis) {
    auto rc = residual_covariance(train_resid);
    cov = std::move(rc.cov);
    cov_inv = std::move(rc.inv);
  } else {
    s = fit_modulation_multi(cfg.s_type, train_resid, cfg.alpha);
  }

  const Matrix calib_resid =
      select_rows(ds.y, idx.calib) - model.predict(fit, select_rows(ds.x, idx.calib));
  std::vector<double> scores(idx.l());
  for (std::size_t i = 0; i < idx.l(); ++i)
    scores[i] = score_multi(cfg.score, calib_resid.row(static_cast<Index>(i)).transpose(), s,
                            cfg.score == score_kind::mahalanobis ? &cov_inv : nullptr);

  long long k = split_rank(idx.l(), cfg.alpha);
  if (cfg.randomized) {
    std::mt19937_64 gen(cfg.seed_rand);
    const double tau = uniform_real01(gen);  // one tau shared across test points
    k = split_rank_smoothed(idx.l(), cfg.alpha, tau);
  }
  const double d = detail::split_radius(scores, k);

  const Matrix pred = model.predict(fit, x0);
  std::vector<MultiRegion> out(static_cast<std::size_t>(x0.rows()));
  for (Index t = 0; t < x0.rows(); ++t)
    out[static_cast<std::size_t>(t)] = detail::split_region_for(
        pred.row(t).transpose(), d, cfg.score, s, cov, cov_inv, cfg.alpha);
  return out;
}

// ---------------------------------------------------------------------------
// Jackknife+
// ---------------------------------------------------------------------------

// Candidate set and level-set selection behind one jackknife+ region; kept so
// tests can replay the selection against an independent oracle.
struct JackknifeDetail {
  std::vector<Vector> candidates;     // 2n shifted LOO predictions
  std::vector<std::size_t> retained;  // indices kept by the extended quantile
  Vector s;                           // modulation over the LOO residuals
  MedianPair center;                  // conformity center (median pair)
};

struct JackplusResult {
  std::vector<MultiRegion> regions;
  std::vector<JackknifeDetail> details;  // empty in the univariate path
};

inline JackplusResult conformal_jackplus_detailed(const TabularDataset& ds, const Matrix& x0,
                                                  const Model& model, double alpha,
                                                  unsigned threads = 1) {
  require(alpha > 0.0 && alpha < 1.0, errc::bad_alpha, "alpha must lie in (0,1)");
  require(ds.n() >= 2, errc::too_few_rows, "jackknife+ needs at least 2 observations");
  require(x0.cols() == ds.p(), errc::dimension_mismatch, "x0 column count differs from x");

  const auto n = static_cast<std::size_t>(ds.n());
  const Index q = ds.q();

  // Leave-one-out fits: absolute residual at the held-out row plus the
  // prediction at every test point.
  Matrix abs_resid(static_cast<Index>(n), q);
  std::vector<Matrix> loo_pred(n);  // n0 x q each
  parallel_for(n, threads, [&](std::size_t i) {
    std::vector<std::size_t> keep;
    keep.reserve(n - 1);
    for (std::size_t r = 0; r < n; ++r)
      if (r != i) keep.push_back(r);
    const ModelFit fit = model.train(select_rows(ds.x, keep), select_rows(ds.y, keep));
    const Matrix at_i = model.predict(fit, ds.x.row(static_cast<Index>(i)));
    abs_resid.row(static_cast<Index>(i)) =
        (ds.y.row(static_cast<Index>(i)) - at_i.row(0)).array().abs();
    loo_pred[i] = model.predict(fit, x0);
  });

  const ModelFit full_fit = model.train(ds.x, ds.y);
  const Matrix pred = model.predict(full_fit, x0);

  JackplusResult result;
  result.regions.resize(static_cast<std::size_t>(x0.rows()));
  if (q > 1) result.details.resize(static_cast<std::size_t>(x0.rows()));

  for (Index t = 0; t < x0.rows(); ++t) {
    MultiRegion region;
    region.pred = pred.row(t).transpose();
    region.alpha = alpha;
    region.method = method_kind::jackplus;
    if (q == 1) {
      std::vector<double> minus(n), plus(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double mu = loo_pred[i](t, 0);
        minus[i] = mu - abs_resid(static_cast<Index>(i), 0);
        plus[i] = mu + abs_resid(static_cast<Index>(i), 0);
      }
      region.lo = Vector::Constant(1, jk_quantiles(minus, alpha).lower);
      region.up = Vector::Constant(1, jk_quantiles(plus, alpha).upper);
    } else {
      JackknifeDetail detail;
      detail.candidates.reserve(2 * n);
      for (std::size_t i = 0; i < n; ++i) {
        const Vector mu = loo_pred[i].row(t).transpose();
        const Vector r = abs_resid.row(static_cast<Index>(i)).transpose();
        detail.candidates.push_back(mu - r);
        detail.candidates.push_back(mu + r);
      }
      detail.s = fit_modulation_multi(modulation_kind::stdev, abs_resid, alpha);
      detail.center = componentwise_median_pair(detail.candidates);
      const auto k = static_cast<std::size_t>(
          detail::ceil_index((1.0 - alpha) * static_cast<double>(2 * n)));
      detail.retained = extended_quantile(detail.candidates, k, detail.s, detail.center);
      std::vector<Vector> kept;
      kept.reserve(detail.retained.size());
      for (std::size_t i : detail.retained) kept.push_back(detail.candidates[i]);
      auto box = bounding_box(kept);
      region.lo = std::move(box.first);
      region.up = std::move(box.second);
      result.details[static_cast<std::size_t>(t)] = std::move(detail);
    }
    result.regions[static_cast<std::size_t>(t)] = std::move(region);
  }
  return result;
}

// n leave-one-out fits; univariate intervals from the shifted-residual order
// statistics, multivariate boxes from the conformity level set.
inline std::vector<MultiRegion> conformal_jackplus(const TabularDataset& ds, const Matrix& x0,
                                                   const Model& model, double alpha,
                                                   unsigned threads = 1) {
  return conformal_jackplus_detailed(ds, x0, model, alpha, threads).regions;
}

// ---------------------------------------------------------------------------
// Multi split conformal
// ---------------------------------------------------------------------------

struct MsplitConfig {
  double alpha = 0.1;
  int B = 100;
  double tau = 0.1;
  int lambda = 0;
  std::vector<double> rho;  // one entry per replicate; empty means all 0.5
  std::optional<std::vector<std::size_t>> split;  // pins every replicate's split
  score_kind score = score_kind::max;
  modulation_kind s_type = modulation_kind::stdev;
  std::uint64_t seed = 0;
  bool randomized = false;
  std::uint64_t seed_rand = 0;
  unsigned threads = 1;
};

struct Interval {
  double lo;
  double up;
};

// Union of the closed-interval region {y : at least `threshold` of the inputs
// contain y}. Intervals are closed at both endpoints, so a y sitting exactly
// on an endpoint counts as covered.
inline std::vector<Interval> interval_overlap_union(const std::vector<Interval>& intervals,
                                                    std::size_t threshold) {
  require(threshold >= 1, errc::bad_level, "overlap threshold must be positive");
  std::vector<double> coords;
  coords.reserve(2 * intervals.size());
  for (const auto& iv : intervals) {
    if (iv.lo > iv.up) continue;  // empty input interval
    coords.push_back(iv.lo);
    coords.push_back(iv.up);
  }
  std::sort(coords.begin(), coords.end());
  coords.erase(std::unique(coords.begin(), coords.end()), coords.end());

  const auto count_at = [&](double y) {
    std::size_t c = 0;
    for (const auto& iv : intervals) c += (iv.lo <= y && y <= iv.up) ? 1 : 0;
    return c;
  };
  const auto gap_probe = [](double a, double b) {
    if (std::isinf(a)) return b - 1.0;
    if (std::isinf(b)) return a + 1.0;
    return a + (b - a) / 2.0;
  };

  // Walk point/gap pieces in order and merge maximal covered runs.
  std::vector<Interval> out;
  bool open = false;
  double run_start = 0.0;
  double run_end = 0.0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const bool pt_covered = count_at(coords[i]) >= threshold;
    if (pt_covered) {
      if (!open) {
        open = true;
        run_start = coords[i];
      }
      run_end = coords[i];
    } else if (open) {
      out.push_back({run_start, run_end});
      open = false;
    }
    if (i + 1 < coords.size()) {
      const bool gap_covered = count_at(gap_probe(coords[i], coords[i + 1])) >= threshold;
      if (gap_covered && !open) {
        // Covered gap with uncovered endpoints cannot happen with closed
        // intervals; counts only drop strictly after an up endpoint.
        open = true;
        run_start = coords[i];
        run_end = coords[i + 1];
      } else if (!gap_covered && open) {
        out.push_back({run_start, run_end});
        open = false;
      }
    }
  }
  if (open) out.push_back({run_start, run_end});
  return out;
}

// Runs B split-conformal replicates at the inflated inner level
// alpha(1 - tau + lambda/B) and aggregates: by the membership-fraction sweep
// for a univariate response, by the conformity level set of the pooled bounds
// otherwise.
inline std::vector<MultiRegion> conformal_msplit(const TabularDataset& ds, const Matrix& x0,
                                                 const Model& model, const MsplitConfig& cfg) {
  require(cfg.B >= 1, errc::bad_tau, "B must be at least 1");
  require(cfg.tau > 0.0 && cfg.tau < 1.0, errc::bad_tau, "tau must lie in (0,1)");
  require(cfg.lambda >= 0, errc::bad_lambda, "lambda must be nonnegative");
  const auto B = static_cast<std::size_t>(cfg.B);
  const double inner_alpha =
      cfg.alpha * (1.0 - cfg.tau + static_cast<double>(cfg.lambda) / static_cast<double>(B));
  require(inner_alpha > 0.0 && inner_alpha < 1.0, errc::bad_inner_alpha,
          "inner level alpha(1-tau+lambda/B) = " + std::to_string(inner_alpha) +
              " outside (0,1)");

  std::vector<double> rho = cfg.rho;
  if (rho.empty()) rho.assign(B, 0.5);
  if (rho.size() == 1) rho.assign(B, rho.front());
  require(rho.size() == B, errc::bad_rho, "rho sequence length must equal B");

  const auto n0 = static_cast<std::size_t>(x0.rows());
  std::vector<std::vector<MultiRegion>> replicate(B);
  parallel_for(B, cfg.threads, [&](std::size_t b) {
    SplitConfig sc;
    sc.alpha = inner_alpha;
    sc.rho = rho[b];
    sc.seed = derive_seed(cfg.seed, b);
    sc.split = cfg.split;
    sc.randomized = cfg.randomized;
    sc.seed_rand = derive_seed(cfg.seed_rand, b);
    sc.score = cfg.score;
    sc.s_type = cfg.s_type;
    replicate[b] = conformal_split(ds, x0, model, sc);
  });

  const ModelFit full_fit = model.train(ds.x, ds.y);
  const Matrix pred = model.predict(full_fit, x0);

  std::vector<MultiRegion> out(n0);
  for (std::size_t t = 0; t < n0; ++t) {
    MultiRegion region;
    region.pred = pred.row(static_cast<Index>(t)).transpose();
    region.alpha = cfg.alpha;
    region.method = method_kind::msplit;
    if (ds.q() == 1) {
      std::vector<Interval> ivs(B);
      for (std::size_t b = 0; b < B; ++b)
        ivs[b] = {replicate[b][t].lo[0], replicate[b][t].up[0]};
      const auto threshold = static_cast<std::size_t>(
          detail::floor_index(cfg.tau * static_cast<double>(B)) + 1);
      const auto pieces = interval_overlap_union(ivs, threshold);
      if (pieces.empty()) {
        region.lo = Vector::Constant(1, std::numeric_limits<double>::infinity());
        region.up = Vector::Constant(1, -std::numeric_limits<double>::infinity());
      } else {
        region.lo = Vector::Constant(1, pieces.front().lo);
        region.up = Vector::Constant(1, pieces.back().up);
      }
    } else {
      // Pool the 2B bound vectors, replicate by replicate, lower before upper;
      // the interleaving keeps lower/upper pairs together under score ties.
      std::vector<Vector> pool;
      pool.reserve(2 * B);
      for (std::size_t b = 0; b < B; ++b) {
        pool.push_back(replicate[b][t].lo);
        pool.push_back(replicate[b][t].up);
      }
      const Vector s = pool_scale(pool);
      const MedianPair center = componentwise_median_pair(pool);
      auto k = static_cast<std::size_t>(
          detail::ceil_index(2.0 * cfg.tau * static_cast<double>(B)));
      k = std::clamp<std::size_t>(k, 1, pool.size());
      const auto retained = extended_quantile(pool, k, s, center);
      std::vector<Vector> kept;
      kept.reserve(retained.size());
      for (std::size_t i : retained) kept.push_back(pool[i]);
      auto box = bounding_box(kept);
      region.lo = std::move(box.first);
      region.up = std::move(box.second);
    }
    out[t] = std::move(region);
  }
  return out;
}

}  // namespace conformal
