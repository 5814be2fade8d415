#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "conformal/data.hpp"
#include "conformal/errors.hpp"
#include "conformal/models.hpp"
#include "conformal/parallel.hpp"
#include "conformal/rng.hpp"
#include "conformal/scores.hpp"

namespace conformal {

namespace detail {

// Covariate curve sets for the given observation rows; empty sets when the
// model is covariate-free.
inline std::vector<CurveSet> covariate_entries(const std::optional<FunctionalDataset>& x,
                                               const std::vector<std::size_t>& rows) {
  std::vector<CurveSet> out(rows.size());
  if (x)
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = x->y[rows[i]];
  return out;
}

inline std::optional<FunctionalDataset> covariate_subset(
    const std::optional<FunctionalDataset>& x, const std::vector<std::size_t>& rows) {
  if (!x) return std::nullopt;
  return select_obs(*x, rows);
}

inline CurveSet curve_diff(const CurveSet& a, const CurveSet& b) {
  CurveSet out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] - b[j];
  return out;
}

inline CurveSet curve_abs_diff(const CurveSet& a, const CurveSet& b) {
  CurveSet out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = (a[j] - b[j]).array().abs();
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Split conformal for functional responses
// ---------------------------------------------------------------------------

struct FdSplitConfig {
  double alpha = 0.1;
  double rho = 0.5;
  std::uint64_t seed = 0;
  std::optional<std::vector<std::size_t>> split;
  bool randomized = false;
  std::uint64_t seed_rand = 0;
  modulation_kind s_type = modulation_kind::stdev;
};

// Trains on one half, fits the modulation on the training residual curves,
// calibrates the sup-score radius d on the other half, and returns the band
// mu_j(t) +- d * s_j(t). With no test entries the method falls back to the
// pointwise-mean model and reports bands at the calibration indices.
inline std::vector<FunctionalBand> conformal_split_fd(const FunctionalDataset& y,
                                                      const std::optional<FunctionalDataset>& x,
                                                      const std::vector<CurveSet>& x0,
                                                      const FunctionalModel& model,
                                                      const FdSplitConfig& cfg) {
  require(cfg.alpha > 0.0 && cfg.alpha < 1.0, errc::bad_alpha, "alpha must lie in (0,1)");
  const SplitIndices idx = make_split(y.n(), cfg.rho, cfg.seed, cfg.split);
  require(idx.l() >= 1, errc::empty_calibration, "calibration set is empty");

  const bool fallback = x0.empty();
  FunctionalModel fallback_model;
  if (fallback) fallback_model = mean_model_fd();
  const FunctionalModel& mu = fallback ? fallback_model : model;

  const FunctionalDataset y_train = select_obs(y, idx.train);
  const ModelFit fit = mu.train(detail::covariate_subset(x, idx.train), y_train);

  const auto train_pred = mu.predict(fit, detail::covariate_entries(x, idx.train));
  std::vector<CurveSet> train_resid(idx.m());
  for (std::size_t h = 0; h < idx.m(); ++h)
    train_resid[h] = detail::curve_diff(y.y[idx.train[h]], train_pred[h]);
  const CurveSet s = fit_modulation_fd(cfg.s_type, train_resid, cfg.alpha, y.grids);

  const auto calib_pred = mu.predict(fit, detail::covariate_entries(x, idx.calib));
  std::vector<double> scores(idx.l());
  for (std::size_t i = 0; i < idx.l(); ++i)
    scores[i] = score_fun(detail::curve_diff(y.y[idx.calib[i]], calib_pred[i]), s);

  long long k = split_rank(idx.l(), cfg.alpha);
  if (cfg.randomized) {
    std::mt19937_64 gen(cfg.seed_rand);
    k = split_rank_smoothed(idx.l(), cfg.alpha, uniform_real01(gen));
  }
  const double d = detail::split_radius(scores, k);

  const auto test_pred = fallback ? calib_pred : mu.predict(fit, x0);
  std::vector<FunctionalBand> out(test_pred.size());
  for (std::size_t t = 0; t < test_pred.size(); ++t) {
    FunctionalBand band;
    band.t = y.grids;
    band.pred = test_pred[t];
    band.lo.resize(y.q());
    band.up.resize(y.q());
    for (std::size_t j = 0; j < y.q(); ++j) {
      band.lo[j] = test_pred[t][j] - d * s[j];
      band.up[j] = test_pred[t][j] + d * s[j];
    }
    band.alpha = cfg.alpha;
    band.method = method_kind::split;
    out[t] = std::move(band);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Jackknife+ for functional responses
// ---------------------------------------------------------------------------

struct FdJackknifeDetail {
  std::vector<CurveSet> candidates;
  std::vector<std::size_t> retained;
  CurveSet s;
  CurveMedianPair center;
};

struct FdJackplusResult {
  std::vector<FunctionalBand> bands;
  std::vector<FdJackknifeDetail> details;
};

inline FdJackplusResult conformal_jackplus_fd_detailed(const FunctionalDataset& y,
                                                       const std::optional<FunctionalDataset>& x,
                                                       const std::vector<CurveSet>& x0,
                                                       const FunctionalModel& model, double alpha,
                                                       unsigned threads = 1) {
  require(alpha > 0.0 && alpha < 1.0, errc::bad_alpha, "alpha must lie in (0,1)");
  require(y.n() >= 2, errc::too_few_rows, "jackknife+ needs at least 2 observations");
  require(!x0.empty(), errc::bad_config, "functional jackknife+ needs test entries");

  const std::size_t n = y.n();
  std::vector<CurveSet> abs_resid(n);
  std::vector<std::vector<CurveSet>> loo_pred(n);  // per i: one q-curve set per test entry
  parallel_for(n, threads, [&](std::size_t i) {
    std::vector<std::size_t> keep;
    keep.reserve(n - 1);
    for (std::size_t r = 0; r < n; ++r)
      if (r != i) keep.push_back(r);
    const ModelFit fit = model.train(detail::covariate_subset(x, keep), select_obs(y, keep));
    const auto at_i = model.predict(fit, detail::covariate_entries(x, {i}));
    abs_resid[i] = detail::curve_abs_diff(y.y[i], at_i[0]);
    loo_pred[i] = model.predict(fit, x0);
  });

  const ModelFit full_fit = model.train(x, y);
  const auto pred = model.predict(full_fit, x0);

  const CurveSet s = fit_modulation_fd(modulation_kind::stdev, abs_resid, alpha, y.grids);
  const auto k =
      static_cast<std::size_t>(detail::ceil_index((1.0 - alpha) * static_cast<double>(2 * n)));

  FdJackplusResult result;
  result.bands.resize(x0.size());
  result.details.resize(x0.size());
  for (std::size_t t = 0; t < x0.size(); ++t) {
    FdJackknifeDetail det;
    det.candidates.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      CurveSet minus(y.q()), plus(y.q());
      for (std::size_t j = 0; j < y.q(); ++j) {
        minus[j] = loo_pred[i][t][j] - abs_resid[i][j];
        plus[j] = loo_pred[i][t][j] + abs_resid[i][j];
      }
      det.candidates.push_back(std::move(minus));
      det.candidates.push_back(std::move(plus));
    }
    det.s = s;
    det.center = pointwise_median_pair(det.candidates);
    det.retained = extended_quantile(det.candidates, k, det.s, det.center);
    std::vector<CurveSet> kept;
    kept.reserve(det.retained.size());
    for (std::size_t i : det.retained) kept.push_back(det.candidates[i]);
    auto box = bounding_box(kept);

    FunctionalBand band;
    band.t = y.grids;
    band.pred = pred[t];
    band.lo = std::move(box.first);
    band.up = std::move(box.second);
    band.alpha = alpha;
    band.method = method_kind::jackplus;
    result.bands[t] = std::move(band);
    result.details[t] = std::move(det);
  }
  return result;
}

inline std::vector<FunctionalBand> conformal_jackplus_fd(const FunctionalDataset& y,
                                                         const std::optional<FunctionalDataset>& x,
                                                         const std::vector<CurveSet>& x0,
                                                         const FunctionalModel& model,
                                                         double alpha, unsigned threads = 1) {
  return conformal_jackplus_fd_detailed(y, x, x0, model, alpha, threads).bands;
}

// ---------------------------------------------------------------------------
// Multi split conformal for functional responses
// ---------------------------------------------------------------------------

struct FdMsplitConfig {
  double alpha = 0.1;
  int B = 50;
  double tau = 0.5;
  int lambda = 0;
  std::vector<double> rho;
  std::optional<std::vector<std::size_t>> split;
  modulation_kind s_type = modulation_kind::stdev;
  std::uint64_t seed = 0;
  bool randomized = false;
  std::uint64_t seed_rand = 0;
  unsigned threads = 1;
};

// B split_fd replicates at the inner level; the 2B pooled bound curves are cut
// to the ceil(2 tau B) most conformal and boxed pointwise.
inline std::vector<FunctionalBand> conformal_msplit_fd(const FunctionalDataset& y,
                                                       const std::optional<FunctionalDataset>& x,
                                                       const std::vector<CurveSet>& x0,
                                                       const FunctionalModel& model,
                                                       const FdMsplitConfig& cfg) {
  require(cfg.B >= 1, errc::bad_tau, "B must be at least 1");
  require(cfg.tau > 0.0 && cfg.tau < 1.0, errc::bad_tau, "tau must lie in (0,1)");
  require(cfg.lambda >= 0, errc::bad_lambda, "lambda must be nonnegative");
  require(!x0.empty(), errc::bad_config, "functional multi split needs test entries");
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

  std::vector<std::vector<FunctionalBand>> replicate(B);
  parallel_for(B, cfg.threads, [&](std::size_t b) {
    FdSplitConfig sc;
    sc.alpha = inner_alpha;
    sc.rho = rho[b];
    sc.seed = derive_seed(cfg.seed, b);
    sc.split = cfg.split;
    sc.randomized = cfg.randomized;
    sc.seed_rand = derive_seed(cfg.seed_rand, b);
    sc.s_type = cfg.s_type;
    replicate[b] = conformal_split_fd(y, x, x0, model, sc);
  });

  const ModelFit full_fit = model.train(x, y);
  const auto pred = model.predict(full_fit, x0);

  std::vector<FunctionalBand> out(x0.size());
  for (std::size_t t = 0; t < x0.size(); ++t) {
    std::vector<CurveSet> pool;
    pool.reserve(2 * B);
    for (std::size_t b = 0; b < B; ++b) {
      pool.push_back(replicate[b][t].lo);
      pool.push_back(replicate[b][t].up);
    }
    const CurveSet s = pool_scale(pool);
    const CurveMedianPair center = pointwise_median_pair(pool);
    auto k = static_cast<std::size_t>(detail::ceil_index(2.0 * cfg.tau * static_cast<double>(B)));
    k = std::clamp<std::size_t>(k, 1, pool.size());
    const auto retained = extended_quantile(pool, k, s, center);
    std::vector<CurveSet> kept;
    kept.reserve(retained.size());
    for (std::size_t i : retained) kept.push_back(pool[i]);
    auto box = bounding_box(kept);

    FunctionalBand band;
    band.t = y.grids;
    band.pred = pred[t];
    band.lo = std::move(box.first);
    band.up = std::move(box.second);
    band.alpha = cfg.alpha;
    band.method = method_kind::msplit;
    out[t] = std::move(band);
  }
  return out;
}

}  // namespace conformal
