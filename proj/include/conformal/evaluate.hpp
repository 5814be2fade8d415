#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "conformal/run.hpp"

namespace conformal {

// Iterated leave-one-out benchmark: hold out each training observation, build
// the configured prediction set at its features, and average membership,
// region size and wall time across the folds.
struct EvalReport {
  double coverage = 0.0;
  double avg_size = 0.0;
  double avg_time_sec = 0.0;
  std::size_t folds = 0;
};

namespace detail {

struct FoldOutcome {
  bool covered;
  double size;
};

inline std::vector<std::size_t> all_but(std::size_t n, std::size_t skip) {
  std::vector<std::size_t> keep;
  keep.reserve(n - 1);
  for (std::size_t r = 0; r < n; ++r)
    if (r != skip) keep.push_back(r);
  return keep;
}

inline FoldOutcome eval_fold_multi(const RunConfig& cfg, const Model& model,
                                   const TabularDataset& full, std::size_t fold) {
  const auto keep = all_but(static_cast<std::size_t>(full.n()), fold);
  TabularDataset reduced{select_rows(full.x, keep), select_rows(full.y, keep)};
  const Matrix x0 = full.x.row(static_cast<Index>(fold));
  const Vector y0 = full.y.row(static_cast<Index>(fold)).transpose();

  if (cfg.method == "full") {
    FullConfig fc;
    fc.alpha = cfg.alpha;
    fc.score = cfg.score;
    fc.s_type = cfg.s_type;
    fc.num_grid_pts_dim = cfg.grid_pts;
    fc.grid_factor = cfg.grid_factor;
    fc.threads = cfg.threads;
    const auto surfaces = conformal_full(reduced, x0, model, fc);
    const double delta = conformal_full_pvalue(reduced, x0.row(0).transpose(), y0, model, fc);
    return {delta > cfg.alpha, region_size(surfaces[0])};
  }

  std::vector<MultiRegion> regions;
  if (cfg.method == "split") {
    SplitConfig sc;
    sc.alpha = cfg.alpha;
    sc.rho = default_rho(cfg);
    sc.seed = derive_seed(cfg.seed, fold);
    sc.randomized = cfg.randomized;
    sc.seed_rand = derive_seed(cfg.seed_rand, fold);
    sc.score = cfg.score;
    sc.s_type = cfg.s_type;
    regions = conformal_split(reduced, x0, model, sc);
  } else if (cfg.method == "jackplus") {
    regions = conformal_jackplus(reduced, x0, model, cfg.alpha, cfg.threads);
  } else if (cfg.method == "msplit") {
    MsplitConfig mc;
    mc.alpha = cfg.alpha;
    mc.B = default_B(cfg);
    mc.tau = default_tau(cfg);
    mc.lambda = cfg.lambda;
    mc.rho = cfg.rho;
    mc.score = cfg.score;
    mc.s_type = cfg.s_type;
    mc.seed = derive_seed(cfg.seed, fold);
    mc.randomized = cfg.randomized;
    mc.seed_rand = derive_seed(cfg.seed_rand, fold);
    mc.threads = cfg.threads;
    regions = conformal_msplit(reduced, x0, model, mc);
  } else {
    throw error(errc::bad_config, "unknown method '" + cfg.method + "'");
  }
  return {region_contains(regions[0], y0), region_size(regions[0])};
}

inline FoldOutcome eval_fold_fd(const RunConfig& cfg, const FunctionalModel& model,
                                const FunctionalInput& input, std::size_t fold) {
  const auto keep = all_but(input.y.n(), fold);
  const FunctionalDataset reduced = select_obs(input.y, keep);
  const auto x_reduced = covariate_subset(input.x, keep);
  const std::vector<CurveSet> x0 = covariate_entries(input.x, {fold});

  std::vector<FunctionalBand> bands;
  if (cfg.method == "split") {
    FdSplitConfig sc;
    sc.alpha = cfg.alpha;
    sc.rho = default_rho(cfg);
    sc.seed = derive_seed(cfg.seed, fold);
    sc.randomized = cfg.randomized;
    sc.seed_rand = derive_seed(cfg.seed_rand, fold);
    sc.s_type = cfg.s_type;
    bands = conformal_split_fd(reduced, x_reduced, x0, model, sc);
  } else if (cfg.method == "jackplus") {
    bands = conformal_jackplus_fd(reduced, x_reduced, x0, model, cfg.alpha, cfg.threads);
  } else if (cfg.method == "msplit") {
    FdMsplitConfig mc;
    mc.alpha = cfg.alpha;
    mc.B = default_B(cfg);
    mc.tau = default_tau(cfg);
    mc.lambda = cfg.lambda;
    mc.rho = cfg.rho;
    mc.s_type = cfg.s_type;
    mc.seed = derive_seed(cfg.seed, fold);
    mc.randomized = cfg.randomized;
    mc.seed_rand = derive_seed(cfg.seed_rand, fold);
    mc.threads = cfg.threads;
    bands = conformal_msplit_fd(reduced, x_reduced, x0, model, mc);
  } else {
    throw error(errc::bad_config, "method '" + cfg.method + "' not available in fd mode");
  }
  return {region_contains(bands[0], input.y.y[fold]), region_size(bands[0])};
}

}  // namespace detail

// Runs the leave-one-out loop over the training observations of cfg.input.
// Timing covers the prediction-set construction only, never the ingestion.
inline EvalReport evaluate(const RunConfig& cfg) {
  EvalReport report;
  double size_sum = 0.0;
  double time_sum = 0.0;
  std::size_t covered = 0;

  const auto timed = [&](auto&& fold_fn, std::size_t fold) {
    const auto start = std::chrono::steady_clock::now();
    detail::FoldOutcome outcome;
    try {
      outcome = fold_fn(fold);
    } catch (const error& e) {
      throw error(e.code(), "fold " + std::to_string(fold + 1) + ": " + e.what());
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    time_sum += std::max(elapsed.count(), 1e-9);
    size_sum += outcome.size;
    covered += outcome.covered ? 1 : 0;
    if (cfg.verbose)
      std::fprintf(stderr, "fold %zu/%zu: %s, size %.6g, %.3g s\n", fold + 1, report.folds,
                   outcome.covered ? "covered" : "missed", outcome.size, elapsed.count());
  };

  if (cfg.mode == "multi") {
    const TabularInput input = ingest_tabular(cfg.input, cfg.response_cols);
    const Model model = make_model(cfg.model, cfg.ridge_lambda);
    const auto n = static_cast<std::size_t>(input.train.n());
    require(n >= 3, errc::too_few_rows, "leave-one-out evaluation needs at least 3 rows");
    report.folds = n;
    for (std::size_t i = 0; i < n; ++i)
      timed([&](std::size_t f) { return detail::eval_fold_multi(cfg, model, input.train, f); },
            i);
  } else if (cfg.mode == "fd") {
    const FunctionalInput input = ingest_functional(cfg.input);
    const FunctionalModel model = make_fd_model(cfg.model);
    const std::size_t n = input.y.n();
    require(n >= 3, errc::too_few_rows, "leave-one-out evaluation needs at least 3 curves");
    report.folds = n;
    for (std::size_t i = 0; i < n; ++i)
      timed([&](std::size_t f) { return detail::eval_fold_fd(cfg, model, input, f); }, i);
  } else {
    throw error(errc::bad_config, "unknown mode '" + cfg.mode + "'");
  }

  report.coverage = static_cast<double>(covered) / static_cast<double>(report.folds);
  report.avg_size = size_sum / static_cast<double>(report.folds);
  report.avg_time_sec = time_sum / static_cast<double>(report.folds);
  return report;
}

inline json eval_to_json(const RunConfig& cfg, const EvalReport& report) {
  json doc;
  doc["schema"] = "conformal-eval/1";
  doc["config"] = config_echo(cfg);
  doc["coverage"] = report.coverage;
  doc["avg_size"] = jnum(report.avg_size);
  doc["avg_time_sec"] = report.avg_time_sec;
  doc["folds"] = report.folds;
  return doc;
}

}  // namespace conformal
