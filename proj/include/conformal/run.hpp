#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "conformal/io.hpp"

namespace conformal {

// One CLI invocation, fully resolved: every seed is concrete so the same
// config always reproduces the same bytes.
struct RunConfig {
  std::string mode = "multi";   // multi | fd
  std::string method = "split"; // full | split | msplit | jackplus
  std::string model = "ols";    // mean | ols | ridge | concurrent
  double ridge_lambda = 1.0;
  double alpha = 0.1;
  score_kind score = score_kind::l2;
  modulation_kind s_type = modulation_kind::stdev;
  std::uint64_t seed = 0;
  std::vector<double> rho;  // split proportion(s); empty means 0.5
  bool randomized = false;
  std::uint64_t seed_rand = 0;
  int B = -1;  // unset picks the per-mode default (100 multi, 50 fd)
  double tau = std::numeric_limits<double>::quiet_NaN();  // default 0.1 multi, 0.5 fd
  int lambda = 0;
  Index grid_pts = 100;
  double grid_factor = 1.25;
  unsigned threads = 1;
  bool verbose = false;
  std::string input;
  std::string response_cols;
};

inline score_kind parse_score(const std::string& s) {
  if (s == "l2") return score_kind::l2;
  if (s == "mahalanobis") return score_kind::mahalanobis;
  if (s == "max") return score_kind::max;
  throw error(errc::bad_config, "unknown score '" + s + "'");
}

inline modulation_kind parse_s_type(const std::string& s) {
  if (s == "identity") return modulation_kind::identity;
  if (s == "st-dev") return modulation_kind::stdev;
  if (s == "alpha-max") return modulation_kind::alpha_max;
  throw error(errc::bad_config, "unknown s-type '" + s + "'");
}

inline Model make_model(const std::string& name, double ridge_lambda) {
  if (name == "mean") return mean_model();
  if (name == "ols") return ols_model();
  if (name == "ridge") return ridge_model(ridge_lambda);
  throw error(errc::bad_config, "unknown tabular model '" + name + "'");
}

inline FunctionalModel make_fd_model(const std::string& name) {
  if (name == "mean") return mean_model_fd();
  if (name == "concurrent") return concurrent_model();
  throw error(errc::bad_config, "unknown functional model '" + name + "'");
}

inline int default_B(const RunConfig& cfg) { return cfg.B >= 0 ? cfg.B : (cfg.mode == "fd" ? 50 : 100); }
inline double default_tau(const RunConfig& cfg) {
  return std::isnan(cfg.tau) ? (cfg.mode == "fd" ? 0.5 : 0.1) : cfg.tau;
}
inline double default_rho(const RunConfig& cfg) { return cfg.rho.empty() ? 0.5 : cfg.rho.front(); }

inline json config_echo(const RunConfig& cfg) {
  json j;
  j["mode"] = cfg.mode;
  j["method"] = cfg.method;
  j["model"] = cfg.model;
  if (cfg.model == "ridge") j["ridge_lambda"] = cfg.ridge_lambda;
  j["alpha"] = cfg.alpha;
  j["score"] = score_name(cfg.score);
  j["s_type"] = modulation_name(cfg.s_type);
  if (cfg.method == "split" || cfg.method == "msplit") {
    j["seed"] = cfg.seed;
    j["rho"] = cfg.rho.empty() ? json::array({0.5}) : json(cfg.rho);
    j["randomized"] = cfg.randomized;
    if (cfg.randomized) j["seed_rand"] = cfg.seed_rand;
  }
  if (cfg.method == "msplit") {
    j["B"] = default_B(cfg);
    j["tau"] = default_tau(cfg);
    j["lambda"] = cfg.lambda;
  }
  if (cfg.method == "full") {
    j["grid_pts"] = cfg.grid_pts;
    j["grid_factor"] = cfg.grid_factor;
  }
  // the thread count never changes the computed values, so it is not echoed
  j["input"] = cfg.input;
  if (!cfg.response_cols.empty()) j["response_cols"] = cfg.response_cols;
  return j;
}

namespace detail {

inline json region_block(const std::vector<MultiRegion>& regions) {
  json pred = json::array(), lo = json::array(), up = json::array(), size = json::array();
  for (const auto& r : regions) {
    pred.push_back(to_json(r.pred));
    lo.push_back(to_json(r.lo));
    up.push_back(to_json(r.up));
    size.push_back(jnum(region_size(r)));
  }
  json out;
  out["pred"] = std::move(pred);
  out["lo"] = std::move(lo);
  out["up"] = std::move(up);
  out["size"] = std::move(size);
  if (!regions.empty()) {
    switch (regions.front().geom) {
      case MultiRegion::geometry::box: out["geometry"] = "box"; break;
      case MultiRegion::geometry::ball: out["geometry"] = "ball"; break;
      case MultiRegion::geometry::ellipsoid: out["geometry"] = "ellipsoid"; break;
    }
  }
  return out;
}

inline json band_block(const std::vector<FunctionalBand>& bands) {
  json pred = json::array(), lo = json::array(), up = json::array(), size = json::array();
  for (const auto& b : bands) {
    pred.push_back(to_json(b.pred));
    lo.push_back(to_json(b.lo));
    up.push_back(to_json(b.up));
    size.push_back(jnum(region_size(b)));
  }
  json out;
  out["pred"] = std::move(pred);
  out["lo"] = std::move(lo);
  out["up"] = std::move(up);
  out["size"] = std::move(size);
  return out;
}

inline json run_multi(const RunConfig& cfg) {
  const TabularInput input = ingest_tabular(cfg.input, cfg.response_cols);
  require(input.x0.rows() >= 1, errc::bad_config,
          "no rows flagged as test in '" + cfg.input + "' (add a 0/1 'test' column)");
  const Model model = make_model(cfg.model, cfg.ridge_lambda);

  json doc;
  doc["schema"] = "conformal-result/1";
  doc["mode"] = "multi";
  doc["method"] = cfg.method;
  doc["config"] = config_echo(cfg);
  doc["alpha"] = cfg.alpha;
  doc["responses"] = input.response_names;
  if (input.y0.rows() == input.x0.rows() && input.y0.rows() > 0)
    doc["y0"] = to_json(input.y0);

  if (cfg.method == "full") {
    FullConfig fc;
    fc.alpha = cfg.alpha;
    fc.score = cfg.score;
    fc.s_type = cfg.s_type;
    fc.num_grid_pts_dim = cfg.grid_pts;
    fc.grid_factor = cfg.grid_factor;
    fc.threads = cfg.threads;
    const auto surfaces = conformal_full(input.train, input.x0, model, fc);
    json axes = json::array(), pvals = json::array(), pred = json::array(),
         size = json::array();
    for (const auto& a : surfaces.front().axes) axes.push_back(to_json(a));
    for (const auto& s : surfaces) {
      pvals.push_back(s.pvals);
      pred.push_back(to_json(s.pred));
      size.push_back(jnum(region_size(s)));
    }
    doc["axes"] = std::move(axes);
    doc["pvals"] = std::move(pvals);
    doc["pred"] = std::move(pred);
    doc["size"] = std::move(size);
    return doc;
  }
  if (cfg.method == "split") {
    SplitConfig sc;
    sc.alpha = cfg.alpha;
    sc.rho = default_rho(cfg);
    sc.seed = cfg.seed;
    sc.randomized = cfg.randomized;
    sc.seed_rand = cfg.seed_rand;
    sc.score = cfg.score;
    sc.s_type = cfg.s_type;
    doc.update(region_block(conformal_split(input.train, input.x0, model, sc)));
    return doc;
  }
  if (cfg.method == "jackplus") {
    doc.update(region_block(
        conformal_jackplus(input.train, input.x0, model, cfg.alpha, cfg.threads)));
    return doc;
  }
  if (cfg.method == "msplit") {
    MsplitConfig mc;
    mc.alpha = cfg.alpha;
    mc.B = default_B(cfg);
    mc.tau = default_tau(cfg);
    mc.lambda = cfg.lambda;
    mc.rho = cfg.rho;
    mc.score = cfg.score;
    mc.s_type = cfg.s_type;
    mc.seed = cfg.seed;
    mc.randomized = cfg.randomized;
    mc.seed_rand = cfg.seed_rand;
    mc.threads = cfg.threads;
    doc.update(region_block(conformal_msplit(input.train, input.x0, model, mc)));
    return doc;
  }
  throw error(errc::bad_config, "unknown method '" + cfg.method + "'");
}

inline json run_fd(const RunConfig& cfg) {
  const FunctionalInput input = ingest_functional(cfg.input);
  const FunctionalModel model = make_fd_model(cfg.model);

  json doc;
  doc["schema"] = "conformal-result/1";
  doc["mode"] = "fd";
  doc["method"] = cfg.method;
  doc["config"] = config_echo(cfg);
  doc["alpha"] = cfg.alpha;
  json grids = json::array();
  for (const auto& g : input.y.grids) grids.push_back(to_json(g));
  doc["t"] = std::move(grids);
  if (!input.y0.empty()) doc["y0"] = to_json(input.y0);

  if (cfg.method == "split") {
    FdSplitConfig sc;
    sc.alpha = cfg.alpha;
    sc.rho = default_rho(cfg);
    sc.seed = cfg.seed;
    sc.randomized = cfg.randomized;
    sc.seed_rand = cfg.seed_rand;
    sc.s_type = cfg.s_type;
    doc.update(band_block(conformal_split_fd(input.y, input.x, input.x0, model, sc)));
    return doc;
  }
  if (cfg.method == "jackplus") {
    doc.update(band_block(
        conformal_jackplus_fd(input.y, input.x, input.x0, model, cfg.alpha, cfg.threads)));
    return doc;
  }
  if (cfg.method == "msplit") {
    FdMsplitConfig mc;
    mc.alpha = cfg.alpha;
    mc.B = default_B(cfg);
    mc.tau = default_tau(cfg);
    mc.lambda = cfg.lambda;
    mc.rho = cfg.rho;
    mc.s_type = cfg.s_type;
    mc.seed = cfg.seed;
    mc.randomized = cfg.randomized;
    mc.seed_rand = cfg.seed_rand;
    mc.threads = cfg.threads;
    doc.update(band_block(conformal_msplit_fd(input.y, input.x, input.x0, model, mc)));
    return doc;
  }
  if (cfg.method == "full")
    throw error(errc::bad_config, "full conformal is not available for functional responses");
  throw error(errc::bad_config, "unknown method '" + cfg.method + "'");
}

}  // namespace detail

// Dispatches one configured invocation and returns the result document.
inline json run(const RunConfig& cfg) {
  if (cfg.mode == "multi") return detail::run_multi(cfg);
  if (cfg.mode == "fd") return detail::run_fd(cfg);
  throw error(errc::bad_config, "unknown mode '" + cfg.mode + "'");
}

inline void write_document(const json& doc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), errc::parse_error, "cannot write '" + path + "'");
  out << doc.dump() << '\n';
}

}  // namespace conformal
