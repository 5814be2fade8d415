#include <catch_amalgamated.hpp>

#include "conformal/multi.hpp"

using namespace conformal;

namespace {

Matrix col(std::initializer_list<double> vals) {
  Matrix m(static_cast<Index>(vals.size()), 1);
  Index i = 0;
  for (double v : vals) m(i++, 0) = v;
  return m;
}

// Stub model that predicts zero everywhere; lets a test pin the LOO
// residuals to the raw responses.
Model zero_model() {
  Model m;
  m.train = [](const Matrix&, const Matrix& y) -> ModelFit { return y.cols(); };
  m.predict = [](const ModelFit& fit, const Matrix& x0) -> Matrix {
    return Matrix::Zero(x0.rows(), std::any_cast<Index>(fit));
  };
  return m;
}

TabularDataset linear_data(std::mt19937_64& gen, Index n, double noise = 1.0) {
  Matrix x(n, 1), y(n, 1);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = standard_normal(gen);
    y(i, 0) = 2.0 * x(i, 0) + noise * standard_normal(gen);
  }
  return TabularDataset{std::move(x), std::move(y)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Full conformal
// ---------------------------------------------------------------------------

TEST_CASE("delta counts scores at least as large as the candidate's") {
  CHECK(delta_from_scores({1.0, 2.0, 3.0, 2.5}) == Catch::Approx(0.5));
  CHECK(delta_from_scores({5.0}) == Catch::Approx(1.0));
  CHECK(delta_from_scores({1.0, 1.0, 1.0}) == Catch::Approx(1.0));  // ties count
}

TEST_CASE("full candidate axes follow the grid formula") {
  // max|y| = 10, factor 1.25, 5 points -> {-12.5, -6.25, 0, 6.25, 12.5}
  const auto axes = full_candidate_axes(col({10, -3, 7}), 5, 1.25);
  REQUIRE(axes.size() == 1);
  const Vector expected = (Vector(5) << -12.5, -6.25, 0.0, 6.25, 12.5).finished();
  CHECK((axes[0] - expected).array().abs().maxCoeff() < 1e-12);
}

TEST_CASE("full with a single training point keeps every candidate") {
  TabularDataset ds{col({0.0}), col({1.0})};  // n = 1, below the validator's reach
  FullConfig fc;
  fc.alpha = 0.1;
  fc.num_grid_pts_dim = 7;
  const auto surfaces = conformal_full(ds, col({0.5}), mean_model(), fc);
  REQUIRE(surfaces.size() == 1);
  for (double p : surfaces[0].pvals) {
    const bool on_ladder = p == Catch::Approx(0.5) || p == Catch::Approx(1.0);
    CHECK(on_ladder);
    CHECK(p > fc.alpha);
  }
}

TEST_CASE("full p-values live on the rank ladder") {
  std::mt19937_64 gen(2);
  const auto ds = linear_data(gen, 12);
  FullConfig fc;
  fc.num_grid_pts_dim = 9;
  const auto surfaces = conformal_full(ds, col({0.3}), ols_model(), fc);
  const double step = 1.0 / 13.0;
  for (double p : surfaces[0].pvals) {
    const double k = p / step;
    CHECK(std::abs(k - std::round(k)) < 1e-9);
    CHECK(p >= step - 1e-12);
    CHECK(p <= 1.0 + 1e-12);
  }
}

TEST_CASE("full matches an independent rank-count oracle") {
  std::mt19937_64 gen(8);
  const auto model = mean_model();
  for (int rep = 0; rep < 5; ++rep) {
    const Index n = 4 + static_cast<Index>(gen() % 7);
    const auto ds = linear_data(gen, n);
    const Matrix x0 = col({standard_normal(gen)});
    FullConfig fc;
    fc.num_grid_pts_dim = 6;
    fc.s_type = modulation_kind::identity;
    const auto surf = conformal_full(ds, x0, model, fc)[0];
    for (std::size_t c = 0; c < surf.candidate_count(); ++c) {
      const Vector cand = surf.candidate(c);
      // oracle: refit by hand, count ranks with its own arithmetic
      Matrix ya(n + 1, 1);
      ya.topRows(n) = ds.y;
      ya(n, 0) = cand[0];
      const double mean = ya.mean();
      std::size_t count = 0;
      const double r_new = std::abs(cand[0] - mean);
      for (Index i = 0; i <= n; ++i)
        if (std::abs(ya(i, 0) - mean) >= r_new) ++count;
      const double expected = static_cast<double>(count) / static_cast<double>(n + 1);
      REQUIRE(surf.pvals[c] == Catch::Approx(expected).margin(1e-12));
    }
  }
}

TEST_CASE("full guards") {
  std::mt19937_64 gen(4);
  const auto ds = linear_data(gen, 6);
  FullConfig fc;
  fc.alpha = 0.0;
  CHECK_THROWS_MATCHES(conformal_full(ds, col({0.0}), mean_model(), fc), error,
                       Catch::Matchers::Predicate<error>(
                           [](const error& e) { return e.code() == errc::bad_alpha; }));

  Matrix y2(6, 2);
  y2.setOnes();
  TabularDataset wide{ds.x, y2};
  FullConfig caps;
  caps.num_grid_pts_dim = 1001;  // 1001^2 candidates
  CHECK_THROWS_MATCHES(conformal_full(wide, Matrix::Zero(1, 1), mean_model(), caps), error,
                       Catch::Matchers::Predicate<error>(
                           [](const error& e) { return e.code() == errc::grid_explosion; }));
}

TEST_CASE("full deltas are super-uniform on exchangeable data") {
  std::mt19937_64 gen(77);
  const auto model = mean_model();
  int low = 0;
  const int trials = 200;
  for (int rep = 0; rep < trials; ++rep) {
    const auto ds = linear_data(gen, 20, 1.0);
    const Vector y_true = col({2.0 * 0.1 + standard_normal(gen)}).col(0);
    FullConfig fc;
    fc.s_type = modulation_kind::identity;
    const double delta =
        conformal_full_pvalue(ds, Vector::Constant(1, 0.1), y_true, model, fc);
    if (delta <= 0.25) ++low;
  }
  CHECK(static_cast<double>(low) / trials <= 0.25 + 0.10);
}

// ---------------------------------------------------------------------------
// Split conformal
// ---------------------------------------------------------------------------

TEST_CASE("split order statistic by hand") {
  // train responses 0, calibration residuals 1..9, alpha = 0.1 -> d = 9.
  Matrix x(11, 1);
  x.setZero();
  Matrix y(11, 1);
  y << 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9;
  TabularDataset ds{x, y};
  SplitConfig sc;
  sc.alpha = 0.1;
  sc.split = std::vector<std::size_t>{0, 1};
  sc.s_type = modulation_kind::identity;
  sc.score = score_kind::max;
  const auto regions = conformal_split(ds, col({0.0}), mean_model(), sc);
  REQUIRE(regions.size() == 1);
  CHECK(regions[0].pred[0] == Catch::Approx(0.0));
  CHECK(regions[0].lo[0] == Catch::Approx(-9.0));
  CHECK(regions[0].up[0] == Catch::Approx(9.0));
}

TEST_CASE("zero calibration residuals collapse the region") {
  Matrix x(12, 1);
  x.setZero();
  Matrix y = Matrix::Constant(12, 1, 3.0);
  TabularDataset ds{x, y};
  SplitConfig sc;
  sc.alpha = 0.2;
  sc.seed = 3;
  sc.s_type = modulation_kind::identity;
  const auto regions = conformal_split(ds, col({0.0}), mean_model(), sc);
  CHECK(regions[0].lo[0] == Catch::Approx(3.0));
  CHECK(regions[0].up[0] == Catch::Approx(3.0));
}

TEST_CASE("smoothed rank with tau = 1 recovers the classical rank") {
  for (std::size_t l : {1u, 2u, 5u, 9u, 40u, 99u})
    for (double alpha : {0.01, 0.05, 0.1, 0.25, 0.5, 0.9})
      CHECK(split_rank_smoothed(l, alpha, 1.0) == split_rank(l, alpha));
}

TEST_CASE("out-of-range split rank gives an unbounded region") {
  std::mt19937_64 gen(5);
  const auto ds = linear_data(gen, 6);
  SplitConfig sc;
  sc.alpha = 0.01;  // k = ceil(4 * 0.99) = 4 > l = 3
  sc.seed = 1;
  const auto regions = conformal_split(ds, col({0.0}), ols_model(), sc);
  CHECK(std::isinf(regions[0].lo[0]));
  CHECK(std::isinf(regions[0].up[0]));
  CHECK(region_contains(regions[0], col({1e9}).col(0)));
}

TEST_CASE("l2 split regions report the exact ellipse size and membership") {
  std::mt19937_64 gen(6);
  const Index n = 40;
  Matrix x(n, 1), y(n, 2);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = standard_normal(gen);
    y(i, 0) = x(i, 0) + 0.3 * standard_normal(gen);
    y(i, 1) = -x(i, 0) + 0.7 * standard_normal(gen);
  }
  TabularDataset ds{x, y};
  SplitConfig sc;
  sc.alpha = 0.2;
  sc.seed = 9;
  sc.score = score_kind::l2;
  const auto r = conformal_split(ds, col({0.0}), ols_model(), sc)[0];
  REQUIRE(r.geom == MultiRegion::geometry::ball);
  const double pi = std::acos(-1.0);
  CHECK(region_size(r) ==
        Catch::Approx(pi * (r.radius * r.scale[0]) * (r.radius * r.scale[1])));
  // the box circumscribes the ellipse: corners sit outside, axis points inside
  CHECK_FALSE(region_contains(r, r.up));
  Vector axis_pt = r.pred;
  axis_pt[0] = r.up[0];
  CHECK(region_contains(r, axis_pt));
  CHECK(region_size(r) < (r.up - r.lo).prod());
}

TEST_CASE("mahalanobis split membership matches the quadratic form") {
  std::mt19937_64 gen(16);
  const Index n = 60;
  Matrix x(n, 1), y(n, 2);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = standard_normal(gen);
    y(i, 0) = x(i, 0) + standard_normal(gen);
    y(i, 1) = 0.5 * y(i, 0) + 0.2 * standard_normal(gen);
  }
  TabularDataset ds{x, y};
  SplitConfig sc;
  sc.alpha = 0.15;
  sc.seed = 2;
  sc.score = score_kind::mahalanobis;
  const auto r = conformal_split(ds, col({0.2}), ols_model(), sc)[0];
  REQUIRE(r.geom == MultiRegion::geometry::ellipsoid);
  for (int rep = 0; rep < 200; ++rep) {
    Vector probe = r.pred;
    probe[0] += 3.0 * (uniform_real01(gen) - 0.5) * (r.up[0] - r.lo[0]);
    probe[1] += 3.0 * (uniform_real01(gen) - 0.5) * (r.up[1] - r.lo[1]);
    const Vector d = probe - r.pred;
    const bool in_ellipsoid = d.dot(r.cov_inv * d) <= r.radius;
    CHECK(region_contains(r, probe) == in_ellipsoid);
    if (in_ellipsoid) {
      for (Index j = 0; j < 2; ++j) {
        CHECK(probe[j] >= r.lo[j] - 1e-12);
        CHECK(probe[j] <= r.up[j] + 1e-12);
      }
    }
  }
}

TEST_CASE("split regions grow as alpha shrinks") {
  std::mt19937_64 gen(30);
  const auto ds = linear_data(gen, 60);
  for (auto score : {score_kind::l2, score_kind::max, score_kind::mahalanobis}) {
    double last = -1.0;
    for (double alpha : {0.5, 0.25, 0.1, 0.05}) {
      SplitConfig sc;
      sc.alpha = alpha;
      sc.seed = 11;
      sc.score = score;
      const auto r = conformal_split(ds, col({0.0}), ols_model(), sc)[0];
      const double width = r.up[0] - r.lo[0];
      CHECK(width >= last);
      last = width;
    }
  }
}

TEST_CASE("split coverage smoke test") {
  std::mt19937_64 gen(55);
  int covered = 0;
  const int trials = 60;
  for (int rep = 0; rep < trials; ++rep) {
    const auto ds = linear_data(gen, 80);
    const double xt = standard_normal(gen);
    const double yt = 2.0 * xt + standard_normal(gen);
    SplitConfig sc;
    sc.alpha = 0.2;
    sc.seed = derive_seed(1000, static_cast<std::uint64_t>(rep));
    const auto r = conformal_split(ds, col({xt}), ols_model(), sc)[0];
    covered += region_contains(r, col({yt}).col(0)) ? 1 : 0;
  }
  const double cov = static_cast<double>(covered) / trials;
  CHECK(cov >= 0.65);
}

// ---------------------------------------------------------------------------
// Jackknife+
// ---------------------------------------------------------------------------

TEST_CASE("jackknife+ univariate order statistics by hand") {
  // zero model: mu_{-i}(x0) = 0 and R = {1,2,3,4}; alpha = 0.25 -> [-4, 4].
  TabularDataset ds{Matrix::Zero(4, 1), col({1, 2, 3, 4})};
  const auto regions = conformal_jackplus(ds, col({0.0}), zero_model(), 0.25);
  CHECK(regions[0].lo[0] == Catch::Approx(-4.0));
  CHECK(regions[0].up[0] == Catch::Approx(4.0));
}

TEST_CASE("jackknife+ collapses on constant data") {
  Matrix x(5, 1);
  x.setZero();
  Matrix y(5, 2);
  y.col(0).setConstant(1.0);
  y.col(1).setConstant(-2.0);
  TabularDataset ds{x, y};
  const auto regions = conformal_jackplus(ds, col({0.0}), mean_model(), 0.2);
  CHECK(regions[0].lo[0] == Catch::Approx(1.0));
  CHECK(regions[0].up[0] == Catch::Approx(1.0));
  CHECK(regions[0].lo[1] == Catch::Approx(-2.0));
  CHECK(regions[0].up[1] == Catch::Approx(-2.0));
}

TEST_CASE("jackknife+ box contains every retained candidate") {
  std::mt19937_64 gen(9);
  Matrix x(12, 1), y(12, 2);
  for (Index i = 0; i < 12; ++i) {
    x(i, 0) = standard_normal(gen);
    y(i, 0) = x(i, 0) + 0.4 * standard_normal(gen);
    y(i, 1) = -2.0 * x(i, 0) + 0.4 * standard_normal(gen);
  }
  TabularDataset ds{x, y};
  const auto result = conformal_jackplus_detailed(ds, col({0.1}), ols_model(), 0.2);
  const auto& region = result.regions[0];
  const auto& detail = result.details[0];
  CHECK(detail.retained.size() ==
        static_cast<std::size_t>(std::ceil(0.8 * 24.0 - 1e-9)));
  for (std::size_t idx : detail.retained) {
    const Vector& c = detail.candidates[idx];
    for (Index j = 0; j < 2; ++j) {
      CHECK(c[j] >= region.lo[j] - 1e-12);
      CHECK(c[j] <= region.up[j] + 1e-12);
    }
  }
}

TEST_CASE("jackknife+ retained set matches a brute-force conformity sort") {
  std::mt19937_64 gen(14);
  for (int rep = 0; rep < 10; ++rep) {
    const Index n = 3 + static_cast<Index>(gen() % 3);
    const Index q = 2 + static_cast<Index>(gen() % 2);
    Matrix x(n, 1), y(n, q);
    for (Index i = 0; i < n; ++i) {
      x(i, 0) = standard_normal(gen);
      for (Index j = 0; j < q; ++j) y(i, j) = standard_normal(gen);
    }
    TabularDataset ds{x, y};
    const double alpha = 0.25;
    const auto result = conformal_jackplus_detailed(ds, col({0.0}), mean_model(), alpha);
    const auto& det = result.details[0];

    // independent selection: score every candidate with plain loops
    std::vector<double> scores;
    for (const auto& c : det.candidates) {
      double worst = 0.0;
      for (Index j = 0; j < q; ++j) {
        const double dev =
            std::abs(0.5 * ((c[j] - det.center.m1[j]) + (c[j] - det.center.m2[j])));
        worst = std::max(worst, dev / det.s[j]);
      }
      scores.push_back(worst);
    }
    const auto k = static_cast<std::size_t>(
        std::ceil((1.0 - alpha) * static_cast<double>(2 * n) - 1e-9));
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
    REQUIRE(det.retained == order);
  }
}

TEST_CASE("jackknife+ guards") {
  TabularDataset tiny{Matrix::Zero(1, 1), col({1.0})};
  CHECK_THROWS_MATCHES(conformal_jackplus(tiny, col({0.0}), mean_model(), 0.1), error,
                       Catch::Matchers::Predicate<error>(
                           [](const error& e) { return e.code() == errc::too_few_rows; }));
}

// ---------------------------------------------------------------------------
// Multi split conformal
// ---------------------------------------------------------------------------

TEST_CASE("interval overlap union, hand case") {
  // [0,4], [1,5], [2,6] with threshold 2 -> [1,5]
  const auto region = interval_overlap_union({{0, 4}, {1, 5}, {2, 6}}, 2);
  REQUIRE(region.size() == 1);
  CHECK(region[0].lo == Catch::Approx(1.0));
  CHECK(region[0].up == Catch::Approx(5.0));
}

TEST_CASE("interval overlap union handles gaps and point overlaps") {
  // [0,1] and [1,2] overlap only at the shared endpoint
  const auto point = interval_overlap_union({{0, 1}, {1, 2}}, 2);
  REQUIRE(point.size() == 1);
  CHECK(point[0].lo == Catch::Approx(1.0));
  CHECK(point[0].up == Catch::Approx(1.0));

  // two disjoint pairs produce two pieces
  const auto pieces = interval_overlap_union({{0, 1}, {0.2, 1.1}, {3, 4}, {3.5, 5}}, 2);
  REQUIRE(pieces.size() == 2);
  CHECK(pieces[0].lo == Catch::Approx(0.2));
  CHECK(pieces[0].up == Catch::Approx(1.0));
  CHECK(pieces[1].lo == Catch::Approx(3.5));
  CHECK(pieces[1].up == Catch::Approx(4.0));
}

TEST_CASE("interval overlap union matches pointwise counting") {
  std::mt19937_64 gen(18);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<Interval> ivs;
    const std::size_t B = 2 + gen() % 8;
    for (std::size_t b = 0; b < B; ++b) {
      const double lo = 4.0 * (uniform_real01(gen) - 0.5);
      ivs.push_back({lo, lo + 2.0 * uniform_real01(gen)});
    }
    const std::size_t threshold = 1 + gen() % B;
    const auto region = interval_overlap_union(ivs, threshold);
    for (int probe = 0; probe <= 100; ++probe) {
      const double y = -3.0 + 6.0 * probe / 100.0;
      std::size_t count = 0;
      for (const auto& iv : ivs) count += (iv.lo <= y && y <= iv.up) ? 1 : 0;
      const bool expected = count >= threshold;
      bool inside = false;
      for (const auto& piece : region) inside = inside || (piece.lo <= y && y <= piece.up);
      REQUIRE(inside == expected);
    }
  }
}

TEST_CASE("msplit with a single replicate reduces to that split") {
  std::mt19937_64 gen(21);
  const auto ds = linear_data(gen, 40);
  MsplitConfig mc;
  mc.alpha = 0.2;
  mc.B = 1;
  mc.tau = 0.5;
  mc.seed = 77;
  const auto ms = conformal_msplit(ds, col({0.0}), ols_model(), mc)[0];

  SplitConfig sc;
  sc.alpha = 0.2 * (1.0 - 0.5);  // inner level with lambda = 0
  sc.seed = derive_seed(77, 0);
  sc.score = score_kind::max;
  const auto sp = conformal_split(ds, col({0.0}), ols_model(), sc)[0];
  CHECK(ms.lo[0] == Catch::Approx(sp.lo[0]));
  CHECK(ms.up[0] == Catch::Approx(sp.up[0]));
}

TEST_CASE("msplit with pinned splits is idempotent") {
  std::mt19937_64 gen(23);
  const Index n = 30;
  Matrix x(n, 1), y(n, 2);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = standard_normal(gen);
    y(i, 0) = x(i, 0) + 0.2 * standard_normal(gen);
    y(i, 1) = -x(i, 0) + 0.2 * standard_normal(gen);
  }
  TabularDataset ds{x, y};
  std::vector<std::size_t> fixed;
  for (std::size_t i = 0; i < 15; ++i) fixed.push_back(i);

  MsplitConfig mc;
  mc.alpha = 0.2;
  mc.B = 10;
  mc.tau = 0.3;
  mc.split = fixed;
  const auto ms = conformal_msplit(ds, col({0.1}), ols_model(), mc)[0];

  SplitConfig sc;
  sc.alpha = 0.2 * (1.0 - 0.3);
  sc.split = fixed;
  sc.score = score_kind::max;
  const auto sp = conformal_split(ds, col({0.1}), ols_model(), sc)[0];
  for (Index j = 0; j < 2; ++j) {
    CHECK(ms.lo[j] == Catch::Approx(sp.lo[j]));
    CHECK(ms.up[j] == Catch::Approx(sp.up[j]));
  }
}

TEST_CASE("msplit guards") {
  std::mt19937_64 gen(25);
  const auto ds = linear_data(gen, 20);
  MsplitConfig mc;
  mc.B = 0;
  CHECK_THROWS_MATCHES(conformal_msplit(ds, col({0.0}), ols_model(), mc), error,
                       Catch::Matchers::Predicate<error>(
                           [](const error& e) { return e.code() == errc::bad_tau; }));
  mc.B = 10;
  mc.tau = 0.1;
  mc.lambda = 1000;  // inner level above 1
  CHECK_THROWS_MATCHES(conformal_msplit(ds, col({0.0}), ols_model(), mc), error,
                       Catch::Matchers::Predicate<error>(
                           [](const error& e) { return e.code() == errc::bad_inner_alpha; }));
}

TEST_CASE("full conformal membership grows as alpha shrinks") {
  std::mt19937_64 gen(27);
  const auto ds = linear_data(gen, 15);
  FullConfig fc;
  fc.num_grid_pts_dim = 15;
  const auto surf = conformal_full(ds, col({0.1}), ols_model(), fc)[0];
  std::size_t tight = 0, loose = 0;
  for (double p : surf.pvals) {
    tight += (p > 0.3) ? 1 : 0;
    loose += (p > 0.1) ? 1 : 0;
  }
  CHECK(loose >= tight);
}

TEST_CASE("jackknife+ and msplit regions grow as alpha shrinks") {
  std::mt19937_64 gen(28);
  const auto ds = linear_data(gen, 40);
  const Matrix x0 = col({0.3});

  double last = -1.0;
  for (double alpha : {0.5, 0.25, 0.1}) {
    const auto r = conformal_jackplus(ds, x0, ols_model(), alpha)[0];
    const double width = r.up[0] - r.lo[0];
    CHECK(width >= last);
    last = width;
  }

  last = -1.0;
  for (double alpha : {0.5, 0.25, 0.1}) {
    MsplitConfig mc;
    mc.alpha = alpha;
    mc.B = 10;
    mc.tau = 0.2;
    mc.seed = 4;  // same replicate splits across alphas
    const auto r = conformal_msplit(ds, x0, ols_model(), mc)[0];
    const double width = r.up[0] - r.lo[0];
    CHECK(width >= last);
    last = width;
  }
}

TEST_CASE("msplit is deterministic across thread counts") {
  std::mt19937_64 gen(26);
  Matrix x(24, 1), y(24, 2);
  for (Index i = 0; i < 24; ++i) {
    x(i, 0) = standard_normal(gen);
    y(i, 0) = x(i, 0) + 0.3 * standard_normal(gen);
    y(i, 1) = x(i, 0) - 0.3 * standard_normal(gen);
  }
  TabularDataset ds{x, y};
  const Matrix x0 = col({0.2});

  Vector first_lo, first_up;
  for (unsigned threads : {1u, 4u}) {
    MsplitConfig mc;
    mc.alpha = 0.2;
    mc.B = 12;
    mc.seed = 5;
    mc.tau = 0.25;
    mc.threads = threads;
    const auto ms = conformal_msplit(ds, x0, ols_model(), mc)[0];
    if (threads == 1) {
      first_lo = ms.lo;
      first_up = ms.up;
    } else {
      CHECK((ms.lo - first_lo).norm() == 0.0);
      CHECK((ms.up - first_up).norm() == 0.0);
    }
  }
}
