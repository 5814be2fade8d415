#pragma once

#include <any>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "conformal/data.hpp"
#include "conformal/errors.hpp"

namespace conformal {

// Fitted-parameter payload; opaque to everything except the model that made it.
using ModelFit = std::any;

// Regression plug-in for tabular responses. Any pair of procedures with these
// shapes can drive every prediction method in the library. train must be
// deterministic for identical inputs; predict returns one row per test point
// and q columns.
struct Model {
  std::function<ModelFit(const Matrix& x, const Matrix& y)> train;
  std::function<Matrix(const ModelFit& fit, const Matrix& x0)> predict;
};

// Regression plug-in for functional responses. Covariate curves may be absent
// (covariate-free models ignore them); predict returns one q-curve set per
// test entry.
using CurveSet = std::vector<Vector>;  // q curves for one observation

struct FunctionalModel {
  std::function<ModelFit(const std::optional<FunctionalDataset>& x, const FunctionalDataset& y)>
      train;
  std::function<std::vector<CurveSet>(const ModelFit& fit, const std::vector<CurveSet>& x0)>
      predict;
};

// ---------------------------------------------------------------------------
// Built-in tabular models
// ---------------------------------------------------------------------------

namespace detail {

inline Matrix with_intercept(const Matrix& x) {
  Matrix d(x.rows(), x.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(x.cols()) = x;
  return d;
}

// Minimum-norm least squares; rank-deficient designs are fine, LOO loops must
// never abort on a degenerate fold.
inline Matrix solve_least_squares(const Matrix& design, const Matrix& rhs) {
  return design.completeOrthogonalDecomposition().solve(rhs);
}

}  // namespace detail

// Predicts the columnwise training mean for every test row.
inline Model mean_model() {
  Model m;
  m.train = [](const Matrix& x, const Matrix& y) -> ModelFit {
    (void)x;
    require(y.rows() > 0, errc::empty_training, "mean model needs at least one observation");
    Eigen::RowVectorXd mu = y.colwise().mean();
    return mu;
  };
  m.predict = [](const ModelFit& fit, const Matrix& x0) -> Matrix {
    const auto& mu = std::any_cast<const Eigen::RowVectorXd&>(fit);
    Matrix out(x0.rows(), mu.size());
    out.rowwise() = mu;
    return out;
  };
  return m;
}

// Per-component ordinary least squares with intercept.
inline Model ols_model() {
  Model m;
  m.train = [](const Matrix& x, const Matrix& y) -> ModelFit {
    require(y.rows() > 0, errc::empty_training, "ols model needs at least one observation");
    Matrix beta = detail::solve_least_squares(detail::with_intercept(x), y);
    return beta;  // (p+1) x q
  };
  m.predict = [](const ModelFit& fit, const Matrix& x0) -> Matrix {
    const auto& beta = std::any_cast<const Matrix&>(fit);
    return detail::with_intercept(x0) * beta;
  };
  return m;
}

// Ridge regression with unpenalized intercept and unstandardized features,
// solved as least squares on the lambda-augmented system.
inline Model ridge_model(double lambda) {
  require(lambda >= 0.0, errc::bad_lambda, "ridge lambda must be nonnegative");
  Model m;
  m.train = [lambda](const Matrix& x, const Matrix& y) -> ModelFit {
    require(y.rows() > 0, errc::empty_training, "ridge model needs at least one observation");
    const Index p = x.cols();
    Matrix design(x.rows() + p, p + 1);
    design.topRows(x.rows()) = detail::with_intercept(x);
    design.bottomRows(p).setZero();
    design.bottomRightCorner(p, p).diagonal().setConstant(std::sqrt(lambda));
    Matrix rhs = Matrix::Zero(x.rows() + p, y.cols());
    rhs.topRows(x.rows()) = y;
    Matrix beta = detail::solve_least_squares(design, rhs);
    return beta;
  };
  m.predict = [](const ModelFit& fit, const Matrix& x0) -> Matrix {
    const auto& beta = std::any_cast<const Matrix&>(fit);
    return detail::with_intercept(x0) * beta;
  };
  return m;
}

// ---------------------------------------------------------------------------
// Built-in functional models
// ---------------------------------------------------------------------------

// Predicts the pointwise cross-observation mean curve for every test entry.
inline FunctionalModel mean_model_fd() {
  FunctionalModel m;
  m.train = [](const std::optional<FunctionalDataset>& x, const FunctionalDataset& y) -> ModelFit {
    (void)x;
    require(y.n() > 0, errc::empty_training, "functional mean model needs at least one curve");
    CurveSet mean(y.q());
    for (std::size_t j = 0; j < y.q(); ++j) {
      Vector acc = Vector::Zero(y.grids[j].size());
      for (std::size_t i = 0; i < y.n(); ++i) acc += y.y[i][j];
      mean[j] = acc / static_cast<double>(y.n());
    }
    return mean;
  };
  m.predict = [](const ModelFit& fit, const std::vector<CurveSet>& x0) -> std::vector<CurveSet> {
    const auto& mean = std::any_cast<const CurveSet&>(fit);
    return std::vector<CurveSet>(x0.size(), mean);
  };
  return m;
}

namespace detail {

struct ConcurrentFit {
  std::vector<Matrix> beta;  // one (p+1) x q coefficient block per grid point
  std::size_t p = 0;
  std::size_t q = 0;
  Index grid_len = 0;
};

// All covariate and response components of the concurrent model must share one
// evaluation grid.
inline void check_common_grid(const std::optional<FunctionalDataset>& x,
                              const FunctionalDataset& y) {
  const Vector& ref = y.grids[0];
  for (std::size_t j = 1; j < y.q(); ++j)
    require(y.grids[j].size() == ref.size() && y.grids[j] == ref, errc::grid_mismatch,
            "concurrent model: response components use different grids");
  if (x) {
    for (std::size_t j = 0; j < x->q(); ++j)
      require(x->grids[j].size() == ref.size() && x->grids[j] == ref, errc::grid_mismatch,
              "concurrent model: covariate grid differs from response grid");
    require(x->n() == y.n(), errc::dimension_mismatch,
            "concurrent model: covariate/response observation counts differ");
  }
}

}  // namespace detail

// Pointwise-in-t linear model y_j(t) = beta_0(t) + sum_i beta_i(t) x_i(t):
// an independent least-squares fit at every grid point.
inline FunctionalModel concurrent_model() {
  FunctionalModel m;
  m.train = [](const std::optional<FunctionalDataset>& x, const FunctionalDataset& y) -> ModelFit {
    require(y.n() > 0, errc::empty_training, "concurrent model needs at least one curve");
    detail::check_common_grid(x, y);
    detail::ConcurrentFit fit;
    fit.p = x ? x->q() : 0;
    fit.q = y.q();
    fit.grid_len = y.grids[0].size();
    fit.beta.reserve(static_cast<std::size_t>(fit.grid_len));
    const auto n = static_cast<Index>(y.n());
    for (Index t = 0; t < fit.grid_len; ++t) {
      Matrix design(n, static_cast<Index>(fit.p) + 1);
      design.col(0).setOnes();
      for (std::size_t f = 0; f < fit.p; ++f)
        for (Index i = 0; i < n; ++i)
          design(i, static_cast<Index>(f) + 1) = x->y[static_cast<std::size_t>(i)][f][t];
      Matrix rhs(n, static_cast<Index>(fit.q));
      for (std::size_t j = 0; j < fit.q; ++j)
        for (Index i = 0; i < n; ++i) rhs(i, static_cast<Index>(j)) = y.y[static_cast<std::size_t>(i)][j][t];
      fit.beta.push_back(detail::solve_least_squares(design, rhs));
    }
    return fit;
  };
  m.predict = [](const ModelFit& anyfit, const std::vector<CurveSet>& x0) -> std::vector<CurveSet> {
    const auto& fit = std::any_cast<const detail::ConcurrentFit&>(anyfit);
    std::vector<CurveSet> out(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) {
      require(x0[i].size() == fit.p, errc::dimension_mismatch,
              "concurrent predict: test entry has " + std::to_string(x0[i].size()) +
                  " covariate curves, expected " + std::to_string(fit.p));
      CurveSet curves(fit.q, Vector(fit.grid_len));
      Eigen::RowVectorXd row(static_cast<Index>(fit.p) + 1);
      for (Index t = 0; t < fit.grid_len; ++t) {
        row[0] = 1.0;
        for (std::size_t f = 0; f < fit.p; ++f) {
          require(x0[i][f].size() == fit.grid_len, errc::grid_mismatch,
                  "concurrent predict: covariate curve length differs from training grid");
          row[static_cast<Index>(f) + 1] = x0[i][f][t];
        }
        Eigen::RowVectorXd yhat = row * fit.beta[static_cast<std::size_t>(t)];
        for (std::size_t j = 0; j < fit.q; ++j) curves[j][t] = yhat[static_cast<Index>(j)];
      }
      out[i] = std::move(curves);
    }
    return out;
  };
  return m;
}

}  // namespace conformal
