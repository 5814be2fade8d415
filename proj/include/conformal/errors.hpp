#pragma once

#include <stdexcept>
#include <string>

namespace conformal {

enum class errc {
  // data / shape problems
  dimension_mismatch,
  non_finite,
  too_few_rows,
  empty_training,
  grid_mismatch,
  parse_error,
  missing_column,
  schema_error,
  unsupported_result,
  bad_explicit,
  // flag / configuration problems
  bad_config,
  // parameter / numeric domain problems
  bad_rho,
  bad_alpha,
  bad_lambda,
  bad_tau,
  bad_inner_alpha,
  bad_level,
  missing_covariance,
  non_positive_modulation,
  too_few_residuals,
  index_overflow,
  empty_set,
  empty_calibration,
  grid_explosion,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::non_finite: return "NonFinite";
    case errc::too_few_rows: return "TooFewRows";
    case errc::empty_training: return "EmptyTraining";
    case errc::grid_mismatch: return "GridMismatch";
    case errc::parse_error: return "ParseError";
    case errc::missing_column: return "MissingColumn";
    case errc::schema_error: return "SchemaError";
    case errc::unsupported_result: return "UnsupportedResult";
    case errc::bad_explicit: return "BadExplicit";
    case errc::bad_config: return "BadConfig";
    case errc::bad_rho: return "BadRho";
    case errc::bad_alpha: return "BadAlpha";
    case errc::bad_lambda: return "BadLambda";
    case errc::bad_tau: return "BadTau";
    case errc::bad_inner_alpha: return "BadInnerAlpha";
    case errc::bad_level: return "BadLevel";
    case errc::missing_covariance: return "MissingCovariance";
    case errc::non_positive_modulation: return "NonPositiveModulation";
    case errc::too_few_residuals: return "TooFewResiduals";
    case errc::index_overflow: return "IndexOverflow";
    case errc::empty_set: return "EmptySet";
    case errc::empty_calibration: return "EmptyCalibration";
    case errc::grid_explosion: return "GridExplosion";
  }
  return "Unknown";
}

// Exit-code class used by the CLI: 3 for data problems, 4 for numeric ones.
inline int errc_exit_code(errc c) {
  switch (c) {
    case errc::dimension_mismatch:
    case errc::non_finite:
    case errc::too_few_rows:
    case errc::empty_training:
    case errc::grid_mismatch:
    case errc::parse_error:
    case errc::missing_column:
    case errc::schema_error:
    case errc::unsupported_result:
    case errc::bad_explicit:
      return 3;
    case errc::bad_config:
      return 2;
    default:
      return 4;
  }
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }
  int exit_code() const noexcept { return errc_exit_code(code_); }

 private:
  errc code_;
};

inline void require(bool ok, errc code, const std::string& what) {
  if (!ok) throw error(code, what);
}

}  // namespace conformal
