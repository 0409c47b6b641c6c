#pragma once

#include <stdexcept>
#include <string>

namespace dynsamp {

// Error codes, grouped by the CLI exit category they map to.
enum class errc {
  // configuration / validation  (exit 2)
  asymmetric_b,
  entry_out_of_range,
  pi_not_simplex,
  bad_config,
  count_exceeds_pool,
  budget_exceeded,
  over_sampling,
  dimension_too_large,
  too_few_values,
  too_few_points,
  length_mismatch,
  dimension_mismatch,
  too_few_samples,
  // data / file format  (exit 3)
  file_error,
  malformed_line,
  unknown_vertex,
  // numerical  (exit 4)
  empty_graph,
  eigensolver_failure,
  singular_covariance,
  singular_delta,
  singular_sigma,
  nonunique_active_pair,
  all_zero_deltas,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::asymmetric_b: return "AsymmetricB";
    case errc::entry_out_of_range: return "EntryOutOfRange";
    case errc::pi_not_simplex: return "PiNotSimplex";
    case errc::bad_config: return "BadConfig";
    case errc::count_exceeds_pool: return "CountExceedsPool";
    case errc::budget_exceeded: return "BudgetExceeded";
    case errc::over_sampling: return "OverSampling";
    case errc::dimension_too_large: return "DimensionTooLarge";
    case errc::too_few_values: return "TooFewValues";
    case errc::too_few_points: return "TooFewPoints";
    case errc::length_mismatch: return "LengthMismatch";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::too_few_samples: return "TooFewSamples";
    case errc::file_error: return "FileError";
    case errc::malformed_line: return "MalformedLine";
    case errc::unknown_vertex: return "UnknownVertex";
    case errc::empty_graph: return "EmptyGraph";
    case errc::eigensolver_failure: return "EigensolverFailure";
    case errc::singular_covariance: return "SingularCovariance";
    case errc::singular_delta: return "SingularDelta";
    case errc::singular_sigma: return "SingularSigma";
    case errc::nonunique_active_pair: return "NonUniqueActivePair";
    case errc::all_zero_deltas: return "AllZeroDeltas";
  }
  return "UnknownError";
}

// Exit code the CLI reports for a given failure.
inline int exit_code_for(errc c) {
  switch (c) {
    case errc::file_error:
    case errc::malformed_line:
    case errc::unknown_vertex:
      return 3;
    case errc::empty_graph:
    case errc::eigensolver_failure:
    case errc::singular_covariance:
    case errc::singular_delta:
    case errc::singular_sigma:
    case errc::nonunique_active_pair:
    case errc::all_zero_deltas:
      return 4;
    default:
      return 2;
  }
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace dynsamp
