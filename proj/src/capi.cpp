#include "plasticgraph/capi.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "plasticgraph/error.hpp"
#include "plasticgraph/runner.hpp"

using namespace plasticgraph;

struct pg_problem {
  ProblemConfig config;
};

namespace {

thread_local std::string g_last_error;

pg_status status_from(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError:
      return PG_ERR_IO;
    case ErrorCode::NotConverged:
      return PG_ERR_NONCONVERGED;
    case ErrorCode::SchemaError:
    case ErrorCode::DanglingReference:
    case ErrorCode::ConflictingBC:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::ArityMismatch:
    case ErrorCode::InvertedElement:
    case ErrorCode::InvalidDivisions:
    case ErrorCode::UnsupportedOrder:
    case ErrorCode::InvalidPoisson:
    case ErrorCode::ModeParameterMismatch:
    case ErrorCode::EmptyFacetSet:
    case ErrorCode::LengthMismatch:
      return PG_ERR_INPUT;
    default:
      return PG_ERR_INTERNAL;
  }
}

template <typename Fn>
pg_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& err) {
    g_last_error = std::string(to_string(err.code())) + ": " + err.what();
    return status_from(err.code());
  } catch (const std::exception& err) {
    g_last_error = err.what();
    return PG_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return PG_ERR_INTERNAL;
  }
}

char* copy_string(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (out) std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

pg_status invalid_arg(const char* message) {
  g_last_error = message;
  return PG_ERR_INVALID_ARG;
}

}  // namespace

extern "C" {

const char* pg_version(void) { return "plasticgraph 0.1.0"; }

const char* pg_last_error(void) { return g_last_error.c_str(); }

void pg_string_free(char* text) { std::free(text); }

pg_status pg_problem_load(const char* path, pg_problem** out) {
  if (!path || !out) return invalid_arg("pg_problem_load: null argument");
  *out = nullptr;
  return guarded([&]() {
    auto problem = std::make_unique<pg_problem>();
    problem->config = parse_problem(path);
    *out = problem.release();
    return PG_OK;
  });
}

void pg_problem_free(pg_problem* problem) { delete problem; }

pg_status pg_problem_summary(const pg_problem* problem, char** out) {
  if (!problem || !out) return invalid_arg("pg_problem_summary: null argument");
  return guarded([&]() {
    *out = copy_string(problem->config.summary());
    return PG_OK;
  });
}

void pg_solve_options_init(pg_solve_options* options) {
  if (!options) return;
  options->threads = 1;
  options->output_dir = nullptr;
  options->keep_going = 0;
}

pg_status pg_solve(const pg_problem* problem, const pg_solve_options* options, char** report) {
  if (!problem) return invalid_arg("pg_solve: null problem");
  return guarded([&]() {
    RunOptions run;
    if (options) {
      run.threads = options->threads < 1 ? 1 : options->threads;
      if (options->output_dir) run.output_dir = options->output_dir;
      run.keep_going = options->keep_going != 0;
    }
    const RunOutcome outcome = run_problem(problem->config, run);
    if (report) *report = copy_string(outcome.report);
    if (!outcome.all_converged) {
      g_last_error = "one or more load steps did not converge";
      return PG_ERR_NONCONVERGED;
    }
    return PG_OK;
  });
}

pg_status pg_conditioning(const pg_problem* problem, const char* meshes, int threads,
                          const char* csv_path, char** report) {
  if (!problem || !meshes) return invalid_arg("pg_conditioning: null argument");
  return guarded([&]() {
    RateStudyOptions options;
    options.meshes = parse_mesh_list(meshes);
    options.threads = threads < 1 ? 1 : threads;
    const std::vector<SpectralReport> reports = rate_study(problem->config, options);
    const std::string csv = spectral_report_csv(reports);
    if (csv_path) {
      std::ofstream out(csv_path);
      if (!out) fail(ErrorCode::IoError, std::string("cannot write '") + csv_path + "'");
      out << csv;
    }
    if (report) *report = copy_string(csv);
    return PG_OK;
  });
}

pg_status pg_metrics(const char* fields_path, const char* reference_path, char** report) {
  if (!fields_path || !reference_path) return invalid_arg("pg_metrics: null argument");
  return guarded([&]() {
    const FieldData fields = read_fields(fields_path);
    const FieldData reference = read_fields(reference_path);
    const auto entries = compare_fields(fields, reference);
    if (report) *report = copy_string(metrics_report(entries));
    return PG_OK;
  });
}

pg_status pg_gradcheck(const pg_problem* problem, uint64_t seed, int points, int threads,
                       char** report) {
  if (!problem) return invalid_arg("pg_gradcheck: null problem");
  if (points < 1) return invalid_arg("pg_gradcheck: points must be >= 1");
  return guarded([&]() {
    const GradCheckReport result =
        gradcheck(problem->config, seed, points, 1e-5, 1e-4, threads < 1 ? 1 : threads);
    if (report) *report = copy_string(result.text);
    if (!result.pass) {
      g_last_error = "gradient check failed";
      return PG_ERR_NONCONVERGED;
    }
    return PG_OK;
  });
}

}  // extern "C"
