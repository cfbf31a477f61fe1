// plasticgraph command line: solve, validate, conditioning, metrics and
// gradcheck subcommands over the C library API.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "CLI11.hpp"
#include "plasticgraph/capi.h"

namespace {

int exit_code(pg_status status) {
  switch (status) {
    case PG_OK:
      return 0;
    case PG_ERR_NONCONVERGED:
      return 1;
    default:
      return 2;
  }
}

int finish(pg_status status, char* report) {
  if (report) {
    std::fputs(report, stdout);
    pg_string_free(report);
  }
  if (status != PG_OK) std::fprintf(stderr, "error: %s\n", pg_last_error());
  return exit_code(status);
}

struct ProblemHandle {
  pg_problem* ptr = nullptr;
  ~ProblemHandle() { pg_problem_free(ptr); }
};

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  if (const char* env = std::getenv("PLASTICGRAPH_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plasticgraph - incremental-energy finite element plasticity solver"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pg_version());

  int threads = 0;
  unsigned long long seed = 12345;
  std::string output_dir;
  app.add_option("--threads", threads, "element-loop worker count (PLASTICGRAPH_THREADS)");
  app.add_option("--seed", seed, "seed for randomized checks");
  app.add_option("--output-dir", output_dir, "override the problem's output directory");

  std::string problem_path, meshes, csv_path, fields_path, reference_path;
  bool keep_going = false;
  int points = 20;

  CLI::App* solve = app.add_subcommand("solve", "run the load history and write fields");
  solve->fallthrough();
  solve->add_option("problem", problem_path, "problem JSON file")->required();
  solve->add_flag("--keep-going", keep_going, "continue past non-converged steps");

  CLI::App* validate = app.add_subcommand("validate", "parse and echo the resolved problem");
  validate->fallthrough();
  validate->add_option("problem", problem_path, "problem JSON file")->required();

  CLI::App* conditioning =
      app.add_subcommand("conditioning", "spectral and convergence study over mesh variants");
  conditioning->fallthrough();
  conditioning->add_option("problem", problem_path, "problem JSON file")->required();
  conditioning->add_option("--meshes", meshes, "divisions list, e.g. 20x5x5,40x10x10")
      ->required();
  conditioning->add_option("--csv", csv_path, "write the report CSV here");

  CLI::App* metrics = app.add_subcommand("metrics", "compare two fields files");
  metrics->fallthrough();
  metrics->add_option("fields", fields_path, "computed fields JSON")->required();
  metrics->add_option("reference", reference_path, "reference fields JSON")->required();

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient validation");
  gradcheck->fallthrough();
  gradcheck->add_option("problem", problem_path, "problem JSON file")->required();
  gradcheck->add_option("--points", points, "number of random evaluation points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the usage error
    return code == 0 ? 0 : 2;
  }

  char* report = nullptr;

  if (metrics->parsed()) {
    const pg_status status = pg_metrics(fields_path.c_str(), reference_path.c_str(), &report);
    return finish(status, report);
  }

  ProblemHandle problem;
  pg_status status = pg_problem_load(problem_path.c_str(), &problem.ptr);
  if (status != PG_OK) return finish(status, nullptr);

  if (validate->parsed()) {
    status = pg_problem_summary(problem.ptr, &report);
    return finish(status, report);
  }
  if (solve->parsed()) {
    pg_solve_options options;
    pg_solve_options_init(&options);
    options.threads = resolve_threads(threads);
    options.keep_going = keep_going ? 1 : 0;
    if (!output_dir.empty()) options.output_dir = output_dir.c_str();
    status = pg_solve(problem.ptr, &options, &report);
    return finish(status, report);
  }
  if (conditioning->parsed()) {
    status = pg_conditioning(problem.ptr, meshes.c_str(), resolve_threads(threads),
                             csv_path.empty() ? nullptr : csv_path.c_str(), &report);
    return finish(status, report);
  }
  if (gradcheck->parsed()) {
    status = pg_gradcheck(problem.ptr, seed, points, resolve_threads(threads), &report);
    return finish(status, report);
  }
  return 2;
}
