#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pbvi/bench.hpp"
#include "pbvi/bounds.hpp"
#include "pbvi/parser.hpp"
#include "pbvi/solver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;

void print_model_line(const pbvi::PomdpModel& m, const std::string& path) {
  std::printf("%s: |S|=%lld |A|=%lld |O|=%lld horizon=%d\n", path.c_str(),
              static_cast<long long>(m.num_states()), static_cast<long long>(m.num_actions()),
              static_cast<long long>(m.num_observations()), m.horizon);
}

int run_solve(const std::string& file, int horizon, const std::string& strategy,
              const std::string& engine, int rho, double eta, double nu, double epsilon,
              double time_limit, std::uint64_t seed, int grid_resolution,
              const std::string& out_dir) {
  pbvi::PomdpModel m;
  try {
    m = pbvi::parse_pomdp_file(file);
    m.horizon = horizon;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }

  pbvi::SolverConfig cfg;
  auto st = pbvi::parse_strategy(strategy);
  auto en = pbvi::parse_engine(engine);
  if (!st || !en) {
    std::fprintf(stderr, "error: unknown %s '%s'\n", st ? "engine" : "strategy",
                 (st ? engine : strategy).c_str());
    return kExitConfig;
  }
  cfg.strategy = *st;
  cfg.ub_engine = *en;
  cfg.rho = rho;
  cfg.eta = eta;
  cfg.nu = nu;
  cfg.epsilon = epsilon;
  cfg.time_limit = time_limit;
  cfg.seed = seed;
  cfg.grid_resolution = grid_resolution;

  pbvi::RunResult res;
  try {
    res = pbvi::solve(m, cfg);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return kExitSolver;
  }

  print_model_line(m, file);
  const auto& recs = res.metrics.records;
  std::printf("status=%s iterations=%zu wall=%.3fs\n", pbvi::to_string(res.metrics.status),
              recs.size(), recs.empty() ? 0.0 : recs.back().wall_seconds);
  std::printf("lb=%.9g ub=%.9g gap=%.9g sawtooth=%llu\n", res.lb, res.ub, res.gap,
              static_cast<unsigned long long>(recs.empty() ? 0 : recs.back().sawtooth_executions));

  if (!out_dir.empty()) {
    try {
      std::filesystem::create_directories(out_dir);
      std::string trace = "iteration,wall_seconds,lb,ub,gap,sawtooth_executions,support_sizes,belief_sizes\n";
      for (const auto& rec : recs) {
        trace += std::to_string(rec.iteration) + ',' + pbvi::detail::csv_number(rec.wall_seconds) +
                 ',' + pbvi::detail::csv_number(rec.lb) + ',' + pbvi::detail::csv_number(rec.ub) +
                 ',' + pbvi::detail::csv_number(rec.gap) + ',' +
                 std::to_string(rec.sawtooth_executions) + ',' +
                 pbvi::detail::join_sizes(rec.support_sizes) + ',' +
                 pbvi::detail::join_sizes(rec.belief_sizes) + '\n';
      }
      std::filesystem::path path = std::filesystem::path(out_dir) / "trace.csv";
      pbvi::detail::atomic_write(path, trace);
      std::printf("trace=%s\n", path.string().c_str());
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitConfig;
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-horizon POMDP bound solver and benchmark harness"};
  app.require_subcommand(1);

  // solve
  std::string file, strategy = "max-gap", engine = "sawtooth", out_dir;
  int horizon = 1, rho = 5, grid_resolution = 3;
  double eta = 1.0, nu = 1e-5, epsilon = 1e-6, time_limit = 3000.0;
  std::uint64_t seed = 0;
  CLI::App* solve = app.add_subcommand("solve", "Solve one problem and report its bounds");
  solve->add_option("file", file, "Cassandra-format .pomdp file")->required();
  solve->add_option("--horizon", horizon, "number of decision stages")->required();
  solve->add_option("--strategy", strategy, "max-gap | random | fixed-grid");
  solve->add_option("--engine", engine, "sawtooth | gp-ucb");
  solve->add_option("--rho", rho, "gap target exponent");
  solve->add_option("--eta", eta, "UCB exploration weight");
  solve->add_option("--nu", nu, "ALD novelty threshold");
  solve->add_option("--epsilon", epsilon, "absolute gap floor");
  solve->add_option("--time-limit", time_limit, "wall-clock budget in seconds");
  solve->add_option("--seed", seed, "RNG seed");
  solve->add_option("--grid-resolution", grid_resolution, "fixed-grid subdivisions per axis");
  solve->add_option("--out", out_dir, "directory for trace.csv");

  // bench
  std::string spec_file, bench_out;
  int jobs = 0;
  double bench_time_limit = -1.0;
  std::vector<std::uint64_t> bench_seeds;
  CLI::App* bench = app.add_subcommand("bench", "Run a benchmark matrix from a config file");
  bench->add_option("spec", spec_file, "benchmark config file")->required();
  bench->add_option("--jobs", jobs, "parallel solver cells");
  bench->add_option("--out", bench_out, "override output_dir");
  bench->add_option("--time-limit", bench_time_limit, "override time_limit");
  bench->add_option("--seed", bench_seeds, "override the seed list");

  // exact
  std::string exact_file;
  int exact_horizon = 1;
  std::size_t exact_cap = 1000000;
  CLI::App* exact = app.add_subcommand("exact", "Exact enumeration oracle (small problems only)");
  exact->add_option("file", exact_file, "Cassandra-format .pomdp file")->required();
  exact->add_option("--horizon", exact_horizon, "number of decision stages")->required();
  exact->add_option("--cap", exact_cap, "abort past this many value vectors");

  // parse
  std::string parse_file;
  CLI::App* parse = app.add_subcommand("parse", "Validate a .pomdp file");
  parse->add_option("file", parse_file, "Cassandra-format .pomdp file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (solve->parsed())
    return run_solve(file, horizon, strategy, engine, rho, eta, nu, epsilon, time_limit, seed,
                     grid_resolution, out_dir);

  if (bench->parsed()) {
    pbvi::BenchmarkSpec spec;
    try {
      spec = pbvi::parse_benchmark_file(spec_file);
      if (jobs > 0) spec.jobs = jobs;
      if (!bench_out.empty()) spec.output_dir = bench_out;
      if (bench_time_limit >= 0.0) spec.time_limit = bench_time_limit;
      if (!bench_seeds.empty()) spec.seeds = bench_seeds;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitConfig;
    }
    try {
      pbvi::BenchmarkResult res = pbvi::run_benchmark(spec);
      std::printf("summary=%s\n", res.summary_path.string().c_str());
      std::printf("aggregate=%s\n", res.aggregate_path.string().c_str());
      std::printf("rows=%zu\n", res.rows.size());
    } catch (const std::invalid_argument& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitConfig;
    } catch (const pbvi::ParseError& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitConfig;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "solver error: %s\n", e.what());
      return kExitSolver;
    }
    return kExitOk;
  }

  if (exact->parsed()) {
    try {
      pbvi::PomdpModel m = pbvi::parse_pomdp_file(exact_file);
      m.horizon = exact_horizon;
      auto stages = pbvi::exact_value(m, exact_horizon, exact_cap);
      double v = pbvi::lower_bound_value(stages[0], m.initial_belief);
      print_model_line(m, exact_file);
      std::printf("exact_value_at_b0=%.12g\n", v);
      std::printf("stage_vector_counts=");
      for (std::size_t t = 0; t < stages.size(); ++t)
        std::printf("%s%zu", t ? ";" : "", stages[t].size());
      std::printf("\n");
      return kExitOk;
    } catch (const pbvi::ParseError& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitConfig;
    } catch (const std::invalid_argument& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitConfig;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "solver error: %s\n", e.what());
      return kExitSolver;
    }
  }

  if (parse->parsed()) {
    try {
      pbvi::PomdpModel m = pbvi::parse_pomdp_file(parse_file);
      print_model_line(m, parse_file);
      return kExitOk;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitConfig;
    }
  }

  return kExitConfig;
}
