#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "parser.hpp"
#include "solver.hpp"

namespace pbvi {

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::max_gap: return "max-gap";
    case Strategy::random_sample: return "random";
    case Strategy::fixed_grid: return "fixed-grid";
  }
  return "?";
}

inline const char* to_string(UbEngine e) {
  return e == UbEngine::sawtooth ? "sawtooth" : "gp-ucb";
}

inline std::optional<Strategy> parse_strategy(const std::string& s) {
  if (s == "max-gap") return Strategy::max_gap;
  if (s == "random") return Strategy::random_sample;
  if (s == "fixed-grid") return Strategy::fixed_grid;
  return std::nullopt;
}

inline std::optional<UbEngine> parse_engine(const std::string& s) {
  if (s == "sawtooth") return UbEngine::sawtooth;
  if (s == "gp-ucb") return UbEngine::gp_ucb;
  return std::nullopt;
}

// One full benchmark matrix: every problem is run at every horizon for every
// strategy/engine pair and every seed.
struct BenchmarkSpec {
  std::vector<std::string> problems;
  std::vector<int> horizons;
  std::vector<Strategy> strategies = {Strategy::max_gap};
  std::vector<UbEngine> engines = {UbEngine::sawtooth, UbEngine::gp_ucb};
  std::vector<std::uint64_t> seeds;
  double time_limit = 3000.0;
  std::string output_dir = "results";
  int rho = 5;
  double eta = 1.0;
  double nu = 1e-5;
  double epsilon = 1e-6;
  int grid_resolution = 3;
  int jobs = 1;
};

// Flat key/value config, one "key: value" pair per line, '#' starts a
// comment. problem/horizon/strategy/engine/seed may repeat to build lists;
// scalar keys keep the last value seen.
inline BenchmarkSpec parse_benchmark_spec(const std::string& text) {
  BenchmarkSpec spec;
  bool saw_strategy = false, saw_engine = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error("benchmark config line " + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto colon = line.find(':');
    if (colon == std::string::npos) fail("expected 'key: value'");
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, colon));
    std::string value = trim(line.substr(colon + 1));
    if (value.empty()) fail("missing value for '" + key + "'");
    try {
      if (key == "problem") {
        spec.problems.push_back(value);
      } else if (key == "horizon") {
        spec.horizons.push_back(std::stoi(value));
      } else if (key == "strategy") {
        auto s = parse_strategy(value);
        if (!s) fail("unknown strategy '" + value + "'");
        if (!saw_strategy) spec.strategies.clear();
        saw_strategy = true;
        spec.strategies.push_back(*s);
      } else if (key == "engine") {
        auto e = parse_engine(value);
        if (!e) fail("unknown engine '" + value + "'");
        if (!saw_engine) spec.engines.clear();
        saw_engine = true;
        spec.engines.push_back(*e);
      } else if (key == "seed") {
        spec.seeds.push_back(std::stoull(value));
      } else if (key == "time_limit") {
        spec.time_limit = std::stod(value);
      } else if (key == "output_dir") {
        spec.output_dir = value;
      } else if (key == "rho") {
        spec.rho = std::stoi(value);
      } else if (key == "eta") {
        spec.eta = std::stod(value);
      } else if (key == "nu") {
        spec.nu = std::stod(value);
      } else if (key == "epsilon") {
        spec.epsilon = std::stod(value);
      } else if (key == "grid_resolution") {
        spec.grid_resolution = std::stoi(value);
      } else if (key == "jobs") {
        spec.jobs = std::stoi(value);
      } else {
        fail("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      fail("bad value '" + value + "' for '" + key + "'");
    } catch (const std::out_of_range&) {
      fail("value '" + value + "' out of range for '" + key + "'");
    }
  }
  return spec;
}

inline BenchmarkSpec parse_benchmark_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open benchmark config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_benchmark_spec(buf.str());
}

// First wall-clock time at which the trace's gap reached the target.
inline std::optional<double> time_to_gap(const std::vector<IterationRecord>& trace, double target) {
  for (const auto& r : trace)
    if (r.gap <= target) return r.wall_seconds;
  return std::nullopt;
}

struct SummaryRow {
  std::string problem;  // file stem
  int horizon = 0;
  Strategy strategy = Strategy::max_gap;
  UbEngine engine = UbEngine::sawtooth;
  std::uint64_t seed = 0;
  RunResult result;
};

struct BenchmarkResult {
  std::filesystem::path summary_path;
  std::filesystem::path aggregate_path;
  std::vector<std::filesystem::path> trace_paths;
  std::vector<SummaryRow> rows;  // matrix order: problem, horizon, strategy, engine, seed
};

namespace detail {

// 6 significant digits; NaN becomes an empty field so a reader treats it as
// missing data.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(v[i]);
  }
  return out;
}

inline const char* csv_status(RunStatus s) {
  return s == RunStatus::grid_too_large ? "NA" : to_string(s);
}

}  // namespace detail

// Runs the full matrix and writes summary.csv, aggregate.csv and one
// trace_*.csv per run into the output directory. A grid that exceeds its cap
// shows up as a status NA row with empty bounds, not as an error.
inline BenchmarkResult run_benchmark(const BenchmarkSpec& spec) {
  namespace fs = std::filesystem;
  if (spec.problems.empty() || spec.horizons.empty() || spec.seeds.empty())
    throw std::invalid_argument("benchmark spec needs at least one problem, horizon and seed");
  if (spec.strategies.empty() || spec.engines.empty())
    throw std::invalid_argument("benchmark spec needs at least one strategy and engine");
  if (spec.jobs < 1) throw std::invalid_argument("jobs must be at least 1");

  std::vector<PomdpModel> models;
  models.reserve(spec.problems.size());
  for (const auto& path : spec.problems) models.push_back(parse_pomdp_file(path));

  fs::create_directories(spec.output_dir);

  struct Cell {
    std::size_t problem_idx;
    int horizon;
    Strategy strategy;
    UbEngine engine;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t p = 0; p < spec.problems.size(); ++p)
    for (int h : spec.horizons)
      for (Strategy st : spec.strategies)
        for (UbEngine en : spec.engines)
          for (std::uint64_t sd : spec.seeds) cells.push_back({p, h, st, en, sd});

  BenchmarkResult result;
  result.rows.resize(cells.size());
  result.trace_paths.resize(cells.size());

  auto run_cell = [&](std::size_t i) {
    const Cell& c = cells[i];
    // Benchmark runs start every problem from the simplex center so results
    // are comparable across problems, overriding whatever the file declares.
    PomdpModel m = models[c.problem_idx];
    m.horizon = c.horizon;
    m.initial_belief = uniform_belief(m.num_states());

    SolverConfig cfg;
    cfg.strategy = c.strategy;
    cfg.ub_engine = c.engine;
    cfg.rho = spec.rho;
    cfg.eta = spec.eta;
    cfg.nu = spec.nu;
    cfg.epsilon = spec.epsilon;
    cfg.time_limit = spec.time_limit;
    cfg.grid_resolution = spec.grid_resolution;
    cfg.seed = c.seed;

    SummaryRow row;
    row.problem = fs::path(spec.problems[c.problem_idx]).stem().string();
    row.horizon = c.horizon;
    row.strategy = c.strategy;
    row.engine = c.engine;
    row.seed = c.seed;
    row.result = solve(m, cfg);

    std::string trace = "iteration,wall_seconds,lb,ub,gap,sawtooth_executions,support_sizes,belief_sizes\n";
    for (const auto& rec : row.result.metrics.records) {
      trace += std::to_string(rec.iteration);
      trace += ',';
      trace += detail::csv_number(rec.wall_seconds);
      trace += ',';
      trace += detail::csv_number(rec.lb);
      trace += ',';
      trace += detail::csv_number(rec.ub);
      trace += ',';
      trace += detail::csv_number(rec.gap);
      trace += ',';
      trace += std::to_string(rec.sawtooth_executions);
      trace += ',';
      trace += detail::join_sizes(rec.support_sizes);
      trace += ',';
      trace += detail::join_sizes(rec.belief_sizes);
      trace += '\n';
    }
    fs::path trace_path = fs::path(spec.output_dir) /
                          ("trace_" + row.problem + "_h" + std::to_string(c.horizon) + "_" +
                           to_string(c.strategy) + "_" + to_string(c.engine) + "_s" +
                           std::to_string(c.seed) + ".csv");
    detail::atomic_write(trace_path, trace);

    result.rows[i] = std::move(row);
    result.trace_paths[i] = std::move(trace_path);
  };

  if (spec.jobs == 1 || cells.size() <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= cells.size()) return;
        try {
          run_cell(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    int n = std::min<int>(spec.jobs, static_cast<int>(cells.size()));
    pool.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  std::string summary = "problem,horizon,strategy,engine,seed,lb,ub,gap,wall_seconds,sawtooth_count,status\n";
  for (const auto& row : result.rows) {
    const auto& recs = row.result.metrics.records;
    double wall = recs.empty() ? 0.0 : recs.back().wall_seconds;
    std::uint64_t count = recs.empty() ? 0 : recs.back().sawtooth_executions;
    summary += detail::csv_field(row.problem);
    summary += ',' + std::to_string(row.horizon);
    summary += ',';
    summary += to_string(row.strategy);
    summary += ',';
    summary += to_string(row.engine);
    summary += ',' + std::to_string(row.seed);
    summary += ',' + detail::csv_number(row.result.lb);
    summary += ',' + detail::csv_number(row.result.ub);
    summary += ',' + detail::csv_number(row.result.gap);
    summary += ',' + detail::csv_number(wall);
    summary += ',' + std::to_string(count);
    summary += ',';
    summary += detail::csv_status(row.result.metrics.status);
    summary += '\n';
  }
  result.summary_path = fs::path(spec.output_dir) / "summary.csv";
  detail::atomic_write(result.summary_path, summary);

  std::string aggregate = "problem,horizon,strategy,engine,runs,mean_gap,std_gap,worst_gap,status\n";
  std::size_t seeds = spec.seeds.size();
  for (std::size_t base = 0; base < result.rows.size(); base += seeds) {
    const SummaryRow& head = result.rows[base];
    std::vector<double> gaps;
    for (std::size_t k = 0; k < seeds; ++k) {
      double g = result.rows[base + k].result.gap;
      if (!std::isnan(g)) gaps.push_back(g);
    }
    aggregate += detail::csv_field(head.problem);
    aggregate += ',' + std::to_string(head.horizon);
    aggregate += ',';
    aggregate += to_string(head.strategy);
    aggregate += ',';
    aggregate += to_string(head.engine);
    aggregate += ',' + std::to_string(gaps.size()) + ',';
    if (gaps.empty()) {
      aggregate += ",,,NA\n";
      continue;
    }
    double mean = 0.0;
    for (double g : gaps) mean += g;
    mean /= static_cast<double>(gaps.size());
    double var = 0.0;
    for (double g : gaps) var += (g - mean) * (g - mean);
    double sd = gaps.size() > 1 ? std::sqrt(var / static_cast<double>(gaps.size() - 1)) : 0.0;
    double worst = *std::max_element(gaps.begin(), gaps.end());
    aggregate += detail::csv_number(mean);
    aggregate += ',' + detail::csv_number(sd);
    aggregate += ',' + detail::csv_number(worst);
    aggregate += ",ok\n";
  }
  result.aggregate_path = fs::path(spec.output_dir) / "aggregate.csv";
  detail::atomic_write(result.aggregate_path, aggregate);

  return result;
}

}  // namespace pbvi
