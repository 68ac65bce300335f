// Acceptance gate for the solver library: runs every check the project is
// held to and prints one PASS/FAIL line per criterion. Exits nonzero if any
// line fails. The ChengD51 and Query cells need problem files that are not
// bundled; until problems/fetch_missing.sh has been run those lines report
// their inputs as unavailable.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pbvi/bench.hpp"
#include "support.hpp"

using namespace pbvi;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

struct Check {
  bool pass = false;
  std::string detail;
};

constexpr const char* kCheng = "problems/cheng.D5-1.POMDP";
constexpr const char* kQuery = "problems/query.s3.POMDP";

bool have(const char* path) { return std::filesystem::exists(path); }

std::string unavailable(const std::string& files) {
  return "input unavailable (" + files + ") — run problems/fetch_missing.sh";
}

double exact_at_b0(const PomdpModel& m, int horizon) {
  auto stages = exact_value(m, horizon);
  return lower_bound_value(stages[0], m.initial_belief);
}

// The small-model family used for the oracle-equivalence checks: sizes stay
// within |S|<=3, |A|<=3, |O|<=2, T<=3 so exact enumeration is instant.
std::vector<PomdpModel> oracle_models() {
  std::vector<PomdpModel> out;
  PomdpModel tiger = parse_pomdp_file("problems/tiger.pomdp");
  for (int T = 1; T <= 4; ++T) {
    tiger.horizon = T;
    out.push_back(tiger);
  }
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 20; ++i) {
    Eigen::Index S = 2 + (i % 2), A = 2 + (i % 3) % 2 + (i % 5 == 0);
    if (A > 3) A = 3;
    PomdpModel m = testsupport::random_model(rng, S, A, 2);
    m.horizon = 1 + (i % 3) + (i % 2);
    if (m.horizon > 3) m.horizon = 3;
    out.push_back(m);
  }
  return out;
}

Check criterion1() {
  struct Expected {
    const char* path;
    Eigen::Index S, A, O;
  };
  const Expected files[] = {{kCheng, 5, 3, 3},
                            {"problems/network.POMDP", 7, 4, 2},
                            {kQuery, 27, 3, 3},
                            {"problems/hallway.POMDP", 60, 5, 21},
                            {"problems/aloha.30.POMDP", 90, 29, 3}};
  Check c;
  c.pass = true;
  std::string missing, bad;
  double slowest = 0.0;
  for (const auto& f : files) {
    if (!have(f.path)) {
      c.pass = false;
      if (!missing.empty()) missing += ", ";
      missing += f.path;
      continue;
    }
    auto t0 = Clock::now();
    PomdpModel m;
    try {
      m = parse_pomdp_file(f.path);
    } catch (const std::exception& e) {
      c.pass = false;
      bad += fmt(" %s: %s;", f.path, e.what());
      continue;
    }
    double dt = seconds_since(t0);
    slowest = std::max(slowest, dt);
    if (m.num_states() != f.S || m.num_actions() != f.A || m.num_observations() != f.O) {
      c.pass = false;
      bad += fmt(" %s: got (%lld,%lld,%lld) want (%lld,%lld,%lld);", f.path,
                 (long long)m.num_states(), (long long)m.num_actions(),
                 (long long)m.num_observations(), (long long)f.S, (long long)f.A, (long long)f.O);
    }
    if (dt >= 1.0) {
      c.pass = false;
      bad += fmt(" %s: parse took %.2fs;", f.path, dt);
    }
  }
  if (c.pass) {
    c.detail = fmt("all five files match their published sizes, slowest parse %.3fs", slowest);
  } else {
    c.detail.clear();
    if (!missing.empty()) c.detail += unavailable(missing);
    if (!bad.empty()) c.detail += (c.detail.empty() ? "" : ";") + bad;
  }
  return c;
}

void criteria_2_and_3(Check& c2, Check& c3) {
  auto t0 = Clock::now();
  int runs = 0, violations = 0;
  double worst_err = 0.0, worst_gap = 0.0;
  bool converged = true;
  for (const PomdpModel& m : oracle_models()) {
    double exact = exact_at_b0(m, m.horizon);
    for (UbEngine engine : {UbEngine::sawtooth, UbEngine::gp_ucb}) {
      SolverConfig cfg;
      cfg.ub_engine = engine;
      cfg.rho = 8;
      cfg.epsilon = 1e-9;
      cfg.time_limit = 30.0;
      RunResult r = solve(m, cfg);
      ++runs;
      worst_err = std::max(worst_err, std::abs(r.lb - exact));
      worst_gap = std::max(worst_gap, r.ub - r.lb);
      if (!(std::abs(r.lb - exact) <= 1e-4 && r.ub - r.lb <= 1e-3)) converged = false;
      for (const IterationRecord& rec : r.metrics.records)
        if (!(rec.lb <= exact + 1e-9 && rec.ub >= exact - 1e-9)) ++violations;
    }
  }
  double secs = seconds_since(t0);
  c2.pass = converged && secs < 60.0;
  c2.detail = fmt("%d runs, worst |lb-exact| %.2e, worst gap %.2e, %.1fs total", runs, worst_err,
                  worst_gap, secs);
  c3.pass = violations == 0;
  c3.detail = fmt("%d per-iteration bound violations across %d runs", violations, runs);
}

Check criterion4() {
  std::mt19937_64 rng(4242);
  double worst_margin = std::numeric_limits<double>::infinity();
  int queries = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index S = 2 + trial % 3;
    Eigen::VectorXd corners(S);
    for (Eigen::Index s = 0; s < S; ++s)
      corners[s] = 5.0 + 5.0 * testsupport::random_simplex(rng, 2)[0];
    UpperBoundSet set = make_upper_bound_set(corners);
    int extra = 1 + trial % 6;
    std::uniform_real_distribution<double> drop(0.0, 3.0);
    for (int i = 0; i < extra; ++i) {
      Belief b(testsupport::random_simplex(rng, S));
      ubs_add(set, b, sawtooth_project(set, b) - drop(rng));
    }
    for (int q = 0; q < 100; ++q) {
      Belief b(testsupport::random_simplex(rng, S));
      worst_margin = std::min(worst_margin, sawtooth_project(set, b) - testsupport::hull_value(set, b));
      ++queries;
    }
  }
  Check c;
  c.pass = worst_margin >= -1e-9;
  c.detail = fmt("%d queries over 200 sets, smallest sawtooth-hull margin %.2e", queries, worst_margin);
  return c;
}

Check criterion5() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> val(-5.0, 5.0);
  double worst_interp = 0.0, worst_match = 0.0, worst_sigma_rise = -1.0;
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index S = 2 + trial % 3;
    const int n = static_cast<int>(S) + 1 + trial % 3;
    Kernel k;
    k.signal_variance = 1.0 + trial % 4;
    std::vector<Belief> supports;
    while (static_cast<int>(supports.size()) < n) {
      Belief b(testsupport::random_simplex(rng, S));
      bool dup = false;
      for (const Belief& s : supports)
        if (same_belief(s, b)) dup = true;
      if (!dup) supports.push_back(b);
    }
    Eigen::VectorXd targets(n);
    for (int i = 0; i < n; ++i) targets[i] = val(rng);

    GprState g = gpr_fit(k, supports, targets, 0.0);
    for (int i = 0; i < n; ++i)
      worst_interp = std::max(worst_interp, std::abs(gpr_predict_mean(g, supports[i]) - targets[i]));

    Belief extra(testsupport::random_simplex(rng, S));
    double extra_target = val(rng);
    std::vector<Belief> queries;
    for (int q = 0; q < 5; ++q) queries.emplace_back(testsupport::random_simplex(rng, S));
    std::vector<double> sigma_before;
    for (const Belief& q : queries) {
      double mean, sd;
      gpr_predict(g, q, mean, sd);
      sigma_before.push_back(sd);
    }

    GprState expanded = g;
    expand_support(expanded, extra, extra_target);
    std::vector<Belief> all = supports;
    all.push_back(extra);
    Eigen::VectorXd all_targets(n + 1);
    all_targets.head(n) = targets;
    all_targets[n] = extra_target;
    GprState refit = gpr_fit(k, all, all_targets, 0.0);

    for (std::size_t q = 0; q < queries.size(); ++q) {
      double me, se, mr, sr;
      gpr_predict(expanded, queries[q], me, se);
      gpr_predict(refit, queries[q], mr, sr);
      worst_match = std::max({worst_match, std::abs(me - mr), std::abs(se - sr)});
      worst_sigma_rise = std::max(worst_sigma_rise, se - sigma_before[q]);
    }
  }
  Check c;
  c.pass = worst_interp <= 1e-6 && worst_match <= 1e-8 && worst_sigma_rise <= 1e-12;
  c.detail = fmt("interpolation error %.2e, expand-vs-refit %.2e, max sigma increase %.2e",
                 worst_interp, worst_match, worst_sigma_rise);
  return c;
}

struct ChengRuns {
  bool available = false;
  RunResult saw;
  std::vector<RunResult> gp;  // seeds 0,1,2
};

ChengRuns run_cheng_cells() {
  ChengRuns runs;
  if (!have(kCheng)) return runs;
  runs.available = true;
  PomdpModel m = parse_pomdp_file(kCheng);
  m.horizon = 10;
  m.initial_belief = uniform_belief(m.num_states());
  SolverConfig cfg;
  cfg.strategy = Strategy::max_gap;
  cfg.rho = 5;
  cfg.time_limit = 3000.0;
  cfg.ub_engine = UbEngine::sawtooth;
  cfg.seed = 0;
  runs.saw = solve(m, cfg);
  cfg.ub_engine = UbEngine::gp_ucb;
  for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
    cfg.seed = seed;
    runs.gp.push_back(solve(m, cfg));
  }
  return runs;
}

Check criterion6(const ChengRuns& runs) {
  if (!runs.available) return {false, unavailable(kCheng)};
  bool saw_ok = std::abs(runs.saw.lb - 65.246) <= 1e-3 && runs.saw.gap <= 0.006;
  double mean_gap = 0.0;
  bool gp_lb_ok = true;
  for (const RunResult& r : runs.gp) {
    mean_gap += r.gap;
    if (std::abs(r.lb - 65.246) > 1e-3) gp_lb_ok = false;
  }
  mean_gap /= static_cast<double>(runs.gp.size());
  Check c;
  c.pass = saw_ok && gp_lb_ok && mean_gap <= 0.005;
  c.detail = fmt("sawtooth lb %.4f gap %.4f; gp-ucb mean gap %.4f over %zu seeds", runs.saw.lb,
                 runs.saw.gap, mean_gap, runs.gp.size());
  return c;
}

Check criterion7(const ChengRuns& runs) {
  if (!runs.available) return {false, unavailable(kCheng)};
  const auto& a = runs.saw.metrics.records;
  const auto& b = runs.gp[0].metrics.records;
  std::size_t k = std::min(a.size(), b.size());
  if (k == 0) return {false, "no iterations recorded"};
  double saw_count = static_cast<double>(a[k - 1].sawtooth_executions);
  double gp_count = static_cast<double>(b[k - 1].sawtooth_executions);
  Check c;
  c.pass = gp_count <= 0.5 * saw_count;
  c.detail = fmt("after %zu iterations: gp-ucb %.0f vs sawtooth %.0f executions (%.1f%%)", k,
                 gp_count, saw_count, saw_count > 0 ? 100.0 * gp_count / saw_count : 0.0);
  return c;
}

Check criterion8(const ChengRuns& runs) {
  if (!runs.available) return {false, unavailable(kCheng)};
  const auto& saw_recs = runs.saw.metrics.records;
  if (saw_recs.empty()) return {false, "no iterations recorded"};
  double saw_time = saw_recs.back().wall_seconds;
  std::optional<double> gp_time = time_to_gap(runs.gp[0].metrics.records, runs.saw.gap);
  Check c;
  if (!gp_time) {
    c.detail = fmt("gp-ucb never reached the sawtooth terminal gap %.4f", runs.saw.gap);
    return c;
  }
  c.pass = *gp_time <= 0.85 * saw_time;
  c.detail = fmt("gp-ucb %.1fs to gap %.4f vs sawtooth %.1fs (%.1f%%)", *gp_time, runs.saw.gap,
                 saw_time, saw_time > 0 ? 100.0 * *gp_time / saw_time : 0.0);
  return c;
}

Check criterion9() {
  Check c;
  c.pass = true;
  std::string missing, notes;

  auto grid_run = [](const char* path, int horizon) {
    PomdpModel m = parse_pomdp_file(path);
    m.horizon = horizon;
    m.initial_belief = uniform_belief(m.num_states());
    SolverConfig cfg;
    cfg.strategy = Strategy::fixed_grid;
    cfg.grid_resolution = 6;
    cfg.time_limit = 60.0;
    return solve(m, cfg);
  };

  for (const char* path : {kQuery, "problems/hallway.POMDP", "problems/aloha.30.POMDP"}) {
    if (!have(path)) {
      c.pass = false;
      if (!missing.empty()) missing += ", ";
      missing += path;
      continue;
    }
    RunResult r = grid_run(path, 10);
    if (r.metrics.status != RunStatus::grid_too_large) {
      c.pass = false;
      notes += fmt(" %s: expected NA, got %s;", path, to_string(r.metrics.status));
    } else {
      notes += fmt(" %s NA;", path);
    }
  }
  for (const char* path : {kCheng, "problems/network.POMDP"}) {
    if (!have(path)) {
      c.pass = false;
      if (!missing.empty()) missing += ", ";
      missing += path;
      continue;
    }
    auto t0 = Clock::now();
    RunResult r = grid_run(path, 10);
    double secs = seconds_since(t0);
    if (r.metrics.status == RunStatus::grid_too_large || secs >= 60.0) {
      c.pass = false;
      notes += fmt(" %s: status %s after %.1fs;", path, to_string(r.metrics.status), secs);
    } else {
      notes += fmt(" %s solved in %.1fs (%s);", path, secs, to_string(r.metrics.status));
    }
  }
  if (c.pass)
    c.detail = "large grids report NA, small grids finish:" + notes;
  else
    c.detail = (missing.empty() ? "" : unavailable(missing) + ";") + notes;
  return c;
}

Check criterion10() {
  int configs = 0;
  std::size_t records = 0;
  bool identical = true;
  auto compare = [&](const PomdpModel& m, const SolverConfig& cfg) {
    RunResult a = solve(m, cfg);
    RunResult b = solve(m, cfg);
    ++configs;
    const auto& ra = a.metrics.records;
    const auto& rb = b.metrics.records;
    if (ra.size() != rb.size()) {
      identical = false;
      return;
    }
    for (std::size_t i = 0; i < ra.size(); ++i) {
      if (std::memcmp(&ra[i].lb, &rb[i].lb, sizeof(double)) != 0 ||
          std::memcmp(&ra[i].ub, &rb[i].ub, sizeof(double)) != 0 ||
          std::memcmp(&ra[i].gap, &rb[i].gap, sizeof(double)) != 0)
        identical = false;
      ++records;
    }
  };

  PomdpModel tiger = parse_pomdp_file("problems/tiger.pomdp");
  std::mt19937_64 rng(5);
  PomdpModel rand_model = testsupport::random_model(rng, 3, 2, 2);
  rand_model.horizon = 3;
  for (UbEngine engine : {UbEngine::sawtooth, UbEngine::gp_ucb}) {
    SolverConfig cfg;
    cfg.ub_engine = engine;
    cfg.rho = 8;
    cfg.epsilon = 1e-9;
    cfg.time_limit = 30.0;
    cfg.seed = 11;
    for (int T = 3; T <= 4; ++T) {
      tiger.horizon = T;
      compare(tiger, cfg);
    }
    compare(rand_model, cfg);
  }
  Check c;
  c.pass = identical;
  c.detail = fmt("%d configs re-run, %zu iteration records compared bitwise", configs, records);
  return c;
}

// The hallway and aloha cells are too heavy to assert numbers on, but the
// harness must run them, keep lb <= ub at every iteration and reproduce its
// trace under an identical seed (wall-clock stops may truncate one run
// earlier, so the overlap of the two traces is what must agree).
Check larger_cells() {
  struct Cell {
    const char* path;
    int horizon;
    UbEngine engine;
  };
  const Cell cells[] = {{"problems/hallway.POMDP", 40, UbEngine::sawtooth},
                        {"problems/hallway.POMDP", 40, UbEngine::gp_ucb},
                        {"problems/aloha.30.POMDP", 40, UbEngine::sawtooth}};
  Check c;
  c.pass = true;
  std::string notes;
  for (const Cell& cell : cells) {
    PomdpModel m = parse_pomdp_file(cell.path);
    m.horizon = cell.horizon;
    m.initial_belief = uniform_belief(m.num_states());
    SolverConfig cfg;
    cfg.ub_engine = cell.engine;
    cfg.time_limit = 12.0;
    cfg.seed = 1;
    RunResult a = solve(m, cfg);
    RunResult b = solve(m, cfg);
    const auto& ra = a.metrics.records;
    const auto& rb = b.metrics.records;
    if (ra.empty() || rb.empty()) {
      c.pass = false;
      notes += fmt(" %s/%s: no iterations;", cell.path, to_string(cell.engine));
      continue;
    }
    for (const auto* recs : {&ra, &rb})
      for (const IterationRecord& rec : *recs)
        if (!(rec.gap >= -1e-9)) {
          c.pass = false;
          notes += fmt(" %s/%s: negative gap %.3e at iteration %d;", cell.path,
                       to_string(cell.engine), rec.gap, rec.iteration);
        }
    std::size_t k = std::min(ra.size(), rb.size());
    for (std::size_t i = 0; i < k; ++i)
      if (std::memcmp(&ra[i].lb, &rb[i].lb, sizeof(double)) != 0 ||
          std::memcmp(&ra[i].ub, &rb[i].ub, sizeof(double)) != 0 ||
          std::memcmp(&ra[i].gap, &rb[i].gap, sizeof(double)) != 0) {
        c.pass = false;
        notes += fmt(" %s/%s: trace diverges at iteration %zu;", cell.path,
                     to_string(cell.engine), i + 1);
        break;
      }
    notes += fmt(" %s h%d %s: %zu its, gap %.3f;", cell.path, cell.horizon,
                 to_string(cell.engine), ra.size(), ra.back().gap);
  }
  c.detail = (c.pass ? "bounds stay ordered and traces reproduce:" : std::string()) + notes;
  return c;
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, Check>> lines;

  lines.emplace_back("CRITERION 1", criterion1());

  Check c2, c3;
  criteria_2_and_3(c2, c3);
  lines.emplace_back("CRITERION 2", c2);
  lines.emplace_back("CRITERION 3", c3);

  lines.emplace_back("CRITERION 4", criterion4());
  lines.emplace_back("CRITERION 5", criterion5());

  ChengRuns cheng = run_cheng_cells();
  lines.emplace_back("CRITERION 6", criterion6(cheng));
  lines.emplace_back("CRITERION 7", criterion7(cheng));
  lines.emplace_back("CRITERION 8", criterion8(cheng));

  lines.emplace_back("CRITERION 9", criterion9());
  lines.emplace_back("CRITERION 10", criterion10());
  lines.emplace_back("LARGER CELLS", larger_cells());

  int failed = 0;
  for (const auto& [name, check] : lines) {
    std::printf("%s: %s — %s\n", name.c_str(), check.pass ? "PASS" : "FAIL", check.detail.c_str());
    if (!check.pass) ++failed;
  }
  std::printf("RESULT: %zu/%zu passed\n", lines.size() - static_cast<std::size_t>(failed),
              lines.size());
  return failed == 0 ? 0 : 1;
}
