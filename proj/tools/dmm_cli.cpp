// Command-line front end: instance generation, single solves, batches,
// parameter sweeps and the circuit-block self-check.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dmm/bench.hpp"
#include "dmm/circuit_blocks.hpp"
#include "dmm/integrator.hpp"
#include "dmm/sat_core.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kUnsolved = 2, kInternal = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ImperfectionFlags {
  double eta_tol = 0.0;
  double kappa = 0.0;
  double white_noise = 0.0;
  dmm::ToleranceMode mode = dmm::ToleranceMode::static_per_site;
  dmm::ToleranceDistribution dist = dmm::ToleranceDistribution::uniform;
  std::uint64_t seed = 0;

  void attach(CLI::App* app) {
    app->add_option("--eta-tol", eta_tol, "Component tolerance (relative spread of each factor)")
        ->check(CLI::Range(0.0, 0.999999));
    app->add_option("--kappa", kappa, "Leakage rate")->check(CLI::Range(0.0, 0.999999));
    app->add_option("--white-noise", white_noise, "Relative noise on gamma, delta, epsilon")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--tol-mode", mode, "static (per component) or resample (every step)")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, dmm::ToleranceMode>{
                {"static", dmm::ToleranceMode::static_per_site},
                {"resample", dmm::ToleranceMode::resample_per_step}},
            CLI::ignore_case));
    app->add_option("--tol-dist", dist, "uniform or gaussian")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, dmm::ToleranceDistribution>{
                {"uniform", dmm::ToleranceDistribution::uniform},
                {"gaussian", dmm::ToleranceDistribution::gaussian}},
            CLI::ignore_case));
    app->add_option("--imperfection-seed", seed, "Seed of the component draws and noise");
  }

  std::optional<dmm::ImperfectionModel> model() const {
    if (eta_tol == 0.0 && kappa == 0.0 && white_noise == 0.0) return std::nullopt;
    dmm::ImperfectionModel m;
    m.eta_tol = eta_tol;
    m.kappa = kappa;
    m.white_noise_level = white_noise;
    m.tol_mode = mode;
    m.distribution = dist;
    m.seed = seed;
    m.validate();
    return m;
  }
};

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw UsageError("cannot write '" + path + "'");
  return os;
}

int cmd_gen(std::uint32_t n, double ratio, double p0, std::uint64_t seed, const std::string& out) {
  const auto inst = dmm::generate_planted(n, ratio, p0, seed);
  dmm::write_dimacs_file(out, inst.formula, dmm::planted_provenance(n, ratio, p0, seed));
  std::cerr << "wrote " << inst.formula.num_clauses() << " clauses over " << n << " variables to "
            << out << '\n';
  return kOk;
}

struct SolveArgs {
  std::string file;
  std::uint64_t seed = 0;
  std::uint64_t max_steps = dmm::kDefaultMaxSteps;
  std::optional<double> dt, zeta;
  std::string trace;
  std::uint64_t trace_interval = 1;
  bool require_solved = false;
  ImperfectionFlags imp;
};

int cmd_solve(const SolveArgs& a) {
  const auto f = dmm::read_dimacs_file(a.file);
  dmm::SolverConfig c;
  c.seed = a.seed;
  c.max_steps = a.max_steps;
  c.dt_override = a.dt;
  c.zeta_override = a.zeta;
  c.imperfections = a.imp.model();
  if (!a.trace.empty()) c.trace_interval = a.trace_interval;
  dmm::SolveSession session(f, c);
  const auto& r = session.run();

  if (!a.trace.empty()) {
    auto os = open_out(a.trace);
    os.precision(17);
    os << "time";
    for (std::uint32_t i = 1; i <= f.n_vars(); ++i) os << ",v" << i;
    os << '\n';
    for (const auto& s : r.trajectory) {
      os << s.time;
      for (double v : s.v) os << ',' << v;
      os << '\n';
    }
  }

  nlohmann::json j;
  j["solved"] = r.solved;
  j["steps"] = r.steps;
  j["integrated_time"] = r.integrated_time;
  j["seed"] = r.seed;
  j["dt"] = session.params().dt;
  j["zeta"] = session.params().zeta;
  if (r.assignment) {
    std::vector<int> lits;
    for (std::uint32_t i = 1; i <= f.n_vars(); ++i)
      lits.push_back((*r.assignment)[i] ? static_cast<int>(i) : -static_cast<int>(i));
    j["assignment"] = lits;
  }
  std::cout << j.dump() << '\n';
  return a.require_solved && !r.solved ? kUnsolved : kOk;
}

struct BenchArgs {
  dmm::bench::BatchSpec spec;
  std::string policy = "run-all";
  std::string out, runs_out;
  ImperfectionFlags imp;
};

int cmd_bench(BenchArgs& a) {
  a.spec.policy =
      a.policy == "early-stop" ? dmm::bench::StopPolicy::early_stop : dmm::bench::StopPolicy::run_all;
  a.spec.imperfections = a.imp.model();
  const auto stats = dmm::bench::run_batch(a.spec);
  {
    auto os = open_out(a.out);
    dmm::bench::write_batch_csv(os, stats);
  }
  if (!a.runs_out.empty()) {
    auto os = open_out(a.runs_out);
    dmm::bench::write_runs_csv(os, stats);
  }
  nlohmann::json j;
  j["sizes"] = nlohmann::json::array();
  for (const auto& s : stats.sizes) {
    nlohmann::json row{{"n", s.n}, {"solved", s.solved}, {"instances", s.instances},
                       {"censored", s.censored}};
    row["median_time"] = s.median_time ? nlohmann::json(*s.median_time) : nlohmann::json(nullptr);
    j["sizes"].push_back(row);
    for (const auto& r : s.runs) {
      if (!r.error.empty())
        std::cerr << "run n=" << r.n << " index=" << r.index << " seed=" << r.instance_seed << "/"
                  << r.solver_seed << " failed: " << r.error << '\n';
      else if (r.solved && !r.verified)
        std::cerr << "run n=" << r.n << " index=" << r.index << " returned an assignment that "
                  << "does not satisfy the formula\n";
    }
  }
  if (const auto fit = dmm::bench::fit_batch(stats)) {
    j["fit"] = {{"exponent", fit->exponent},
                {"exponent_stderr", fit->exponent_stderr},
                {"prefactor", fit->prefactor}};
  }
  std::cout << j.dump() << '\n';
  return kOk;
}

int cmd_sweep(dmm::bench::SweepSpec& spec, const std::string& param, const std::string& out) {
  spec.param = param == "zeta" ? dmm::bench::SweepParam::zeta : dmm::bench::SweepParam::dt;
  const auto r = dmm::bench::sweep_parameter(spec);
  auto os = open_out(out);
  dmm::bench::write_sweep_csv(os, spec, r);
  nlohmann::json j{{"param", param}, {"peak", r.fit.peak}, {"flat", r.fit.flat},
                   {"solved", r.solved}};
  std::cout << j.dump() << '\n';
  return kOk;
}

int cmd_blocks(const std::string& graph_path, const std::string& out,
               const dmm::circuit::CheckOptions& opt) {
  const auto graph = graph_path.empty()
                         ? dmm::circuit::BlockGraph::parse(dmm::circuit::clause_module_graph())
                         : dmm::circuit::BlockGraph::load(graph_path);
  const auto report = dmm::circuit::run_block_checks(graph, opt);
  {
    auto os = open_out(out);
    dmm::circuit::write_check_csv(os, report);
  }
  nlohmann::json j{{"passed", report.passed()}, {"failures", report.failures},
                   {"points", report.rows.size()}};
  for (const auto& [suite, err] : report.worst_error) j["worst_error"][suite] = err;
  std::cout << j.dump() << '\n';
  if (!report.passed()) {
    std::cerr << report.failures << " comparisons outside tolerance; see " << out << '\n';
    return kInternal;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memcomputing 3-SAT solver"};
  app.require_subcommand(1);

  // gen
  std::uint32_t gen_n = 0;
  double gen_ratio = dmm::kComplexityPeakRatio, gen_p0 = dmm::kDefaultP0;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Write a planted 3-SAT instance as DIMACS");
  gen->add_option("--n", gen_n, "Number of variables")->required()->check(CLI::Range(3u, 1u << 30));
  gen->add_option("--ratio", gen_ratio, "Clause-to-variable ratio")->check(CLI::PositiveNumber);
  gen->add_option("--p0", gen_p0, "Probability that a clause has all three literals true under the plant")
      ->check(CLI::Range(0.0, 0.25));
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out)->required();

  // solve
  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "Integrate one instance until solved or capped");
  solve->add_option("file", sa.file, "DIMACS file")->required()->check(CLI::ExistingFile);
  solve->add_option("--seed", sa.seed, "Seed of the initial voltages");
  solve->add_option("--max-steps", sa.max_steps)->check(CLI::PositiveNumber);
  solve->add_option("--dt", sa.dt, "Euler step (default: size schedule)")->check(CLI::PositiveNumber);
  solve->add_option("--zeta", sa.zeta, "Rigidity mix (default: size schedule)")
      ->check(CLI::PositiveNumber);
  solve->add_option("--trace", sa.trace, "Write the voltage trajectory to this CSV");
  solve->add_option("--trace-interval", sa.trace_interval, "Steps between trace rows")
      ->check(CLI::PositiveNumber);
  solve->add_flag("--require-solved", sa.require_solved, "Exit with status 2 when unsolved");
  sa.imp.attach(solve);

  // bench
  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Solve planted suites and report censored medians");
  bench->add_option("--sizes", ba.spec.sizes, "Numbers of variables")->required()->expected(1, -1);
  bench->add_option("--ratio", ba.spec.ratio)->check(CLI::PositiveNumber);
  bench->add_option("--p0", ba.spec.p0)->check(CLI::Range(0.0, 0.25));
  bench->add_option("--instances", ba.spec.instances_per_size)->check(CLI::PositiveNumber);
  bench->add_option("--step-cap", ba.spec.step_cap)->check(CLI::PositiveNumber);
  bench->add_option("--dt", ba.spec.dt)->check(CLI::PositiveNumber);
  bench->add_option("--zeta", ba.spec.zeta)->check(CLI::PositiveNumber);
  bench->add_option("--seed", ba.spec.base_seed, "Base seed of the suite");
  bench->add_option("--workers", ba.spec.workers,
                    std::string("Worker threads (default: $") + dmm::bench::kWorkersEnv +
                        " or the core count)");
  bench->add_option("--policy", ba.policy, "run-all or early-stop")
      ->check(CLI::IsMember({"run-all", "early-stop"}));
  bench->add_option("--out", ba.out, "Summary CSV")->required();
  bench->add_option("--runs-out", ba.runs_out, "Per-run CSV");
  ba.imp.attach(bench);

  // sweep
  dmm::bench::SweepSpec sw;
  std::string sw_param, sw_out;
  auto* sweep = app.add_subcommand("sweep", "Count solved instances across a parameter grid");
  sweep->add_option("--param", sw_param)->required()->check(CLI::IsMember({"dt", "zeta"}));
  sweep->add_option("--grid", sw.grid)->required()->expected(1, -1);
  sweep->add_option("--n", sw.n)->required()->check(CLI::Range(3u, 1u << 30));
  sweep->add_option("--instances", sw.instances)->check(CLI::PositiveNumber);
  sweep->add_option("--step-cap", sw.step_cap)->check(CLI::PositiveNumber);
  sweep->add_option("--ratio", sw.ratio)->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sw.base_seed);
  sweep->add_option("--workers", sw.workers);
  sweep->add_option("--out", sw_out)->required();

  // blocks-check
  std::string bc_graph, bc_out;
  dmm::circuit::CheckOptions bc;
  auto* blocks = app.add_subcommand("blocks-check", "Check circuit blocks and the clause module");
  blocks->add_option("--graph", bc_graph, "Clause-module graph file (default: built in)")
      ->check(CLI::ExistingFile);
  blocks->add_option("--out", bc_out, "Comparison CSV")->required();
  blocks->add_option("--points", bc.grid_points, "Grid points per block")->check(CLI::PositiveNumber);
  blocks->add_option("--samples", bc.clause_samples, "Random clause-module inputs")
      ->check(CLI::PositiveNumber);
  blocks->add_option("--seed", bc.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen(gen_n, gen_ratio, gen_p0, gen_seed, gen_out);
    if (*solve) return cmd_solve(sa);
    if (*bench) return cmd_bench(ba);
    if (*sweep) return cmd_sweep(sw, sw_param, sw_out);
    if (*blocks) return cmd_blocks(bc_graph, bc_out, bc);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const dmm::DimacsError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}
