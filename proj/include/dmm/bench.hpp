#pragma once

// Batch experiments: planted suites solved in parallel, censored medians of
// integration time, power-law fits, and parameter sweeps.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmm/imperfections.hpp"
#include "dmm/integrator.hpp"
#include "dmm/sat_core.hpp"

namespace dmm::bench {

/// Environment variable holding the default worker count.
inline constexpr const char* kWorkersEnv = "DMM_WORKERS";

/// DMM_WORKERS if set to a positive integer, else the hardware concurrency.
unsigned default_workers();

enum class StopPolicy {
  run_all,     // every instance runs until solved or capped
  early_stop,  // a size stops once the median-defining count is solved
};

struct BatchSpec {
  std::vector<std::uint32_t> sizes;
  double ratio = kComplexityPeakRatio;
  double p0 = kDefaultP0;
  std::uint32_t instances_per_size = 100;
  std::uint64_t step_cap = kDefaultMaxSteps;
  std::optional<double> dt;    // schedule default when empty
  std::optional<double> zeta;  // schedule default when empty
  std::optional<ImperfectionModel> imperfections;
  std::uint64_t base_seed = 1;
  unsigned workers = 0;  // 0: default_workers()
  StopPolicy policy = StopPolicy::run_all;
  /// First horizon of the early-stop policy, doubled each round.
  std::uint64_t initial_horizon = 1024;

  void validate() const;
};

/// Seed of the formula for (size, index).
std::uint64_t instance_seed(std::uint64_t base_seed, std::uint32_t n, std::uint32_t index);
/// Seed of the initial voltages for (size, index).
std::uint64_t solver_seed(std::uint64_t base_seed, std::uint32_t n, std::uint32_t index);

struct RunRecord {
  std::uint32_t n = 0;
  std::uint32_t index = 0;
  std::uint64_t instance_seed = 0;
  std::uint64_t solver_seed = 0;
  bool solved = false;
  bool verified = false;  // assignment re-checked by the clause evaluator
  std::uint64_t steps = 0;
  double integrated_time = 0.0;
  double wall_seconds = 0.0;  // informational only
  std::string error;          // non-empty when the run threw
};

struct SizeStats {
  std::uint32_t n = 0;
  std::uint32_t instances = 0;
  std::uint32_t solved = 0;
  std::optional<double> median_time;  // empty when nothing was solved
  bool censored = false;
  double dt = 0.0;
  double zeta = 0.0;
  std::vector<RunRecord> runs;  // ordered by index
};

struct BatchStats {
  std::vector<SizeStats> sizes;  // in spec order
};

/// Number of solved runs that pins the median: ceil((total + 1) / 2).
std::size_t median_defining_count(std::size_t total);

struct MedianEstimate {
  std::optional<double> median;
  bool censored = false;
};

/// Median solve time with unsolved runs censored at `cap`. With at least
/// median_defining_count(total) times this is that order statistic;
/// otherwise, for k > 0 solved, (total / 2k) * cap under a uniform model of
/// solve times; nothing when k = 0.
MedianEstimate censored_median(std::span<const double> times, std::size_t total, double cap);

struct FitResult {
  double exponent = 0.0;
  double prefactor = 0.0;
  double exponent_stderr = 0.0;
  std::vector<double> residuals;  // in log space
};

/// Least-squares line through (ln N, ln y). Needs >= 3 points, all positive.
FitResult fit_power_law(std::span<const std::pair<double, double>> points);

/// Runs the batch. Results do not depend on the worker count.
BatchStats run_batch(const BatchSpec& spec);

/// Summary CSV, header n,instances,solved,median_time,censored,dt,zeta.
/// A missing median is written as "inf".
void write_batch_csv(std::ostream& os, const BatchStats& stats);
/// Parses a summary CSV (per-run records are not part of it).
BatchStats read_batch_csv(std::istream& is);

/// Per-run CSV, ordered by (size, index); wall time is omitted so the file is
/// reproducible.
void write_runs_csv(std::ostream& os, const BatchStats& stats);

/// Fit over the sizes with a finite median.
std::optional<FitResult> fit_batch(const BatchStats& stats);

// ---------------------------------------------------------------------------

enum class SweepParam { dt, zeta };

struct SweepSpec {
  SweepParam param = SweepParam::dt;
  std::vector<double> grid;  // sorted, positive
  std::uint32_t n = 0;
  std::uint32_t instances = 20;
  std::uint64_t step_cap = kDefaultMaxSteps;
  double ratio = kComplexityPeakRatio;
  double p0 = kDefaultP0;
  std::uint64_t base_seed = 1;
  unsigned workers = 0;

  void validate() const;
};

/// count = a * exp(-(ln x - mu)^2 / (2 s^2)).
struct GaussianFit {
  double amplitude = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  bool flat = false;  // no usable fit; peak is the argmax grid point
  double peak = 0.0;
};

/// Least-squares Gaussian in log-parameter space. All-equal counts, a failed
/// fit, or a peak outside the grid give the argmax grid point with flat set.
GaussianFit fit_gaussian_log(std::span<const double> grid, std::span<const double> counts);

struct SweepResult {
  std::vector<double> grid;
  std::vector<std::uint32_t> solved;
  GaussianFit fit;
};

SweepResult sweep_parameter(const SweepSpec& spec);

/// Columns param,value,instances,solved; then a comment line with the peak.
void write_sweep_csv(std::ostream& os, const SweepSpec& spec, const SweepResult& r);

std::string_view to_string(SweepParam p);

}  // namespace dmm::bench
