#include "dmm/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dmm/rng.hpp"

namespace dmm::bench {

unsigned default_workers() {
  if (const char* env = std::getenv(kWorkersEnv)) {
    unsigned w = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), w);
    if (ec == std::errc() && ptr == s.data() + s.size() && w > 0) return w;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void BatchSpec::validate() const {
  if (sizes.empty()) throw std::invalid_argument("batch needs at least one size");
  for (auto n : sizes)
    if (n < 3) throw std::invalid_argument("sizes must be at least 3");
  if (instances_per_size < 1) throw std::invalid_argument("instances per size must be at least 1");
  if (!(ratio > 0.0)) throw std::invalid_argument("ratio must be positive");
  if (step_cap < 1) throw std::invalid_argument("step cap must be at least 1");
  if (initial_horizon < 1) throw std::invalid_argument("initial horizon must be at least 1");
  if (imperfections) imperfections->validate();
}

std::uint64_t instance_seed(std::uint64_t base_seed, std::uint32_t n, std::uint32_t index) {
  return rng::derive(base_seed, n, index, 0);
}

std::uint64_t solver_seed(std::uint64_t base_seed, std::uint32_t n, std::uint32_t index) {
  return rng::derive(base_seed, n, index, 1);
}

namespace {

// Calls fn(i) for i in [0, count) on up to `workers` threads. fn must not throw.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  const auto w = std::min<std::size_t>(std::max(1u, workers), count);
  if (w <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(w);
  for (std::size_t t = 0; t < w; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) fn(i);
    });
}

struct Job {
  RunRecord rec;
  std::unique_ptr<PlantedInstance> inst;
  std::unique_ptr<SolveSession> session;
};

SolverConfig make_config(const BatchSpec& spec, std::uint32_t n, std::uint32_t index) {
  SolverConfig c;
  c.max_steps = spec.step_cap;
  c.dt_override = spec.dt;
  c.zeta_override = spec.zeta;
  c.seed = solver_seed(spec.base_seed, n, index);
  if (spec.imperfections) {
    c.imperfections = spec.imperfections;
    // Each simulated device gets its own component draws.
    c.imperfections->seed = rng::derive(spec.imperfections->seed, n, index);
  }
  return c;
}

void start(Job& job, const BatchSpec& spec, std::uint32_t n, std::uint32_t index) {
  job.rec.n = n;
  job.rec.index = index;
  job.rec.instance_seed = instance_seed(spec.base_seed, n, index);
  job.rec.solver_seed = solver_seed(spec.base_seed, n, index);
  job.inst = std::make_unique<PlantedInstance>(
      generate_planted(n, spec.ratio, spec.p0, job.rec.instance_seed));
  job.session = std::make_unique<SolveSession>(job.inst->formula, make_config(spec, n, index));
}

// Advances one job to `horizon` and refreshes its record. Never throws.
void advance(Job& job, const BatchSpec& spec, std::uint32_t n, std::uint32_t index,
             std::uint64_t horizon) {
  if (!job.rec.error.empty() || job.rec.solved) return;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (!job.session) start(job, spec, n, index);
    const auto& r = job.session->run_until(horizon);
    job.rec.steps = r.steps;
    job.rec.integrated_time = r.integrated_time;
    if (r.solved) {
      job.rec.solved = true;
      job.rec.verified = r.assignment && evaluate(job.inst->formula, *r.assignment).satisfied;
    }
  } catch (const std::exception& e) {
    job.rec.error = e.what();
  }
  job.rec.wall_seconds +=
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (job.rec.solved || !job.rec.error.empty() || horizon >= spec.step_cap) {
    job.session.reset();
    job.inst.reset();
  }
}

}  // namespace

std::size_t median_defining_count(std::size_t total) { return total / 2 + 1; }

MedianEstimate censored_median(std::span<const double> times, std::size_t total, double cap) {
  if (times.size() > total) throw std::invalid_argument("more solve times than runs");
  const std::size_t need = median_defining_count(total);
  const std::size_t k = times.size();
  if (k >= need) {
    std::vector<double> t(times.begin(), times.end());
    std::nth_element(t.begin(), t.begin() + (need - 1), t.end());
    return {t[need - 1], false};
  }
  if (k == 0) return {std::nullopt, true};
  return {static_cast<double>(total) / (2.0 * static_cast<double>(k)) * cap, true};
}

FitResult fit_power_law(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw std::invalid_argument("power-law fit needs at least 3 points");
  std::vector<double> x, y;
  for (const auto& [n, v] : points) {
    if (!(n > 0.0) || !(v > 0.0) || !std::isfinite(n) || !std::isfinite(v))
      throw std::invalid_argument("power-law fit needs positive finite data");
    x.push_back(std::log(n));
    y.push_back(std::log(v));
  }
  const double k = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("power-law fit needs at least two distinct sizes");
  FitResult r;
  r.exponent = sxy / sxx;
  const double intercept = my - r.exponent * mx;
  r.prefactor = std::exp(intercept);
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (intercept + r.exponent * x[i]);
    r.residuals.push_back(e);
    ssr += e * e;
  }
  r.exponent_stderr = std::sqrt(ssr / (k - 2.0) / sxx);
  return r;
}

BatchStats run_batch(const BatchSpec& spec) {
  spec.validate();
  const unsigned workers = spec.workers ? spec.workers : default_workers();
  BatchStats stats;
  for (const auto n : spec.sizes) {
    SizeStats s;
    s.n = n;
    s.instances = spec.instances_per_size;
    const auto p = scheduled_params(n, spec.dt, spec.zeta);
    s.dt = p.dt;
    s.zeta = p.zeta;

    std::vector<Job> jobs(spec.instances_per_size);
    auto run_to = [&](std::uint64_t horizon) {
      parallel_for(jobs.size(), workers, [&](std::size_t i) {
        advance(jobs[i], spec, n, static_cast<std::uint32_t>(i), horizon);
      });
    };
    if (spec.policy == StopPolicy::run_all) {
      run_to(spec.step_cap);
    } else {
      // Every unsolved run reaches the same horizon before the count is
      // checked, so the runs solved at stop time are exactly those with the
      // smallest times and the median is unaffected by stopping.
      const auto need = median_defining_count(jobs.size());
      for (std::uint64_t h = std::min(spec.initial_horizon, spec.step_cap);; h = std::min(h * 2, spec.step_cap)) {
        run_to(h);
        const auto solved = std::count_if(jobs.begin(), jobs.end(),
                                          [](const Job& j) { return j.rec.solved; });
        if (static_cast<std::size_t>(solved) >= need || h >= spec.step_cap) break;
      }
    }

    std::vector<double> times;
    for (auto& j : jobs) {
      if (j.rec.solved) times.push_back(j.rec.integrated_time);
      s.runs.push_back(std::move(j.rec));
    }
    s.solved = static_cast<std::uint32_t>(times.size());
    const auto m = censored_median(times, s.instances, static_cast<double>(spec.step_cap) * s.dt);
    s.median_time = m.median;
    s.censored = m.censored;
    stats.sizes.push_back(std::move(s));
  }
  return stats;
}

namespace {

std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

double parse_double(std::string_view s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("bad number in CSV: '" + std::string(s) + "'");
  return v;
}

std::uint64_t parse_uint(std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("bad integer in CSV: '" + std::string(s) + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

constexpr std::string_view kBatchHeader = "n,instances,solved,median_time,censored,dt,zeta";

}  // namespace

void write_batch_csv(std::ostream& os, const BatchStats& stats) {
  os << kBatchHeader << '\n';
  for (const auto& s : stats.sizes)
    os << s.n << ',' << s.instances << ',' << s.solved << ','
       << (s.median_time ? fmt(*s.median_time) : "inf") << ',' << (s.censored ? 1 : 0) << ','
       << fmt(s.dt) << ',' << fmt(s.zeta) << '\n';
}

BatchStats read_batch_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kBatchHeader)
    throw std::invalid_argument("batch CSV header must be '" + std::string(kBatchHeader) + "'");
  BatchStats stats;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 7) throw std::invalid_argument("batch CSV row needs 7 fields: " + line);
    SizeStats s;
    s.n = static_cast<std::uint32_t>(parse_uint(f[0]));
    s.instances = static_cast<std::uint32_t>(parse_uint(f[1]));
    s.solved = static_cast<std::uint32_t>(parse_uint(f[2]));
    const double m = parse_double(f[3]);
    if (std::isfinite(m)) s.median_time = m;
    s.censored = parse_uint(f[4]) != 0;
    s.dt = parse_double(f[5]);
    s.zeta = parse_double(f[6]);
    stats.sizes.push_back(std::move(s));
  }
  return stats;
}

void write_runs_csv(std::ostream& os, const BatchStats& stats) {
  os << "n,index,instance_seed,solver_seed,solved,verified,steps,integrated_time,error\n";
  for (const auto& s : stats.sizes)
    for (const auto& r : s.runs) {
      std::string err = r.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      os << r.n << ',' << r.index << ',' << r.instance_seed << ',' << r.solver_seed << ','
         << (r.solved ? 1 : 0) << ',' << (r.verified ? 1 : 0) << ',' << r.steps << ','
         << fmt(r.integrated_time) << ',' << err << '\n';
    }
}

std::optional<FitResult> fit_batch(const BatchStats& stats) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& s : stats.sizes)
    if (s.median_time && *s.median_time > 0.0) pts.emplace_back(s.n, *s.median_time);
  if (pts.size() < 3) return std::nullopt;
  return fit_power_law(pts);
}

}  // namespace dmm::bench
