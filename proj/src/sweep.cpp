#include <gsl/gsl_errno.h>
#include <gsl/gsl_multifit_nlinear.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "dmm/bench.hpp"

namespace dmm::bench {

std::string_view to_string(SweepParam p) { return p == SweepParam::dt ? "dt" : "zeta"; }

void SweepSpec::validate() const {
  if (grid.empty()) throw std::invalid_argument("sweep grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || !std::isfinite(grid[i]))
      throw std::invalid_argument("sweep grid values must be positive");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw std::invalid_argument("sweep grid must be strictly increasing");
  }
  if (n < 3) throw std::invalid_argument("sweep size must be at least 3");
  if (instances < 1) throw std::invalid_argument("sweep needs at least one instance");
  if (step_cap < 1) throw std::invalid_argument("step cap must be at least 1");
}

namespace {

struct FitData {
  std::span<const double> x;
  std::span<const double> y;
};

int gaussian_residuals(const gsl_vector* p, void* data, gsl_vector* f) {
  const auto* d = static_cast<const FitData*>(data);
  const double a = gsl_vector_get(p, 0);
  const double mu = gsl_vector_get(p, 1);
  const double s = gsl_vector_get(p, 2);
  for (std::size_t i = 0; i < d->x.size(); ++i) {
    const double z = (d->x[i] - mu) / s;
    gsl_vector_set(f, i, a * std::exp(-0.5 * z * z) - d->y[i]);
  }
  return GSL_SUCCESS;
}

int gaussian_jacobian(const gsl_vector* p, void* data, gsl_matrix* j) {
  const auto* d = static_cast<const FitData*>(data);
  const double a = gsl_vector_get(p, 0);
  const double mu = gsl_vector_get(p, 1);
  const double s = gsl_vector_get(p, 2);
  for (std::size_t i = 0; i < d->x.size(); ++i) {
    const double z = (d->x[i] - mu) / s;
    const double e = std::exp(-0.5 * z * z);
    gsl_matrix_set(j, i, 0, e);
    gsl_matrix_set(j, i, 1, a * e * z / s);
    gsl_matrix_set(j, i, 2, a * e * z * z / s);
  }
  return GSL_SUCCESS;
}

}  // namespace

GaussianFit fit_gaussian_log(std::span<const double> grid, std::span<const double> counts) {
  if (grid.size() != counts.size() || grid.empty())
    throw std::invalid_argument("grid and counts must be non-empty and of equal length");
  const auto best = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  GaussianFit fit;
  fit.flat = true;
  fit.peak = grid[best];
  fit.amplitude = counts[best];
  fit.mu = std::log(grid[best]);
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (*lo == *hi || grid.size() < 3) return fit;

  std::vector<double> x(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) x[i] = std::log(grid[i]);
  FitData data{x, counts};

  gsl_set_error_handler_off();
  const auto params = gsl_multifit_nlinear_default_parameters();
  gsl_multifit_nlinear_workspace* w =
      gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &params, x.size(), 3);
  gsl_multifit_nlinear_fdf fdf{};
  fdf.f = gaussian_residuals;
  fdf.df = gaussian_jacobian;
  fdf.n = x.size();
  fdf.p = 3;
  fdf.params = &data;
  double start[3] = {counts[best], x[best], std::max((x.back() - x.front()) / 4.0, 1e-3)};
  gsl_vector_view p0 = gsl_vector_view_array(start, 3);
  int info = 0;
  int status = gsl_multifit_nlinear_init(&p0.vector, &fdf, w);
  if (status == GSL_SUCCESS) status = gsl_multifit_nlinear_driver(200, 1e-10, 1e-10, 1e-10, nullptr, nullptr, &info, w);
  const double a = gsl_vector_get(w->x, 0);
  const double mu = gsl_vector_get(w->x, 1);
  const double s = std::abs(gsl_vector_get(w->x, 2));
  gsl_multifit_nlinear_free(w);

  const bool usable = status == GSL_SUCCESS && std::isfinite(a) && std::isfinite(mu) &&
                      std::isfinite(s) && a > 0.0 && s > 0.0 && mu >= x.front() && mu <= x.back();
  if (!usable) return fit;
  fit.flat = false;
  fit.amplitude = a;
  fit.mu = mu;
  fit.sigma = s;
  fit.peak = std::exp(mu);
  return fit;
}

SweepResult sweep_parameter(const SweepSpec& spec) {
  spec.validate();
  SweepResult r;
  r.grid = spec.grid;
  std::vector<double> counts;
  for (double value : spec.grid) {
    BatchSpec b;
    b.sizes = {spec.n};
    b.ratio = spec.ratio;
    b.p0 = spec.p0;
    b.instances_per_size = spec.instances;
    b.step_cap = spec.step_cap;
    b.base_seed = spec.base_seed;
    b.workers = spec.workers;
    if (spec.param == SweepParam::dt)
      b.dt = value;
    else
      b.zeta = value;
    const auto stats = run_batch(b);
    r.solved.push_back(stats.sizes.front().solved);
    counts.push_back(stats.sizes.front().solved);
  }
  r.fit = fit_gaussian_log(r.grid, counts);
  return r;
}

void write_sweep_csv(std::ostream& os, const SweepSpec& spec, const SweepResult& r) {
  const auto old = os.precision(17);
  os << "param,value,instances,solved\n";
  for (std::size_t i = 0; i < r.grid.size(); ++i)
    os << to_string(spec.param) << ',' << r.grid[i] << ',' << spec.instances << ',' << r.solved[i]
       << '\n';
  os << "# peak " << r.fit.peak << (r.fit.flat ? " flat" : "") << '\n';
  os.precision(old);
}

}  // namespace dmm::bench
