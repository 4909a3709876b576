#include "dmm/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dmm {

void DmmParams::validate() const {
  auto positive = [](double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x))
      throw std::invalid_argument(std::string(name) + " must be finite and positive");
  };
  positive(alpha, "alpha");
  positive(beta, "beta");
  positive(gamma, "gamma");
  positive(delta, "delta");
  positive(epsilon, "epsilon");
  positive(eta_gain, "eta_gain");
  positive(zeta, "zeta");
  positive(lambda_shift, "lambda_shift");
  positive(dt, "dt");
  if (gamma >= 1.0) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (delta >= 1.0) throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(tie_tol >= 0.0)) throw std::invalid_argument("tie_tol must be non-negative");
}

void check_state(const CnfFormula& f, const DmmState& s) {
  const auto n = f.n_vars();
  const auto m = f.num_clauses();
  if (s.v.size() != n || s.xs.size() != m || s.xl.size() != m)
    throw DynamicsError("state sizes (" + std::to_string(s.v.size()) + ", " +
                        std::to_string(s.xs.size()) + ", " + std::to_string(s.xl.size()) +
                        ") do not match formula (" + std::to_string(n) + ", " +
                        std::to_string(m) + ")");
  auto in = [](double x, double lo, double hi) { return x >= lo && x <= hi; };
  for (double x : s.v)
    if (!in(x, 0.0, 1.0)) throw DynamicsError("voltage outside [0, 1]");
  for (double x : s.xs)
    if (!in(x, 0.0, 1.0)) throw DynamicsError("short-term memory outside [0, 1]");
  for (double x : s.xl)
    if (!in(x, 0.0, static_cast<double>(m))) throw DynamicsError("long-term memory outside [0, M]");
}

double clause_value(const Clause& clause, std::span<const double> v) {
  double vmax = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& lit = clause.lits[k];
    const double x = literal_value(v[lit.var - 1], lit.negated);
    vmax = k == 0 ? x : std::max(vmax, x);
  }
  return 1.0 - vmax;
}

double gradient_term(const Clause& clause, std::uint32_t var, std::span<const double> v) {
  const auto slot = clause.slot_of(var);
  if (!slot) throw DynamicsError("variable " + std::to_string(var) + " is not in the clause");
  return clause.lits[*slot].polarity() * clause_value(clause, v);
}

double rigidity_term(const Clause& clause, std::uint32_t var, std::span<const double> v,
                     double tie_tol) {
  const auto slot = clause.slot_of(var);
  if (!slot) throw DynamicsError("variable " + std::to_string(var) + " is not in the clause");
  const double c = clause_value(clause, v);
  const auto& lit = clause.lits[*slot];
  const double mine = literal_value(v[lit.var - 1], lit.negated);
  // Attaining the maximum is C == 1 - (own literal value).
  if ((1.0 - c) - mine <= tie_tol) return lit.polarity() * c;
  return 0.0;
}

std::vector<double> softmax_weights(std::span<const double> z) {
  if (z.empty()) throw std::invalid_argument("softmax of an empty vector");
  const double shift = *std::max_element(z.begin(), z.end());
  std::vector<double> w(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    w[i] = std::exp(z[i] - shift);
    sum += w[i];
  }
  for (auto& x : w) x /= sum;
  return w;
}

ClauseLayout::ClauseLayout(const CnfFormula& f)
    : n_vars(f.n_vars()), n_clauses(f.num_clauses()) {
  for (std::size_t k = 0; k < 3; ++k) {
    var[k].resize(n_clauses);
    negated[k].resize(n_clauses);
  }
  for (std::size_t m = 0; m < n_clauses; ++m) {
    const auto& c = f.clause(m);
    for (std::size_t k = 0; k < 3; ++k) {
      var[k][m] = static_cast<std::int32_t>(c.lits[k].var - 1);
      negated[k][m] = c.lits[k].negated ? ~std::uint64_t{0} : 0;
    }
  }
  const auto& idx = f.incidence_index();
  inc_offsets = idx.offsets;
  inc_clause.reserve(idx.entries.size());
  inc_slot.reserve(idx.entries.size());
  inc_negated.reserve(idx.entries.size());
  for (const auto& occ : idx.entries) {
    inc_clause.push_back(occ.clause);
    inc_slot.push_back(occ.slot);
    inc_negated.push_back(f.clause(occ.clause).lits[occ.slot].negated ? 1 : 0);
  }
}

void ClauseScratch::resize(std::size_t n, std::size_t m) {
  c.resize(m);
  grad.resize(m);
  rigid.resize(m);
  for (auto& f : flag) f.resize(m);
  expo.resize(m);
  inv_denom.resize(n);
  for (auto& f : contrib) f.resize(m);
}

namespace {
// exp(-600) is still a normal double, so every denominator stays positive.
constexpr double kMaxGlobalSpread = 600.0;
}  // namespace

std::optional<double> global_softmax_shift(std::span<const double> xl) {
  if (xl.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(xl.begin(), xl.end());
  if (*hi - *lo > kMaxGlobalSpread) return std::nullopt;
  return *hi;
}

VectorField::VectorField(const CnfFormula& f, const simd::KernelTable& kernels)
    : layout_(f), kernels_(&kernels) {
  scratch_.resize(layout_.n_vars, layout_.n_clauses);
}

void VectorField::evaluate(const DmmState& s, const DmmParams& p, Derivatives& out) {
  const std::size_t n = layout_.n_vars;
  const std::size_t m = layout_.n_clauses;
  if (s.v.size() != n || s.xs.size() != m || s.xl.size() != m)
    throw DynamicsError("state size does not match formula");
  out.dv.resize(n);
  out.dxs.resize(m);
  out.dxl.resize(m);

  const auto shift = global_softmax_shift(s.xl);

  simd::ClauseInputs in;
  in.count = m;
  for (int k = 0; k < 3; ++k) {
    in.var[k] = layout_.var[k].data();
    in.negated[k] = layout_.negated[k].data();
  }
  in.v = s.v.data();
  in.xs = s.xs.data();
  in.xl = s.xl.data();
  simd::ClauseTerms terms;
  terms.c = scratch_.c.data();
  for (int k = 0; k < 3; ++k) terms.flag[k] = scratch_.flag[k].data();
  terms.grad = scratch_.grad.data();
  terms.rigid = scratch_.rigid.data();
  terms.dxs = out.dxs.data();
  terms.dxl = out.dxl.data();
  terms.expo = scratch_.expo.data();
  kernels_->clause_pass(
      in, {p.alpha, p.beta, p.gamma, p.delta, p.epsilon, p.tie_tol, shift.value_or(0.0)}, terms);

  if (!shift) {
    accumulate_local(s, p, out);
    return;
  }

  const auto& off = layout_.inc_offsets;
  const auto& inc = layout_.inc_clause;
  for (std::size_t v = 0; v < n; ++v) {
    double denom = 0.0;
    for (auto i = off[v]; i < off[v + 1]; ++i) denom += scratch_.expo[inc[i]];
    scratch_.inv_denom[v] = denom > 0.0 ? 1.0 / denom : 0.0;
  }

  simd::OccurrenceInputs occ;
  occ.count = m;
  for (int k = 0; k < 3; ++k) {
    occ.var[k] = layout_.var[k].data();
    occ.negated[k] = layout_.negated[k].data();
    occ.flag[k] = scratch_.flag[k].data();
  }
  occ.inv_denom = scratch_.inv_denom.data();
  occ.expo = scratch_.expo.data();
  occ.grad = scratch_.grad.data();
  occ.rigid = scratch_.rigid.data();
  occ.eta_gain = p.eta_gain;
  occ.zeta = p.zeta;
  double* const contrib[3] = {scratch_.contrib[0].data(), scratch_.contrib[1].data(),
                              scratch_.contrib[2].data()};
  kernels_->occurrence_pass(occ, contrib);

  for (std::size_t v = 0; v < n; ++v) {
    double acc = 0.0;
    for (auto i = off[v]; i < off[v + 1]; ++i) acc = acc + contrib[layout_.inc_slot[i]][inc[i]];
    out.dv[v] = acc;
  }
}

// Fallback when no single shift is safe: shift each softmax by its own maximum.
void VectorField::accumulate_local(const DmmState& s, const DmmParams& p, Derivatives& out) {
  const auto& off = layout_.inc_offsets;
  std::vector<double> local;
  for (std::size_t v = 0; v < layout_.n_vars; ++v) {
    const auto b = off[v], e = off[v + 1];
    if (b == e) {
      out.dv[v] = 0.0;
      continue;
    }
    local.resize(e - b);
    double shift = s.xl[layout_.inc_clause[b]];
    for (auto i = b; i < e; ++i) shift = std::max(shift, s.xl[layout_.inc_clause[i]]);
    double denom = 0.0;
    for (auto i = b; i < e; ++i) {
      local[i - b] = simd::exp_ref(s.xl[layout_.inc_clause[i]] - shift);
      denom += local[i - b];
    }
    const double inv = 1.0 / denom;
    double acc = 0.0;
    for (auto i = b; i < e; ++i) {
      const auto c = layout_.inc_clause[i];
      const double gw = p.eta_gain * (local[i - b] * inv);
      const double rigid = scratch_.rigid[c] * scratch_.flag[layout_.inc_slot[i]][c];
      const double term = gw * scratch_.grad[c] + (1.0 + p.zeta * gw) * rigid;
      acc = acc + (layout_.inc_negated[i] ? -term : term);
    }
    out.dv[v] = acc;
  }
}

Derivatives derivatives(const CnfFormula& f, const DmmState& s, const DmmParams& p) {
  check_state(f, s);
  VectorField field(f);
  Derivatives d;
  field.evaluate(s, p, d);
  return d;
}

double dv_bound(std::size_t degree, const DmmParams& p) {
  return static_cast<double>(degree) * (p.eta_gain + (1.0 + p.zeta * p.eta_gain));
}

}  // namespace dmm
