#include "dmm/sat_core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "dmm/rng.hpp"

namespace dmm {

bool Clause::contains(std::uint32_t var) const noexcept { return slot_of(var).has_value(); }

std::optional<std::size_t> Clause::slot_of(std::uint32_t var) const noexcept {
  for (std::size_t k = 0; k < lits.size(); ++k)
    if (lits[k].var == var) return k;
  return std::nullopt;
}

DimacsError::DimacsError(const std::string& what, std::size_t line)
    : FormulaError(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

CnfFormula::CnfFormula(std::uint32_t n_vars, std::vector<Clause> clauses)
    : n_vars_(n_vars), clauses_(std::move(clauses)) {
  for (std::size_t m = 0; m < clauses_.size(); ++m) {
    const auto& c = clauses_[m];
    for (const auto& lit : c.lits) {
      if (lit.var < 1 || lit.var > n_vars_)
        throw FormulaError("clause " + std::to_string(m) + ": variable " +
                           std::to_string(lit.var) + " out of range [1, " +
                           std::to_string(n_vars_) + "]");
    }
    if (c.lits[0].var == c.lits[1].var || c.lits[0].var == c.lits[2].var ||
        c.lits[1].var == c.lits[2].var)
      throw FormulaError("clause " + std::to_string(m) + ": duplicate variable");
  }
  incidence_ = build_incidence(n_vars_, clauses_);
}

std::span<const Occurrence> CnfFormula::incidence(std::uint32_t var) const {
  if (var < 1 || var > n_vars_) throw std::out_of_range("variable out of range");
  const auto begin = incidence_.offsets[var - 1];
  const auto end = incidence_.offsets[var];
  return std::span<const Occurrence>(incidence_.entries).subspan(begin, end - begin);
}

IncidenceIndex CnfFormula::build_incidence(std::uint32_t n_vars, std::span<const Clause> clauses) {
  IncidenceIndex idx;
  idx.offsets.assign(std::size_t{n_vars} + 1, 0);
  for (const auto& c : clauses)
    for (const auto& lit : c.lits) ++idx.offsets[lit.var];
  for (std::size_t n = 1; n <= n_vars; ++n) idx.offsets[n] += idx.offsets[n - 1];

  idx.entries.resize(clauses.size() * 3);
  std::vector<std::uint32_t> cursor(idx.offsets.begin(), idx.offsets.end() - 1);
  // Clauses are visited in order, so each variable's list comes out sorted.
  for (std::size_t m = 0; m < clauses.size(); ++m)
    for (std::uint8_t k = 0; k < 3; ++k) {
      const auto var = clauses[m].lits[k].var;
      idx.entries[cursor[var - 1]++] = Occurrence{static_cast<std::uint32_t>(m), k};
    }
  return idx;
}

// ---------------------------------------------------------------------------
// DIMACS

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class Int>
bool parse_int(std::string_view tok, Int& out) {
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

CnfFormula parse_dimacs(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::uint32_t n_vars = 0;
  std::size_t n_clauses = 0;
  std::vector<Clause> clauses;
  std::vector<std::int64_t> pending;
  std::size_t pending_line = 0;

  auto close_clause = [&](std::size_t at) {
    if (pending.size() != 3)
      throw DimacsError("clause has " + std::to_string(pending.size()) +
                            " literals; only 3-literal clauses are supported",
                        at);
    Clause c;
    for (std::size_t k = 0; k < 3; ++k) {
      const auto v = pending[k];
      c.lits[k] = Literal{static_cast<std::uint32_t>(v < 0 ? -v : v), v < 0};
    }
    if (c.lits[0].var == c.lits[1].var || c.lits[0].var == c.lits[2].var ||
        c.lits[1].var == c.lits[2].var)
      throw DimacsError("duplicate variable in clause", at);
    clauses.push_back(c);
    pending.clear();
  };

  while (std::getline(in, line)) {
    ++lineno;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks[0] == "c" || toks[0].front() == 'c') continue;
    if (toks[0] == "%") break;  // SATLIB end marker
    if (toks[0] == "p") {
      if (have_header) throw DimacsError("duplicate header", lineno);
      if (toks.size() != 4 || toks[1] != "cnf" || !parse_int(toks[2], n_vars) ||
          !parse_int(toks[3], n_clauses))
        throw DimacsError("malformed header, expected 'p cnf <vars> <clauses>'", lineno);
      have_header = true;
      continue;
    }
    if (!have_header) throw DimacsError("clause data before 'p cnf' header", lineno);
    for (auto tok : toks) {
      std::int64_t v = 0;
      if (!parse_int(tok, v)) throw DimacsError("invalid token '" + std::string(tok) + "'", lineno);
      if (v == 0) {
        close_clause(pending_line ? pending_line : lineno);
        pending_line = 0;
        continue;
      }
      if (v > static_cast<std::int64_t>(n_vars) || -v > static_cast<std::int64_t>(n_vars))
        throw DimacsError("literal " + std::to_string(v) + " out of range", lineno);
      if (pending.empty()) pending_line = lineno;
      pending.push_back(v);
    }
  }
  if (!have_header) throw DimacsError("missing 'p cnf' header", 0);
  if (!pending.empty()) throw DimacsError("last clause is not terminated by 0", pending_line);
  if (clauses.size() != n_clauses)
    throw DimacsError("header declares " + std::to_string(n_clauses) + " clauses, found " +
                          std::to_string(clauses.size()),
                      0);
  return CnfFormula(n_vars, std::move(clauses));
}

CnfFormula parse_dimacs(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_dimacs(in);
}

CnfFormula read_dimacs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_dimacs(in);
}

std::string serialize_dimacs(const CnfFormula& f, std::span<const std::string> comments) {
  std::string out;
  out.reserve(32 + f.num_clauses() * 20);
  for (const auto& c : comments) {
    out += "c ";
    out += c;
    out += '\n';
  }
  out += "p cnf " + std::to_string(f.n_vars()) + " " + std::to_string(f.num_clauses()) + "\n";
  for (const auto& c : f.clauses()) {
    for (const auto& lit : c.lits) {
      if (lit.negated) out += '-';
      out += std::to_string(lit.var);
      out += ' ';
    }
    out += "0\n";
  }
  return out;
}

void write_dimacs_file(const std::string& path, const CnfFormula& f,
                       std::span<const std::string> comments) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << serialize_dimacs(f, comments);
}

// ---------------------------------------------------------------------------
// Planted generator

std::array<double, 3> planted_type_probabilities(double p0) {
  if (!(p0 >= 0.0 && p0 <= 0.25)) throw std::invalid_argument("p0 must lie in [0, 0.25]");
  return {p0, 0.5 - 2.0 * p0, 0.5 + p0};
}

PlantedInstance generate_planted(std::uint32_t n, double ratio, double p0, std::uint64_t seed) {
  if (n < 3) throw std::invalid_argument("planted generator needs n >= 3");
  if (!(ratio > 0.0)) throw std::invalid_argument("ratio must be positive");
  if (ratio * n < 1.0) throw std::invalid_argument("ratio * n must be at least 1");
  const auto q = planted_type_probabilities(p0);
  const auto m = static_cast<std::size_t>(std::llround(ratio * n));

  rng::Engine eng(seed);
  Assignment plant(n);
  for (std::uint32_t v = 1; v <= n; ++v) plant.set(v, (eng() >> 63) != 0);

  std::vector<Clause> clauses(m);
  for (auto& c : clauses) {
    std::array<std::uint32_t, 3> vars{};
    for (std::size_t k = 0; k < 3; ++k) {
      std::uint32_t v;
      do {
        v = static_cast<std::uint32_t>(rng::below(eng, n)) + 1;
      } while (std::find(vars.begin(), vars.begin() + k, v) != vars.begin() + k);
      vars[k] = v;
    }

    const double u = rng::uniform01(eng);
    const int falsified = u < q[0] ? 0 : (u < q[0] + q[1] ? 1 : 2);
    std::array<bool, 3> is_false{false, false, false};
    if (falsified == 1) {
      is_false[rng::below(eng, 3)] = true;
    } else if (falsified == 2) {
      is_false = {true, true, true};
      is_false[rng::below(eng, 3)] = false;
    }

    for (std::size_t k = 0; k < 3; ++k) {
      // A literal is true under the plant iff negated != plant[var].
      const bool value = plant[vars[k]];
      c.lits[k] = Literal{vars[k], is_false[k] ? value : !value};
    }
  }
  return {CnfFormula(n, std::move(clauses)), std::move(plant)};
}

std::vector<std::string> planted_provenance(std::uint32_t n, double ratio, double p0,
                                            std::uint64_t seed) {
  std::ostringstream r, p;
  r.precision(17);
  p.precision(17);
  r << ratio;
  p << p0;
  return {"planted 3-SAT instance, unbiased clause-type mix",
          "n " + std::to_string(n) + " ratio " + r.str(),
          "p0 " + p.str(),
          "seed " + std::to_string(seed)};
}

// ---------------------------------------------------------------------------
// Evaluation

bool literal_true(const Literal& lit, const Assignment& a) { return a[lit.var] != lit.negated; }

Evaluation evaluate(const CnfFormula& f, const Assignment& a) {
  if (a.size() != f.n_vars())
    throw std::invalid_argument("assignment length " + std::to_string(a.size()) +
                                " does not match " + std::to_string(f.n_vars()) + " variables");
  Evaluation e;
  for (const auto& c : f.clauses()) {
    const bool sat = literal_true(c.lits[0], a) || literal_true(c.lits[1], a) ||
                     literal_true(c.lits[2], a);
    if (!sat) ++e.unsatisfied_count;
  }
  e.satisfied = e.unsatisfied_count == 0;
  return e;
}

std::optional<Assignment> brute_force_sat(const CnfFormula& f) {
  const auto n = f.n_vars();
  if (n > kBruteForceLimit)
    throw FormulaError("brute force limited to " + std::to_string(kBruteForceLimit) +
                       " variables");
  // Each clause is falsified by exactly one pattern on its three variables.
  struct Pattern {
    std::uint32_t mask, falsifying;
  };
  std::vector<Pattern> patterns;
  patterns.reserve(f.num_clauses());
  for (const auto& c : f.clauses()) {
    Pattern p{0, 0};
    for (const auto& lit : c.lits) {
      const std::uint32_t bit = 1u << (lit.var - 1);
      p.mask |= bit;
      if (lit.negated) p.falsifying |= bit;
    }
    patterns.push_back(p);
  }
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t bits = 0; bits < total; ++bits) {
    const auto b = static_cast<std::uint32_t>(bits);
    const bool ok = std::none_of(patterns.begin(), patterns.end(), [b](const Pattern& p) {
      return (b & p.mask) == p.falsifying;
    });
    if (ok) {
      Assignment a(n);
      for (std::uint32_t v = 1; v <= n; ++v) a.set(v, (b >> (v - 1)) & 1u);
      return a;
    }
  }
  return std::nullopt;
}

}  // namespace dmm
