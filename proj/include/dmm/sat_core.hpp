#pragma once

// 3-SAT instances: representation, DIMACS I/O, planted generation and
// verification.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dmm {

/// A variable (1-based) or its negation.
struct Literal {
  std::uint32_t var = 1;
  bool negated = false;

  constexpr int polarity() const noexcept { return negated ? -1 : 1; }
  friend constexpr bool operator==(const Literal&, const Literal&) = default;
};

struct Clause {
  std::array<Literal, 3> lits;

  bool contains(std::uint32_t var) const noexcept;
  /// Slot (0..2) holding `var`, or nullopt.
  std::optional<std::size_t> slot_of(std::uint32_t var) const noexcept;
  friend bool operator==(const Clause&, const Clause&) = default;
};

/// One occurrence of a variable: the clause and the literal slot within it.
struct Occurrence {
  std::uint32_t clause;
  std::uint8_t slot;
  friend constexpr bool operator==(const Occurrence&, const Occurrence&) = default;
};

/// Per-variable incidence lists in compressed-row form. Entries for each
/// variable are ordered by clause index.
struct IncidenceIndex {
  std::vector<std::uint32_t> offsets;  // size N + 1
  std::vector<Occurrence> entries;     // size 3M

  friend bool operator==(const IncidenceIndex&, const IncidenceIndex&) = default;
};

class FormulaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parse failure; `line()` is 1-based, 0 when not attributable to a line.
class DimacsError : public FormulaError {
 public:
  DimacsError(const std::string& what, std::size_t line);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Immutable 3-SAT formula. Construction validates every clause and builds
/// the incidence index.
class CnfFormula {
 public:
  CnfFormula() = default;
  CnfFormula(std::uint32_t n_vars, std::vector<Clause> clauses);

  std::uint32_t n_vars() const noexcept { return n_vars_; }
  std::size_t num_clauses() const noexcept { return clauses_.size(); }
  std::span<const Clause> clauses() const noexcept { return clauses_; }
  const Clause& clause(std::size_t m) const { return clauses_.at(m); }

  /// Occurrences of variable `var` (1-based).
  std::span<const Occurrence> incidence(std::uint32_t var) const;
  const IncidenceIndex& incidence_index() const noexcept { return incidence_; }
  std::size_t degree(std::uint32_t var) const { return incidence(var).size(); }

  static IncidenceIndex build_incidence(std::uint32_t n_vars, std::span<const Clause> clauses);

  friend bool operator==(const CnfFormula& a, const CnfFormula& b) {
    return a.n_vars_ == b.n_vars_ && a.clauses_ == b.clauses_;
  }

 private:
  std::uint32_t n_vars_ = 0;
  std::vector<Clause> clauses_;
  IncidenceIndex incidence_;
};

/// Truth values indexed 0..N-1 (variable n lives at n-1).
struct Assignment {
  std::vector<std::uint8_t> values;

  Assignment() = default;
  explicit Assignment(std::size_t n) : values(n, 0) {}
  std::size_t size() const noexcept { return values.size(); }
  bool operator[](std::uint32_t var) const { return values[var - 1] != 0; }
  void set(std::uint32_t var, bool value) { values[var - 1] = value ? 1 : 0; }
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct Evaluation {
  bool satisfied = false;
  std::size_t unsatisfied_count = 0;
};

struct PlantedInstance {
  CnfFormula formula;
  Assignment plant;
};

inline constexpr double kDefaultP0 = 0.08;
inline constexpr double kComplexityPeakRatio = 4.3;
inline constexpr std::uint32_t kBruteForceLimit = 26;

CnfFormula parse_dimacs(std::istream& in);
CnfFormula parse_dimacs(std::string_view text);
CnfFormula read_dimacs_file(const std::string& path);

/// `comments` are emitted as `c` lines ahead of the header.
std::string serialize_dimacs(const CnfFormula& f, std::span<const std::string> comments = {});
void write_dimacs_file(const std::string& path, const CnfFormula& f,
                       std::span<const std::string> comments = {});

/// Clause-type probabilities (q0, q1, q2), qt = P(t literals false under the plant).
std::array<double, 3> planted_type_probabilities(double p0);

PlantedInstance generate_planted(std::uint32_t n, double ratio, double p0, std::uint64_t seed);

/// Provenance lines written by the `gen` subcommand.
std::vector<std::string> planted_provenance(std::uint32_t n, double ratio, double p0,
                                            std::uint64_t seed);

bool literal_true(const Literal& lit, const Assignment& a);
Evaluation evaluate(const CnfFormula& f, const Assignment& a);

/// Exhaustive search; throws FormulaError above kBruteForceLimit variables.
std::optional<Assignment> brute_force_sat(const CnfFormula& f);

}  // namespace dmm
