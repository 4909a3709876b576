#pragma once

// Behavioral models of the analog building blocks (ideal transfer functions
// with rail saturation) and their composition into the clause and variable
// modules. Used as an independent oracle for the dynamics and as a
// description of the hardware signal path.
//
// Signal scalings inside the clause module (all intermediates stay within
// +-rail for literal voltages in [0, 1], xs in [0, 1], xl in [0, 30]):
//
//   quantity              carried as                   scale back
//   C                     1 V - v_max                  1
//   xl                    k * xl volts, k = 0.375/ln10 1/k
//   log(C + lambda)       -k ln(C + lambda)            -1/k
//   log-sum-exp arm       0.03 (C + lambda) e^-xl      1/0.03
//   dxl                   alpha e^-xl (C - delta)      1
//   dxs                   (beta/4)(xs + eps)(C - gamma) 4
//   dv1_i, dv2_i          as defined                   1
//   softmax input         V_T * xl                     1/V_T

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dmm/dynamics.hpp"

namespace dmm::circuit {

struct BlockConstants {
  double rail = 5.0;                   // V
  double v_thermal = 25.68e-3;         // V, kT/q at 25 C
  double v_diode = 0.6;                // V
  double c_integrate = 10e-9;          // F
  double log_gain = -0.375;            // V per decade
  double log_ref_current = 1e-6;       // A
  double log_transconductance = 1e-6;  // A/V, voltage-to-current stage in front of the log amp
  double antilog_scale = 30e-3;        // V
  double multiplier_unit = 1.0;        // V
  double time_units_per_second = 100.0;

  void validate() const;
};

class BlockError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

double clip(double x, const BlockConstants& k = {});

double adder(double v1, double v2, const BlockConstants& k = {});
double subtractor(double vp, double vm, const BlockConstants& k = {});
double multiplier(double x, double y, const BlockConstants& k = {});
/// Inverting/non-inverting amplifier with fixed gain.
double gain(double v, double g, const BlockConstants& k = {});

/// V = log_gain * log10(i / log_ref_current). Throws BlockError for i <= 0.
double log_amp(double i_in, const BlockConstants& k = {});

/// V = antilog_scale * exp(-v / antilog_scale).
double antilog_amp(double v_in, const BlockConstants& k = {});

/// y_i = 1 V * softmax(x / V_T). Throws BlockError on empty input.
std::vector<double> softmax_block(std::span<const double> x, const BlockConstants& k = {});

struct ComparatorOut {
  double v_max = 0.0;
  std::array<double, 3> b{};  // v_max + v_diode for maximal inputs, -rail otherwise
};

ComparatorOut comparator3(double v1, double v2, double v3, const BlockConstants& k = {},
                          double tie_tol = 1e-9);

/// Passes v_in when its sign's control line is positive, else 0.
double bidirectional_switch(double v_in, double ctrl_plus, double ctrl_minus,
                            const BlockConstants& k = {});

/// Capacitor update over dt_seconds with the switch-gated derivative;
/// ctrl+ opens while x < hi, ctrl- while x > lo. dx is the current-domain
/// input and is not rail-limited.
double integrator_cell(double x, double dx, double dt_seconds, double lo, double hi,
                       const BlockConstants& k = {});

struct ClauseModuleOut {
  double c = 0.0;
  double dxs = 0.0;
  double dxl = 0.0;
  std::array<double, 3> dv1{};  // xs * G + zeta (1 - xs) R, literal domain
  std::array<double, 3> dv2{};  // (1 - xs) R, literal domain
  ComparatorOut cmp;
};

/// Clause module from blocks. `lits` are literal voltages (already inverted
/// for negated literals). Throws BlockError for inputs out of range.
ClauseModuleOut clause_module(const std::array<double, 3>& lits, double xs, double xl,
                              const DmmParams& p, const BlockConstants& k = {});

/// dv for every variable assembled from clause-module outputs and the
/// softmax block. Current domain: the sum is not rail-limited.
std::vector<double> variable_module(const CnfFormula& f, const DmmState& s, const DmmParams& p,
                                    const BlockConstants& k = {});

/// Closed forms the clause module is checked against.
struct ClauseReference {
  double c, dxs, dxl;
  std::array<double, 3> dv1, dv2;
};
ClauseReference clause_reference(const std::array<double, 3>& lits, double xs, double xl,
                                 const DmmParams& p);

// ---------------------------------------------------------------------------
// Block graphs.
//
// Line-oriented description; '#' starts a comment.
//   in <name>
//   block <id> <kind> [key=value ...]
//   wire <source> <id>.<port>
//   out <name> <source>
// A source is an input name, a single-output block id, or <id>.<port> for
// blocks with several outputs.
//
// kind         inputs        outputs          parameters
// const        -             out              value
// adder        a b           out
// subtractor   p m           out
// multiplier   x y           out
// gain         in            out              k
// log_amp      in (volts)    out              (uses log_transconductance)
// antilog      in            out
// comparator3  v1 v2 v3      vmax b1 b2 b3    tie_tol
// switch       in cp cm      out
// softmax      x1..xn        y1..yn           n

class BlockGraph {
 public:
  static BlockGraph parse(std::string_view text, const BlockConstants& k = {});
  static BlockGraph load(const std::string& path, const BlockConstants& k = {});

  const std::vector<std::string>& inputs() const noexcept { return inputs_; }
  const std::vector<std::string>& outputs() const noexcept { return output_names_; }
  std::size_t block_count() const noexcept { return blocks_.size(); }

  /// Throws BlockError when an input is missing.
  std::map<std::string, double> evaluate(const std::map<std::string, double>& in) const;

 private:
  struct Block {
    std::string id;
    std::string kind;
    std::map<std::string, double> params;
    std::vector<std::string> in_ports;
    std::vector<std::string> out_ports;
    std::vector<std::size_t> in_signal;  // signal index per input port
    std::size_t out_base = 0;            // first output signal index
  };

  BlockConstants k_;
  std::vector<std::string> inputs_;
  std::vector<Block> blocks_;  // topological order
  std::map<std::string, std::size_t> signal_index_;
  std::size_t n_signals_ = 0;
  std::vector<std::string> output_names_;
  std::vector<std::size_t> output_signal_;

  void run_block(const Block& b, std::vector<double>& sig) const;
};

/// Built-in description of the clause module; same signal path as
/// clause_module(). Inputs v1 v2 v3 xs xl zeta; outputs c dxs dxl dv1_i dv2_i.
std::string_view clause_module_graph();

/// Evaluates a clause-module graph and maps its outputs back to model units.
ClauseModuleOut run_clause_graph(const BlockGraph& g, const std::array<double, 3>& lits, double xs,
                                 double xl, double zeta);

// ---------------------------------------------------------------------------
// Self-check suites run by the blocks-check command.

struct CheckRow {
  std::string suite;     // block name, "clause_module", "clause_graph" or "log_identity"
  std::string quantity;  // output compared
  std::size_t index = 0;
  double value = 0.0;
  double reference = 0.0;
  double error = 0.0;  // relative, or absolute below the suite's floor
  bool pass = true;
};

struct CheckOptions {
  std::size_t grid_points = 1000;
  std::size_t clause_samples = 10000;
  std::uint64_t seed = 1;
  double block_rel_tol = 1e-12;
  double clause_rel_tol = 1e-3;
  double clause_abs_tol = 1e-6;
};

struct CheckReport {
  std::vector<CheckRow> rows;
  std::map<std::string, double> worst_error;  // per suite
  std::size_t failures = 0;
  bool passed() const noexcept { return failures == 0; }
};

/// Transfer functions on grids, the clause module against the dynamics
/// closed forms, the log-space identity, and `graph` against clause_module.
CheckReport run_block_checks(const BlockGraph& graph, const CheckOptions& opt = {},
                             const BlockConstants& k = {});

void write_check_csv(std::ostream& os, const CheckReport& report);

}  // namespace dmm::circuit
