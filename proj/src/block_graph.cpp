#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <fstream>
#include <sstream>

#include "dmm/circuit_blocks.hpp"

namespace dmm::circuit {

namespace {

struct KindInfo {
  std::vector<std::string> in;
  std::vector<std::string> out;
};

KindInfo kind_info(const std::string& kind, const std::map<std::string, double>& params) {
  if (kind == "const") return {{}, {"out"}};
  if (kind == "adder") return {{"a", "b"}, {"out"}};
  if (kind == "subtractor") return {{"p", "m"}, {"out"}};
  if (kind == "multiplier") return {{"x", "y"}, {"out"}};
  if (kind == "gain" || kind == "log_amp" || kind == "antilog") return {{"in"}, {"out"}};
  if (kind == "comparator3") return {{"v1", "v2", "v3"}, {"vmax", "b1", "b2", "b3"}};
  if (kind == "switch") return {{"in", "cp", "cm"}, {"out"}};
  if (kind == "softmax") {
    const auto it = params.find("n");
    if (it == params.end() || it->second < 1 || it->second != std::floor(it->second))
      throw BlockError("softmax block needs an integer n >= 1");
    KindInfo info;
    for (int i = 1; i <= static_cast<int>(it->second); ++i) {
      info.in.push_back("x" + std::to_string(i));
      info.out.push_back("y" + std::to_string(i));
    }
    return info;
  }
  throw BlockError("unknown block kind '" + kind + "'");
}

double parse_number(const std::string& s, int line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw BlockError("line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

double param(const std::map<std::string, double>& params, const char* key,
             const std::string& id) {
  const auto it = params.find(key);
  if (it == params.end()) throw BlockError("block '" + id + "' needs parameter " + key);
  return it->second;
}

}  // namespace

BlockGraph BlockGraph::parse(std::string_view text, const BlockConstants& k) {
  k.validate();
  BlockGraph g;
  g.k_ = k;

  struct Wire {
    std::string src, block, port;
    int line;
  };
  std::vector<Block> declared;
  std::vector<Wire> wires;
  std::vector<std::pair<std::string, std::string>> outs;
  std::map<std::string, std::size_t> block_pos;

  std::istringstream is{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    auto fail = [&](const std::string& what) {
      throw BlockError("line " + std::to_string(line) + ": " + what);
    };
    if (tok[0] == "in") {
      if (tok.size() != 2) fail("expected 'in <name>'");
      if (g.signal_index_.count(tok[1])) fail("duplicate input '" + tok[1] + "'");
      g.signal_index_[tok[1]] = g.n_signals_++;
      g.inputs_.push_back(tok[1]);
    } else if (tok[0] == "block") {
      if (tok.size() < 3) fail("expected 'block <id> <kind> [key=value ...]'");
      Block b;
      b.id = tok[1];
      b.kind = tok[2];
      if (b.id.find('.') != std::string::npos) fail("block id may not contain '.'");
      if (block_pos.count(b.id) || g.signal_index_.count(b.id)) fail("duplicate id '" + b.id + "'");
      for (std::size_t i = 3; i < tok.size(); ++i) {
        const auto eq = tok[i].find('=');
        if (eq == std::string::npos) fail("expected key=value, got '" + tok[i] + "'");
        b.params[tok[i].substr(0, eq)] = parse_number(tok[i].substr(eq + 1), line);
      }
      try {
        const auto info = kind_info(b.kind, b.params);
        b.in_ports = info.in;
        b.out_ports = info.out;
      } catch (const BlockError& e) {
        fail(e.what());
      }
      b.in_signal.assign(b.in_ports.size(), SIZE_MAX);
      block_pos[b.id] = declared.size();
      declared.push_back(std::move(b));
    } else if (tok[0] == "wire") {
      if (tok.size() != 3) fail("expected 'wire <source> <block>.<port>'");
      const auto dot = tok[2].find('.');
      if (dot == std::string::npos) fail("wire target must be <block>.<port>");
      wires.push_back({tok[1], tok[2].substr(0, dot), tok[2].substr(dot + 1), line});
    } else if (tok[0] == "out") {
      if (tok.size() != 3) fail("expected 'out <name> <source>'");
      outs.emplace_back(tok[1], tok[2]);
    } else {
      fail("unknown directive '" + tok[0] + "'");
    }
  }

  // Output signals of every block.
  for (auto& b : declared) {
    b.out_base = g.n_signals_;
    for (const auto& port : b.out_ports) g.signal_index_[b.id + "." + port] = g.n_signals_++;
    if (b.out_ports.size() == 1) g.signal_index_[b.id] = b.out_base;
  }
  auto resolve = [&](const std::string& src, int at) {
    const auto it = g.signal_index_.find(src);
    if (it == g.signal_index_.end())
      throw BlockError("line " + std::to_string(at) + ": unknown signal '" + src + "'");
    return it->second;
  };

  // Producer block of each signal (SIZE_MAX for graph inputs).
  std::vector<std::size_t> producer(g.n_signals_, SIZE_MAX);
  for (std::size_t i = 0; i < declared.size(); ++i)
    for (std::size_t j = 0; j < declared[i].out_ports.size(); ++j)
      producer[declared[i].out_base + j] = i;

  for (const auto& w : wires) {
    const auto bp = block_pos.find(w.block);
    if (bp == block_pos.end())
      throw BlockError("line " + std::to_string(w.line) + ": unknown block '" + w.block + "'");
    auto& b = declared[bp->second];
    const auto port = std::find(b.in_ports.begin(), b.in_ports.end(), w.port);
    if (port == b.in_ports.end())
      throw BlockError("line " + std::to_string(w.line) + ": block '" + b.id +
                       "' has no input '" + w.port + "'");
    auto& slot = b.in_signal[port - b.in_ports.begin()];
    if (slot != SIZE_MAX)
      throw BlockError("line " + std::to_string(w.line) + ": input " + w.block + "." + w.port +
                       " wired twice");
    slot = resolve(w.src, w.line);
  }
  for (const auto& b : declared)
    for (std::size_t j = 0; j < b.in_ports.size(); ++j)
      if (b.in_signal[j] == SIZE_MAX)
        throw BlockError("input " + b.id + "." + b.in_ports[j] + " is not wired");

  // Kahn's algorithm, ties broken by declaration order.
  const std::size_t nb = declared.size();
  std::vector<std::size_t> pending(nb, 0);
  std::vector<std::vector<std::size_t>> users(nb);
  for (std::size_t i = 0; i < nb; ++i)
    for (auto s : declared[i].in_signal)
      if (producer[s] != SIZE_MAX) {
        ++pending[i];
        users[producer[s]].push_back(i);
      }
  std::vector<std::size_t> ready;
  for (std::size_t i = nb; i-- > 0;)
    if (pending[i] == 0) ready.push_back(i);
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    std::sort(ready.begin(), ready.end(), std::greater<>());
    const auto i = ready.back();
    ready.pop_back();
    order.push_back(i);
    for (auto u : users[i])
      if (--pending[u] == 0) ready.push_back(u);
  }
  if (order.size() != nb) throw BlockError("block graph contains a cycle");
  for (auto i : order) g.blocks_.push_back(declared[i]);

  for (const auto& [name, src] : outs) {
    if (std::find(g.output_names_.begin(), g.output_names_.end(), name) != g.output_names_.end())
      throw BlockError("duplicate output '" + name + "'");
    g.output_names_.push_back(name);
    g.output_signal_.push_back(resolve(src, 0));
  }
  return g;
}

BlockGraph BlockGraph::load(const std::string& path, const BlockConstants& k) {
  std::ifstream in(path);
  if (!in) throw BlockError("cannot open block graph '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), k);
}

void BlockGraph::run_block(const Block& b, std::vector<double>& sig) const {
  auto in = [&](std::size_t j) { return sig[b.in_signal[j]]; };
  double* out = sig.data() + b.out_base;
  const auto& k = k_;
  if (b.kind == "const") {
    out[0] = clip(param(b.params, "value", b.id), k);
  } else if (b.kind == "adder") {
    out[0] = adder(in(0), in(1), k);
  } else if (b.kind == "subtractor") {
    out[0] = subtractor(in(0), in(1), k);
  } else if (b.kind == "multiplier") {
    out[0] = multiplier(in(0), in(1), k);
  } else if (b.kind == "gain") {
    out[0] = gain(in(0), param(b.params, "k", b.id), k);
  } else if (b.kind == "log_amp") {
    out[0] = log_amp(k.log_transconductance * in(0), k);
  } else if (b.kind == "antilog") {
    out[0] = antilog_amp(in(0), k);
  } else if (b.kind == "comparator3") {
    const auto tol = b.params.count("tie_tol") ? b.params.at("tie_tol") : 1e-9;
    const auto c = comparator3(in(0), in(1), in(2), k, tol);
    out[0] = c.v_max;
    for (int i = 0; i < 3; ++i) out[1 + i] = c.b[i];
  } else if (b.kind == "switch") {
    out[0] = bidirectional_switch(in(0), in(1), in(2), k);
  } else if (b.kind == "softmax") {
    std::vector<double> x(b.in_ports.size());
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = in(j);
    const auto y = softmax_block(x, k);
    std::copy(y.begin(), y.end(), out);
  }
}

std::map<std::string, double> BlockGraph::evaluate(const std::map<std::string, double>& in) const {
  std::vector<double> sig(n_signals_, 0.0);
  for (const auto& name : inputs_) {
    const auto it = in.find(name);
    if (it == in.end()) throw BlockError("missing graph input '" + name + "'");
    sig[signal_index_.at(name)] = it->second;
  }
  for (const auto& b : blocks_) run_block(b, sig);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < output_names_.size(); ++i) out[output_names_[i]] = sig[output_signal_[i]];
  return out;
}

std::string_view clause_module_graph() {
  return R"(# Clause module. Inputs are literal voltages (negated literals already
# inverted), the short- and long-term memories, and the rigidity mix zeta.
# Constants are the default dynamics parameters:
#   alpha 5, beta 20, gamma 0.25, delta 0.05, epsilon 1e-3, lambda 0.1.
in v1
in v2
in v3
in xs
in xl
in zeta

block one const value=1
block eps const value=0.001
block gam const value=0.25
block del const value=0.05
block lam const value=0.1

block cmp comparator3
wire v1 cmp.v1
wire v2 cmp.v2
wire v3 cmp.v3
block c subtractor
wire one c.p
wire cmp.vmax c.m

# short-term memory rate, carried at 1/4 scale
block xs_eps adder
wire xs xs_eps.a
wire eps xs_eps.b
block c_gam subtractor
wire c c_gam.p
wire gam c_gam.m
block xs_prod multiplier
wire xs_eps xs_prod.x
wire c_gam xs_prod.y
block dxs gain k=5
wire xs_prod dxs.in

# long-term memory rate through the log-sum-exp path
# xl is held as k * xl volts, k = 0.375 / ln 10
block xl_cap gain k=0.16286043071371942
wire xl xl_cap.in
block c_lam adder
wire c c_lam.a
wire lam c_lam.b
block log_c log_amp
wire c_lam log_c.in
block sum_c adder
wire log_c sum_c.a
wire xl_cap sum_c.b
block scale_c gain k=0.18420680743952367
wire sum_c scale_c.in
block exp_c antilog
wire scale_c exp_c.in
block d_lam adder
wire del d_lam.a
wire lam d_lam.b
block log_d log_amp
wire d_lam log_d.in
block sum_d adder
wire log_d sum_d.a
wire xl_cap sum_d.b
block scale_d gain k=0.18420680743952367
wire sum_d scale_d.in
block exp_d antilog
wire scale_d exp_d.in
block lse subtractor
wire exp_c lse.p
wire exp_d lse.m
block dxl gain k=166.66666666666669
wire lse dxl.in

# voltage derivative parts; rigidity passes only for maximal literals
block one_xs subtractor
wire one one_xs.p
wire xs one_xs.m
block xs_c multiplier
wire xs xs_c.x
wire c xs_c.y

block r1 switch
wire c r1.in
wire cmp.b1 r1.cp
wire cmp.b1 r1.cm
block dv2_1 multiplier
wire one_xs dv2_1.x
wire r1 dv2_1.y
block zr1 multiplier
wire zeta zr1.x
wire dv2_1 zr1.y
block dv1_1 adder
wire xs_c dv1_1.a
wire zr1 dv1_1.b

block r2 switch
wire c r2.in
wire cmp.b2 r2.cp
wire cmp.b2 r2.cm
block dv2_2 multiplier
wire one_xs dv2_2.x
wire r2 dv2_2.y
block zr2 multiplier
wire zeta zr2.x
wire dv2_2 zr2.y
block dv1_2 adder
wire xs_c dv1_2.a
wire zr2 dv1_2.b

block r3 switch
wire c r3.in
wire cmp.b3 r3.cp
wire cmp.b3 r3.cm
block dv2_3 multiplier
wire one_xs dv2_3.x
wire r3 dv2_3.y
block zr3 multiplier
wire zeta zr3.x
wire dv2_3 zr3.y
block dv1_3 adder
wire xs_c dv1_3.a
wire zr3 dv1_3.b

out c c
out dxs dxs
out dxl dxl
out dv1_1 dv1_1
out dv1_2 dv1_2
out dv1_3 dv1_3
out dv2_1 dv2_1
out dv2_2 dv2_2
out dv2_3 dv2_3
out b1 cmp.b1
out b2 cmp.b2
out b3 cmp.b3
out vmax cmp.vmax
)";
}

ClauseModuleOut run_clause_graph(const BlockGraph& g, const std::array<double, 3>& lits, double xs,
                                 double xl, double zeta) {
  const auto o = g.evaluate(
      {{"v1", lits[0]}, {"v2", lits[1]}, {"v3", lits[2]}, {"xs", xs}, {"xl", xl}, {"zeta", zeta}});
  auto get = [&](const char* name) {
    const auto it = o.find(name);
    if (it == o.end()) throw BlockError(std::string("clause graph lacks output '") + name + "'");
    return it->second;
  };
  ClauseModuleOut r;
  r.c = get("c");
  r.dxs = 4.0 * get("dxs");
  r.dxl = get("dxl");
  r.cmp.v_max = get("vmax");
  for (int i = 0; i < 3; ++i) {
    const auto s = std::to_string(i + 1);
    r.dv1[i] = get(("dv1_" + s).c_str());
    r.dv2[i] = get(("dv2_" + s).c_str());
    r.cmp.b[i] = get(("b" + s).c_str());
  }
  return r;
}

}  // namespace dmm::circuit
