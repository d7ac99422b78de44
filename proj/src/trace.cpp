#include "remsim/trace.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace remsim {

namespace {
constexpr const char* kNames[] = {"IADD", "IMUL", "LOGIC", "SHIFT", "MOVE", "SIGNEXT",
                                  "LOAD", "STORE", "BRANCH", "FP", "OTHER", "MAP"};
}

const char* opclass_name(OpClass c) { return kNames[static_cast<int>(c)]; }

std::optional<OpClass> opclass_from_name(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(OpClass::OTHER); ++i)
    if (s == kNames[i]) return static_cast<OpClass>(i);
  return std::nullopt;
}

std::uint64_t MemoryImage::read(std::uint64_t addr) const {
  auto it = words_.find(align(addr));
  return it == words_.end() ? 0 : it->second;
}

void MemoryImage::write(std::uint64_t addr, std::uint64_t value) {
  if (value == 0)
    words_.erase(align(addr));
  else
    words_[align(addr)] = value;
}

std::uint64_t Rng::next() {
  // splitmix64
  std::uint64_t z = (s_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void validate_trace(const Trace& t) {
  bool first = true;
  std::uint64_t prev = 0;
  for (const auto& op : t.ops) {
    if (op.op == OpClass::MAP) throw InvariantError(op.seq, "MAP is not a trace opclass");
    if (!first && op.seq <= prev) throw InvariantError(op.seq, "seq not strictly increasing");
    first = false;
    prev = op.seq;
    if (op.is_mem() != op.vaddr.has_value())
      throw InvariantError(op.seq, op.is_mem() ? "memory op without vaddr" : "vaddr on non-memory op");
    bool br = op.op == OpClass::BRANCH;
    if (br != op.taken.has_value())
      throw InvariantError(op.seq, br ? "branch without direction" : "direction on non-branch");
    if ((br || op.is_store()) && op.dst != kNoReg)
      throw InvariantError(op.seq, "branch/store with a destination");
    if (!br && !op.is_store() && op.dst == kNoReg)
      throw InvariantError(op.seq, "missing destination");
    for (RegId r : {op.dst, op.src[0], op.src[1]})
      if (r != kNoReg && r >= t.arch_reg_count) throw InvariantError(op.seq, "register out of range");
  }
}

// ---------------------------------------------------------------- parsing

namespace {

bool parse_u64(const std::string& s, std::uint64_t& out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    out = std::stoull(s, &pos, 0);
    return pos == s.size() && s[0] != '-';
  } catch (...) {
    return false;
  }
}

bool parse_i64(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  bool neg = s[0] == '-';
  std::uint64_t mag;
  if (!parse_u64(neg ? s.substr(1) : s, mag)) return false;
  out = neg ? -static_cast<std::int64_t>(mag) : static_cast<std::int64_t>(mag);
  return true;
}

bool parse_reg(const std::string& s, RegId& out) {
  if (s == "-") {
    out = kNoReg;
    return true;
  }
  std::string body = (s.size() > 1 && (s[0] == 'r' || s[0] == 'R')) ? s.substr(1) : s;
  std::uint64_t v;
  if (!parse_u64(body, v) || v >= kNoReg) return false;
  out = static_cast<RegId>(v);
  return true;
}

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%" PRIx64, v);
  return buf;
}

std::string signed_hex(std::int64_t v) {
  if (v < 0) return "-" + hex(static_cast<std::uint64_t>(0) - static_cast<std::uint64_t>(v));
  return hex(static_cast<std::uint64_t>(v));
}

std::string reg(RegId r) { return r == kNoReg ? "-" : "r" + std::to_string(r); }

}  // namespace

Trace parse_trace(const std::string& text) {
  Trace t;
  std::vector<std::pair<RegId, std::uint64_t>> regs;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string w; ls >> w;) tok.push_back(w);
    if (tok.empty()) continue;
    if (tok[0].rfind("#!", 0) == 0) {
      const std::string& d = tok[0];
      std::uint64_t a = 0, b = 0;
      if (d == "#!remsim-trace") continue;
      if (d == "#!regs" && tok.size() == 2 && parse_u64(tok[1], a) && a > 0 && a < kNoReg) {
        t.arch_reg_count = static_cast<unsigned>(a);
      } else if (d == "#!page" && tok.size() == 2 && parse_u64(tok[1], a) && a > 0) {
        t.page_size = a;
      } else if (d == "#!mem" && tok.size() == 3 && parse_u64(tok[1], a) && parse_u64(tok[2], b)) {
        t.memory.write(a, b);
      } else if (d == "#!reg" && tok.size() == 3 && parse_u64(tok[2], b)) {
        RegId r;
        if (!parse_reg(tok[1], r) || r == kNoReg) throw ParseError(lineno, "bad register in #!reg");
        regs.emplace_back(r, b);
      } else {
        throw ParseError(lineno, "malformed directive '" + d + "'");
      }
      continue;
    }
    if (tok[0][0] == '#') continue;
    if (tok.size() != 9) throw ParseError(lineno, "expected 9 fields, got " + std::to_string(tok.size()));
    MicroOp op;
    if (!parse_u64(tok[0], op.seq)) throw ParseError(lineno, "bad seq");
    if (!parse_u64(tok[1], op.pc)) throw ParseError(lineno, "bad pc");
    auto oc = opclass_from_name(tok[2]);
    if (!oc) throw ParseError(lineno, "unknown opclass '" + tok[2] + "'");
    op.op = *oc;
    if (!parse_reg(tok[3], op.dst) || !parse_reg(tok[4], op.src[0]) || !parse_reg(tok[5], op.src[1]))
      throw ParseError(lineno, "bad register field");
    if (tok[6] != "-") {
      std::int64_t v;
      if (!parse_i64(tok[6], v)) throw ParseError(lineno, "bad imm");
      op.imm = v;
    }
    if (tok[7] != "-") {
      std::uint64_t v;
      if (!parse_u64(tok[7], v)) throw ParseError(lineno, "bad vaddr");
      op.vaddr = v;
    }
    if (tok[8] != "-") {
      if (tok[8] != "0" && tok[8] != "1") throw ParseError(lineno, "bad taken flag");
      op.taken = tok[8] == "1";
    }
    t.ops.push_back(op);
  }
  t.normalize();
  for (auto [r, v] : regs) {
    if (r >= t.arch_reg_count) throw ParseError(0, "#!reg register out of range");
    t.init_regs[r] = v;
  }
  validate_trace(t);
  return t;
}

Trace load_trace(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open trace '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_trace(ss.str());
}

std::string format_trace(const Trace& t) {
  std::string out;
  out.reserve(t.ops.size() * 40 + t.memory.words().size() * 32 + 64);
  out += "#!remsim-trace 1\n";
  out += "#!regs " + std::to_string(t.arch_reg_count) + "\n";
  out += "#!page " + std::to_string(t.page_size) + "\n";
  for (std::size_t r = 0; r < t.init_regs.size(); ++r)
    if (t.init_regs[r]) out += "#!reg r" + std::to_string(r) + " " + hex(t.init_regs[r]) + "\n";
  for (auto [a, v] : t.memory.words()) out += "#!mem " + hex(a) + " " + hex(v) + "\n";
  for (const auto& op : t.ops) {
    out += std::to_string(op.seq);
    out += ' ';
    out += hex(op.pc);
    out += ' ';
    out += opclass_name(op.op);
    out += ' ';
    out += reg(op.dst);
    out += ' ';
    out += reg(op.src[0]);
    out += ' ';
    out += reg(op.src[1]);
    out += ' ';
    out += op.imm ? signed_hex(*op.imm) : "-";
    out += ' ';
    out += op.vaddr ? hex(*op.vaddr) : "-";
    out += ' ';
    out += op.taken ? (*op.taken ? "1" : "0") : "-";
    out += '\n';
  }
  return out;
}

void store_trace(const Trace& t, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write trace '" + path + "'");
  f << format_trace(t);
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------- semantics

OpResult evaluate(const MicroOp& op, std::uint64_t s0, std::uint64_t s1) {
  OpResult r;
  const std::uint64_t imm = static_cast<std::uint64_t>(op.imm.value_or(0));
  switch (op.op) {
    case OpClass::IADD:
    case OpClass::FP:
    case OpClass::OTHER:
      r.value = s0 + s1 + imm;
      break;
    case OpClass::IMUL:
      r.value = s0 * (op.src[1] != kNoReg ? s1 : imm);
      break;
    case OpClass::LOGIC:
      r.value = s0 ^ s1 ^ imm;
      break;
    case OpClass::SHIFT: {
      std::int64_t sh = op.imm.value_or(0);
      if (op.src[1] != kNoReg) sh = static_cast<std::int64_t>(s1 & 63);
      r.value = sh >= 0 ? s0 << (sh & 63) : s0 >> ((-sh) & 63);
      break;
    }
    case OpClass::MOVE:
    case OpClass::MAP:
      r.value = op.src[0] != kNoReg ? s0 : imm;
      break;
    case OpClass::SIGNEXT:
      r.value = static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int32_t>(s0 & 0xFFFFFFFFu)));
      break;
    case OpClass::LOAD:
      r.address = s0 + s1 + imm;
      break;
    case OpClass::STORE:
      r.address = s0 + imm;
      r.value = s1;
      break;
    case OpClass::BRANCH:
      r.branch_taken = op.src[1] != kNoReg ? s0 != s1 : s0 != 0;
      break;
  }
  return r;
}

// ---------------------------------------------------------------- generators

namespace {

MicroOp mk(OpClass c, std::uint64_t pc, RegId dst, RegId s0, RegId s1, std::optional<std::int64_t> imm = {}) {
  MicroOp op;
  op.op = c;
  op.pc = pc;
  op.dst = dst;
  op.src = {s0, s1};
  op.imm = imm;
  return op;
}

// Appends op with the next seq, computing vaddr/taken from the running
// register file so generated traces are value-consistent.
struct Emitter {
  Trace& t;
  std::vector<std::uint64_t> regs;
  explicit Emitter(Trace& tr) : t(tr), regs(tr.init_regs) {}

  void emit(MicroOp op) {
    op.seq = t.ops.size();
    auto val = [&](RegId r) { return r == kNoReg ? 0 : regs[r]; };
    OpResult res = evaluate(op, val(op.src[0]), val(op.src[1]));
    if (op.is_load()) {
      op.vaddr = res.address;
      regs[op.dst] = t.memory.read(res.address);
    } else if (op.is_store()) {
      op.vaddr = res.address;
      t.memory.write(res.address, res.value);
    } else if (op.op == OpClass::BRANCH) {
      op.taken = res.branch_taken;
    } else {
      regs[op.dst] = res.value;
    }
    t.ops.push_back(op);
  }
};

constexpr std::uint64_t kLine = 64;

}  // namespace

Trace gen_pointer_chase(const PointerChaseParams& p) {
  if (p.footprint < kLine) throw std::invalid_argument("footprint smaller than one cache line");
  if (p.n_nodes < 1) throw std::invalid_argument("n_nodes must be >= 1");
  const std::uint64_t lines = p.footprint / kLine;
  if (p.n_nodes > lines) throw std::invalid_argument("footprint too small for n_nodes");
  if (p.page_size == 0) throw std::invalid_argument("page_size must be > 0");
  const std::uint64_t iters = p.iterations ? p.iterations : p.n_nodes;

  Rng rng(p.seed);
  // distinct line slots for the nodes: partial Fisher-Yates over a sparse map
  std::vector<std::uint64_t> node_addr(p.n_nodes);
  {
    std::map<std::uint64_t, std::uint64_t> swapped;
    auto at = [&](std::uint64_t i) {
      auto it = swapped.find(i);
      return it == swapped.end() ? i : it->second;
    };
    for (std::uint64_t i = 0; i < p.n_nodes; ++i) {
      std::uint64_t j = i + rng.below(lines - i);
      std::uint64_t vi = at(i), vj = at(j);
      swapped[i] = vj;
      swapped[j] = vi;
      node_addr[i] = 0x10000000ull + vj * kLine;
    }
  }
  std::vector<std::uint64_t> order(p.n_nodes);
  for (std::uint64_t i = 0; i < p.n_nodes; ++i) order[i] = i;
  shuffle(order, rng);

  Trace t;
  t.page_size = p.page_size;
  t.normalize();
  const std::uint64_t index_base = 0x80000000ull;
  for (std::uint64_t i = 0; i < iters; ++i) t.memory.write(index_base + 8 * i, node_addr[order[i % p.n_nodes]]);
  for (std::uint64_t i = 0; i < p.n_nodes; ++i) t.memory.write(node_addr[i] + 0x18, (rng.next() | 1));
  t.init_regs[8] = index_base - 8;

  Emitter e(t);
  const std::uint64_t pc0 = 0x400000;
  for (std::uint64_t i = 0; i < iters; ++i) {
    e.emit(mk(OpClass::IADD, pc0 + 0x0, 8, 8, kNoReg, 8));
    e.emit(mk(OpClass::LOAD, pc0 + 0x4, 1, 8, kNoReg));
    e.emit(mk(OpClass::IADD, pc0 + 0x8, 12, 1, kNoReg, 0x18));
    e.emit(mk(OpClass::LOAD, pc0 + 0xc, 10, 12, kNoReg));
    for (std::uint64_t k = 0; k < p.chain_gap; ++k) {
      RegId r = static_cast<RegId>(13 + k % 3);
      e.emit(mk(OpClass::IADD, pc0 + 0x10 + 4 * k, r, r, kNoReg, 1));
    }
  }
  return t;
}

Trace gen_linked_list(const LinkedListParams& p) {
  if (p.n_nodes < 2) throw std::invalid_argument("n_nodes must be >= 2");
  if (p.node_stride < 8) throw std::invalid_argument("node_stride must be >= 8");
  if (p.page_size == 0) throw std::invalid_argument("page_size must be > 0");
  const std::uint64_t steps = p.steps ? p.steps : p.n_nodes;

  if (p.cluster == 0 || p.n_nodes % p.cluster != 0) throw std::invalid_argument("cluster must divide n_nodes");
  Rng rng(p.seed);
  std::vector<std::uint64_t> slot(p.n_nodes), visit(p.n_nodes);
  for (std::uint64_t i = 0; i < p.n_nodes; ++i) slot[i] = visit[i] = i;
  if (p.cluster == 1) {
    shuffle(slot, rng);
    shuffle(visit, rng);
  } else {
    // Runs of `cluster` consecutive visits stay inside one contiguous block.
    std::vector<std::uint64_t> blocks(p.n_nodes / p.cluster);
    for (std::uint64_t b = 0; b < blocks.size(); ++b) blocks[b] = b;
    shuffle(blocks, rng);
    std::vector<std::uint64_t> inner(p.cluster);
    std::uint64_t k = 0;
    for (std::uint64_t b : blocks) {
      for (std::uint64_t j = 0; j < p.cluster; ++j) inner[j] = b * p.cluster + j;
      shuffle(inner, rng);
      for (std::uint64_t n : inner) visit[k++] = n;
    }
  }
  const std::uint64_t base = 0x40000000ull;
  auto addr = [&](std::uint64_t node) { return base + slot[node] * p.node_stride; };

  Trace t;
  t.page_size = p.page_size;
  t.normalize();
  for (std::uint64_t k = 0; k < p.n_nodes; ++k) t.memory.write(addr(visit[k]), addr(visit[(k + 1) % p.n_nodes]));
  t.init_regs[1] = addr(visit[0]);

  Emitter e(t);
  const std::uint64_t pc0 = 0x500000;
  for (std::uint64_t i = 0; i < steps; ++i) {
    e.emit(mk(OpClass::LOAD, pc0 + 0x0, 1, 1, kNoReg));
    e.emit(mk(OpClass::BRANCH, pc0 + 0x4, kNoReg, 1, kNoReg));
    for (std::uint64_t k = 0; k < p.work; ++k) {
      RegId r = static_cast<RegId>(13 + k % 3);
      e.emit(mk(OpClass::IADD, pc0 + 0x8 + 4 * k, r, r, kNoReg, 1));
    }
  }
  return t;
}

Trace gen_stream(const StreamParams& p) {
  if (p.stride % 8 != 0) throw std::invalid_argument("stride must be a multiple of 8");
  if (p.page_size == 0) throw std::invalid_argument("page_size must be > 0");
  Trace t;
  t.page_size = p.page_size;
  t.normalize();
  t.init_regs[2] = 0x60000000ull;
  Emitter e(t);
  const std::uint64_t pc0 = 0x600000;
  for (std::uint64_t i = 0; i < p.lines; ++i) {
    e.emit(mk(OpClass::LOAD, pc0 + 0x0, 1, 2, kNoReg));
    e.emit(mk(OpClass::IADD, pc0 + 0x4, 2, 2, kNoReg, static_cast<std::int64_t>(p.stride)));
    for (std::uint64_t k = 0; k < p.work; ++k) {
      RegId r = static_cast<RegId>(13 + k % 3);
      e.emit(mk(OpClass::IADD, pc0 + 0x8 + 4 * k, r, r, kNoReg, 1));
    }
  }
  return t;
}

}  // namespace remsim
