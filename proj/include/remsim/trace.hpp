#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace remsim {

using RegId = std::uint8_t;
inline constexpr RegId kNoReg = 0xFF;

enum class OpClass : std::uint8_t {
  IADD, IMUL, LOGIC, SHIFT, MOVE, SIGNEXT, LOAD, STORE, BRANCH, FP, OTHER,
  MAP  // chain-internal only, never appears in a trace file
};

const char* opclass_name(OpClass c);
std::optional<OpClass> opclass_from_name(const std::string& s);

struct MicroOp {
  std::uint64_t seq = 0;
  std::uint64_t pc = 0;
  OpClass op = OpClass::IADD;
  RegId dst = kNoReg;
  std::array<RegId, 2> src{kNoReg, kNoReg};
  std::optional<std::int64_t> imm;
  std::optional<std::uint64_t> vaddr;
  std::optional<bool> taken;

  bool is_load() const { return op == OpClass::LOAD; }
  bool is_store() const { return op == OpClass::STORE; }
  bool is_mem() const { return is_load() || is_store(); }
  bool operator==(const MicroOp&) const = default;
};

// Sparse 8-byte word memory image. Unwritten words read as zero.
class MemoryImage {
 public:
  static std::uint64_t align(std::uint64_t a) { return a & ~std::uint64_t{7}; }
  std::uint64_t read(std::uint64_t addr) const;
  void write(std::uint64_t addr, std::uint64_t value);
  const std::map<std::uint64_t, std::uint64_t>& words() const { return words_; }
  bool operator==(const MemoryImage&) const = default;

 private:
  std::map<std::uint64_t, std::uint64_t> words_;
};

struct Trace {
  std::vector<MicroOp> ops;
  unsigned arch_reg_count = 16;
  std::uint64_t page_size = 4096;
  std::vector<std::uint64_t> init_regs;  // size arch_reg_count once normalized
  MemoryImage memory;

  void normalize() { init_regs.resize(arch_reg_count, 0); }
};

struct ParseError : std::runtime_error {
  std::size_t line;
  ParseError(std::size_t l, const std::string& what)
      : std::runtime_error("line " + std::to_string(l) + ": " + what), line(l) {}
};

struct InvariantError : std::runtime_error {
  std::uint64_t seq;
  InvariantError(std::uint64_t s, const std::string& what)
      : std::runtime_error("seq " + std::to_string(s) + ": " + what), seq(s) {}
};

// Throws InvariantError on the first violating op.
void validate_trace(const Trace& t);

Trace parse_trace(const std::string& text);
Trace load_trace(const std::string& path);
std::string format_trace(const Trace& t);
void store_trace(const Trace& t, const std::string& path);

// ---- value semantics shared by the core, the EMC and the interpreters ----

struct OpResult {
  std::uint64_t value = 0;      // destination value (or store data)
  std::uint64_t address = 0;    // effective address for LOAD/STORE
  bool branch_taken = false;
};

// s0/s1 are zero when the source is absent. LOAD results carry the address
// only; the caller supplies the loaded value.
OpResult evaluate(const MicroOp& op, std::uint64_t s0, std::uint64_t s1);

// ---- generators ----

struct PointerChaseParams {
  std::uint64_t n_nodes = 1024;
  std::uint64_t footprint = 4ull << 20;
  std::uint64_t chain_gap = 0;
  std::uint64_t seed = 1;
  std::uint64_t iterations = 0;  // 0 = n_nodes
  std::uint64_t page_size = 4096;
};

struct LinkedListParams {
  std::uint64_t n_nodes = 1024;
  std::uint64_t node_stride = 64;
  std::uint64_t seed = 1;
  std::uint64_t steps = 0;  // 0 = n_nodes
  std::uint64_t page_size = 4096;
  std::uint64_t work = 0;  // independent ALU ops per step
  std::uint64_t cluster = 1;  // consecutive visits drawn from one block of cluster nodes
};

struct StreamParams {
  std::uint64_t lines = 1024;
  std::uint64_t stride = 64;
  std::uint64_t page_size = 4096;
  std::uint64_t work = 0;  // independent ALU ops per element
};

Trace gen_pointer_chase(const PointerChaseParams& p);
Trace gen_linked_list(const LinkedListParams& p);
Trace gen_stream(const StreamParams& p);

// Deterministic RNG helpers (fixed algorithms so outputs do not depend on the
// standard library implementation).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : s_(seed ^ 0x9E3779B97F4A7C15ull) {}
  std::uint64_t next();
  std::uint64_t below(std::uint64_t n) { return n ? next() % n : 0; }
  double unit() { return double(next() >> 11) * (1.0 / 9007199254740992.0); }

 private:
  std::uint64_t s_;
};

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace remsim
