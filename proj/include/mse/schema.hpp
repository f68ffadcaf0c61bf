#ifndef MSE_SCHEMA_HPP
#define MSE_SCHEMA_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mse {

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// State of one ethnicity variable in an observed cell pattern.
enum class Eth : std::uint8_t {
  NonMaori = 0,
  Maori = 1,
  ItemMissing = 2,    // in the register, ethnicity not recorded ("-")
  StructMissing = 3,  // not in the register, ethnicity undefined ("x")
};

/// Register indicators (capitals) paired one-to-one with their ethnicity
/// variables (lowercase). Variable names are single characters so that
/// bracket formulas like "[Ac][ac][Ca]" stay unambiguous.
struct Schema {
  std::vector<char> registers;
  std::vector<char> ethnicities;

  static Schema paired(std::string_view regs) {
    Schema s;
    for (char r : regs) {
      s.registers.push_back(r);
      s.ethnicities.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(r))));
    }
    s.validate();
    return s;
  }

  std::size_t size() const { return registers.size(); }

  int register_index(char name) const {
    for (std::size_t i = 0; i < registers.size(); ++i)
      if (registers[i] == name) return static_cast<int>(i);
    return -1;
  }

  void validate() const {
    if (registers.size() != ethnicities.size() || registers.size() < 2)
      throw ModelError("schema requires >= 2 paired register/ethnicity variables");
    std::vector<char> all(registers);
    all.insert(all.end(), ethnicities.begin(), ethnicities.end());
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) != all.end())
      throw ModelError("schema variable names must be unique (case-sensitive)");
  }
};

/// One observed cell: in/out per register plus the state of each ethnicity
/// variable. A register that is out forces its ethnicity to StructMissing.
struct CellPattern {
  std::vector<std::uint8_t> reg_in;  // 0/1 per register
  std::vector<Eth> eth;              // per ethnicity variable

  bool operator==(const CellPattern&) const = default;

  bool any_register_in() const {
    return std::any_of(reg_in.begin(), reg_in.end(), [](std::uint8_t b) { return b != 0; });
  }

  void validate(const Schema& schema) const {
    if (reg_in.size() != schema.size() || eth.size() != schema.size())
      throw ModelError("pattern arity does not match schema");
    if (!any_register_in())
      throw ModelError("the all-registers-out cell is never observed");
    for (std::size_t i = 0; i < reg_in.size(); ++i) {
      const bool out = reg_in[i] == 0;
      if (out != (eth[i] == Eth::StructMissing))
        throw ModelError("register out must coincide with structurally missing ethnicity");
    }
  }
};

/// Observed register-linkage contingency table with person counts.
struct IncompleteTable {
  Schema schema;
  std::vector<CellPattern> patterns;
  std::vector<double> counts;

  double total() const {
    double n = 0;
    for (double c : counts) n += c;
    return n;
  }

  void validate() const {
    schema.validate();
    if (patterns.size() != counts.size()) throw ModelError("pattern/count size mismatch");
    for (std::size_t i = 0; i < patterns.size(); ++i) {
      patterns[i].validate(schema);
      if (counts[i] < 0) throw ModelError("negative count");
      for (std::size_t j = i + 1; j < patterns.size(); ++j)
        if (patterns[i] == patterns[j]) throw ModelError("duplicate cell pattern");
    }
    if (total() <= 0) throw ModelError("empty table");
  }
};

/// The completed binary cell space: registers, ethnicities and optional
/// latent class variables, one bit each. Cell index bit v carries the value
/// of variable v; registers occupy the low bits.
struct CellSpace {
  std::vector<char> names;  // registers..., ethnicities..., latents...
  int n_registers = 0;

  static CellSpace from(const Schema& schema, std::string_view latents = "") {
    CellSpace sp;
    sp.names.assign(schema.registers.begin(), schema.registers.end());
    sp.names.insert(sp.names.end(), schema.ethnicities.begin(), schema.ethnicities.end());
    for (char l : latents) sp.names.push_back(l);
    sp.n_registers = static_cast<int>(schema.size());
    return sp;
  }

  int n_vars() const { return static_cast<int>(names.size()); }
  int n_latents() const { return n_vars() - 2 * n_registers; }
  std::size_t n_cells() const { return std::size_t{1} << n_vars(); }

  static int bit(std::size_t cell, int v) { return static_cast<int>((cell >> v) & 1u); }

  int register_var(int i) const { return i; }
  int ethnicity_var(int i) const { return n_registers + i; }
  int latent_var(int i) const { return 2 * n_registers + i; }

  int index_of(char name) const {
    for (int v = 0; v < n_vars(); ++v)
      if (names[v] == name) return v;
    return -1;
  }

  bool all_registers_out(std::size_t cell) const {
    for (int i = 0; i < n_registers; ++i)
      if (bit(cell, i)) return false;
    return true;
  }

  /// Mask of structurally unobservable cells (all registers out).
  std::vector<char> structural_zeros() const {
    std::vector<char> sz(n_cells(), 0);
    for (std::size_t c = 0; c < n_cells(); ++c)
      if (all_registers_out(c)) sz[c] = 1;
    return sz;
  }

  /// Completed cells compatible with an observed pattern: register bits must
  /// match, recorded ethnicities must match, missing ethnicities and latent
  /// variables range freely.
  std::vector<std::int32_t> compatible_cells(const CellPattern& p) const {
    std::vector<std::int32_t> out;
    for (std::size_t c = 0; c < n_cells(); ++c) {
      bool ok = true;
      for (int i = 0; i < n_registers && ok; ++i)
        ok = bit(c, register_var(i)) == p.reg_in[i];
      for (int i = 0; i < n_registers && ok; ++i) {
        const Eth e = p.eth[i];
        if (e == Eth::NonMaori || e == Eth::Maori)
          ok = bit(c, ethnicity_var(i)) == static_cast<int>(e);
      }
      if (ok) out.push_back(static_cast<std::int32_t>(c));
    }
    if (out.empty()) throw ModelError("observed pattern has no compatible completed cell");
    return out;
  }
};

}  // namespace mse

#endif  // MSE_SCHEMA_HPP
