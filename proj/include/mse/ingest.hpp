#ifndef MSE_INGEST_HPP
#define MSE_INGEST_HPP

#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mse/schema.hpp"

namespace mse {

namespace detail {

inline std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Accepted missing markers: ASCII "-", the figure dash U+2012 (used by the
// source tables), and "x". The register indicator, not the symbol, decides
// between item and structural missingness.
inline bool is_missing_symbol(const std::string& s) {
  return s == "-" || s == "\xe2\x80\x92" || s == "x" || s == "X";
}

}  // namespace detail

/// Schema derived from a CSV header: capitals are register indicators,
/// lowercase letters their ethnicity variables, paired by case.
inline Schema infer_schema(const std::vector<std::string>& header) {
  Schema s;
  for (const auto& h : header) {
    if (h == "Freq") continue;
    if (h.size() != 1) throw IngestError("header column '" + h + "' is not a single-character variable name");
    const char c = h[0];
    if (std::isupper(static_cast<unsigned char>(c))) s.registers.push_back(c);
  }
  for (char r : s.registers)
    s.ethnicities.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(r))));
  s.validate();
  return s;
}

/// Read a register-linkage count table. One cell per data row; duplicate
/// patterns are rejected (the source tables are already aggregated).
inline IncompleteTable read_table(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IngestError("empty file: " + path);
  if (line.size() >= 3 && line.compare(0, 3, "\xef\xbb\xbf") == 0) line.erase(0, 3);  // BOM
  const auto header = detail::split_csv_line(line);

  const std::size_t k = schema.size();
  std::vector<int> reg_col(k, -1), eth_col(k, -1);
  int freq_col = -1;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == "Freq") { freq_col = static_cast<int>(j); continue; }
    bool known = false;
    for (std::size_t i = 0; i < k; ++i) {
      if (header[j].size() == 1 && header[j][0] == schema.registers[i]) { reg_col[i] = static_cast<int>(j); known = true; }
      if (header[j].size() == 1 && header[j][0] == schema.ethnicities[i]) { eth_col[i] = static_cast<int>(j); known = true; }
    }
    if (!known) throw IngestError("header column '" + header[j] + "' not in schema");
  }
  if (freq_col < 0) throw IngestError("missing Freq column in " + path);
  for (std::size_t i = 0; i < k; ++i)
    if (reg_col[i] < 0 || eth_col[i] < 0)
      throw IngestError(std::string("schema variable '") + schema.registers[i] + "'/'" + schema.ethnicities[i] + "' not in header");

  IncompleteTable table;
  table.schema = schema;
  std::map<std::pair<std::vector<std::uint8_t>, std::vector<Eth>>, bool> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    const auto fail = [&](const std::string& what) {
      throw IngestError(path + ":" + std::to_string(lineno) + ": " + what);
    };
    if (fields.size() != header.size()) fail("wrong field count");

    CellPattern p;
    p.reg_in.resize(k);
    p.eth.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      const std::string& rv = fields[reg_col[i]];
      if (rv == "0") p.reg_in[i] = 0;
      else if (rv == "1") p.reg_in[i] = 1;
      else fail("register indicator must be 0 or 1, got '" + rv + "'");

      const std::string& ev = fields[eth_col[i]];
      if (p.reg_in[i] == 0) {
        // Out of the register: ethnicity undefined, whatever the symbol says.
        if (ev == "0" || ev == "1")
          fail(std::string("register ") + schema.registers[i] + "=0 cannot carry an observed ethnicity");
        if (!detail::is_missing_symbol(ev)) fail("unknown ethnicity symbol '" + ev + "'");
        p.eth[i] = Eth::StructMissing;
      } else if (ev == "0") {
        p.eth[i] = Eth::NonMaori;
      } else if (ev == "1") {
        p.eth[i] = Eth::Maori;
      } else if (detail::is_missing_symbol(ev)) {
        p.eth[i] = Eth::ItemMissing;
      } else {
        fail("unknown ethnicity symbol '" + ev + "'");
      }
    }

    const std::string& fv = fields[freq_col];
    double count = 0;
    try {
      std::size_t pos = 0;
      count = std::stod(fv, &pos);
      if (pos != fv.size()) throw std::invalid_argument(fv);
    } catch (const std::exception&) {
      fail("malformed count '" + fv + "'");
    }
    if (count < 0) fail("negative count");

    auto key = std::make_pair(p.reg_in, p.eth);
    if (seen.count(key)) fail("duplicate cell pattern");
    seen.emplace(std::move(key), true);
    table.patterns.push_back(std::move(p));
    table.counts.push_back(count);
  }
  if (table.patterns.empty()) throw IngestError("no data rows in " + path);
  table.validate();
  return table;
}

inline IncompleteTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IngestError("empty file: " + path);
  if (line.size() >= 3 && line.compare(0, 3, "\xef\xbb\xbf") == 0) line.erase(0, 3);
  return read_table(path, infer_schema(detail::split_csv_line(line)));
}

inline void write_table(const IncompleteTable& table, std::ostream& out) {
  const Schema& s = table.schema;
  out.precision(17);  // keep large counts exact, avoid scientific notation
  for (std::size_t i = 0; i < s.size(); ++i) out << s.registers[i] << ',';
  for (std::size_t i = 0; i < s.size(); ++i) out << s.ethnicities[i] << ',';
  out << "Freq\n";
  for (std::size_t r = 0; r < table.patterns.size(); ++r) {
    const CellPattern& p = table.patterns[r];
    for (std::size_t i = 0; i < s.size(); ++i) out << int(p.reg_in[i]) << ',';
    for (std::size_t i = 0; i < s.size(); ++i) {
      switch (p.eth[i]) {
        case Eth::NonMaori: out << '0'; break;
        case Eth::Maori: out << '1'; break;
        case Eth::ItemMissing: out << '-'; break;
        case Eth::StructMissing: out << 'x'; break;
      }
      out << ',';
    }
    out << table.counts[r] << '\n';
  }
}

/// Per-register counts of {non-Maori, Maori, item missing, not in register};
/// each column sums to the observed population size n.
struct MarginalSummary {
  std::vector<char> registers;
  std::vector<std::array<double, 4>> counts;  // [register][Eth]
};

inline MarginalSummary marginal_summary(const IncompleteTable& table) {
  MarginalSummary m;
  m.registers = table.schema.registers;
  m.counts.assign(table.schema.size(), {0, 0, 0, 0});
  for (std::size_t r = 0; r < table.patterns.size(); ++r)
    for (std::size_t i = 0; i < table.schema.size(); ++i)
      m.counts[i][static_cast<int>(table.patterns[r].eth[i])] += table.counts[r];
  return m;
}

}  // namespace mse

#endif  // MSE_INGEST_HPP
