#ifndef MSE_FORMULA_HPP
#define MSE_FORMULA_HPP

#include <Eigen/Dense>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mse/schema.hpp"

namespace mse {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " (at position " + std::to_string(position) + ")"),
        position(position) {}
  std::size_t position;
};

/// Interaction term: sorted variable indices into a CellSpace. Empty = intercept.
using Term = std::vector<int>;

inline std::string term_name(const Term& t, const CellSpace& space) {
  if (t.empty()) return "(Intercept)";
  std::string s;
  for (int v : t) s.push_back(space.names[v]);
  return s;
}

/// Hierarchical model: maximal terms as written plus their subset closure.
/// Expanded terms are kept in canonical order (size, then lexicographic by
/// variable index) with the intercept first.
struct ModelFormula {
  std::vector<Term> maximal;
  std::vector<Term> expanded;

  bool operator==(const ModelFormula&) const = default;
};

namespace detail {

inline std::vector<Term> hierarchical_closure(const std::vector<Term>& maximal) {
  std::set<Term> terms;
  terms.insert(Term{});
  for (const Term& m : maximal) {
    const std::size_t n = m.size();
    for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
      Term t;
      for (std::size_t j = 0; j < n; ++j)
        if (mask & (std::size_t{1} << j)) t.push_back(m[j]);
      terms.insert(std::move(t));
    }
  }
  std::vector<Term> out(terms.begin(), terms.end());
  std::sort(out.begin(), out.end(), [](const Term& a, const Term& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  return out;
}

}  // namespace detail

/// Parse bracket notation, e.g. "[Ac][ac][Ca]". Case-sensitive; whitespace
/// inside and between brackets is ignored.
inline ModelFormula parse_formula(std::string_view text, const CellSpace& space) {
  std::vector<Term> maximal;
  std::size_t i = 0;
  const auto skip_ws = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  };
  skip_ws();
  if (i == text.size()) throw ParseError("empty formula", 0);
  while (i < text.size()) {
    if (text[i] != '[') throw ParseError("expected '['", i);
    const std::size_t open = i++;
    Term t;
    for (;;) {
      skip_ws();
      if (i == text.size()) throw ParseError("unbalanced bracket", open);
      if (text[i] == ']') break;
      const int v = space.index_of(text[i]);
      if (v < 0) throw ParseError(std::string("unknown variable '") + text[i] + "'", i);
      if (std::find(t.begin(), t.end(), v) != t.end())
        throw ParseError(std::string("repeated variable '") + text[i] + "' in term", i);
      t.push_back(v);
      ++i;
    }
    ++i;  // ']'
    if (t.empty()) throw ParseError("empty bracket", open);
    std::sort(t.begin(), t.end());
    maximal.push_back(std::move(t));
    skip_ws();
  }
  ModelFormula f;
  f.maximal = std::move(maximal);
  f.expanded = detail::hierarchical_closure(f.maximal);
  return f;
}

/// Emit maximal terms in canonical order; parse(render(f)) == canonical(f).
inline std::string render_formula(const ModelFormula& f, const CellSpace& space) {
  std::vector<Term> maximal = f.maximal;
  std::sort(maximal.begin(), maximal.end(), [](const Term& a, const Term& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  std::string s;
  for (const Term& t : maximal) {
    s.push_back('[');
    for (int v : t) s.push_back(space.names[v]);
    s.push_back(']');
  }
  return s;
}

struct EstimabilityIssue {
  Term term;
  enum Rule { OwnEthnicityPair, AllRegisters } rule;
};

/// A term is inestimable if it joins a register with its own ethnicity
/// variable, or if it contains every register indicator jointly (the
/// all-out margin is structurally unobserved).
inline std::vector<EstimabilityIssue> inestimable_terms(const ModelFormula& f,
                                                        const CellSpace& space) {
  std::vector<EstimabilityIssue> issues;
  for (const Term& t : f.expanded) {
    bool own_pair = false;
    int regs = 0;
    for (int v : t) {
      if (v < space.n_registers) {
        ++regs;
        if (std::find(t.begin(), t.end(), space.ethnicity_var(v)) != t.end()) own_pair = true;
      }
    }
    if (own_pair)
      issues.push_back({t, EstimabilityIssue::OwnEthnicityPair});
    else if (regs == space.n_registers && space.n_registers > 0)
      issues.push_back({t, EstimabilityIssue::AllRegisters});
  }
  return issues;
}

inline void require_estimable(const ModelFormula& f, const CellSpace& space) {
  const auto issues = inestimable_terms(f, space);
  if (!issues.empty()) {
    std::string msg = "inestimable term";
    for (const auto& is : issues) msg += " " + term_name(is.term, space);
    throw ModelError(msg);
  }
}

/// The maximal estimable hierarchical model for a schema: every k-variable
/// subset of registers and ethnicities that passes the estimability rules.
/// k = 2: [Ac][Ca][ac]; k = 3 adds the three-register pattern, and so on.
inline ModelFormula maximal_formula(const CellSpace& space) {
  const int k = space.n_registers;
  const int nv = 2 * k;
  std::vector<Term> maximal;
  for (std::size_t mask = 0; mask < (std::size_t{1} << nv); ++mask) {
    Term t;
    for (int v = 0; v < nv; ++v)
      if (mask & (std::size_t{1} << v)) t.push_back(v);
    if (static_cast<int>(t.size()) != k) continue;
    bool ok = true;
    int regs = 0;
    for (int v : t) {
      if (v < k) {
        ++regs;
        if (std::find(t.begin(), t.end(), space.ethnicity_var(v)) != t.end()) ok = false;
      }
    }
    if (ok && regs < k) maximal.push_back(std::move(t));
  }
  ModelFormula f;
  f.maximal = std::move(maximal);
  f.expanded = detail::hierarchical_closure(f.maximal);
  return f;
}

/// Treatment-coded design over the completed cell space plus the margin
/// bookkeeping IPF needs. Entry (cell, term) is 1 iff every variable of the
/// term equals 1 in that cell.
struct ModelMatrix {
  std::vector<std::string> term_names;
  std::vector<Term> terms;
  Eigen::MatrixXd design;  // n_cells x n_terms
  // Per maximal term: group id of each cell under the term's variables.
  std::vector<std::vector<std::int32_t>> margin_gid;
  std::vector<int> margin_groups;
};

inline ModelMatrix build_design(const ModelFormula& f, const CellSpace& space) {
  require_estimable(f, space);
  const std::size_t n = space.n_cells();
  ModelMatrix m;
  m.terms = f.expanded;
  m.design.resize(n, static_cast<Eigen::Index>(f.expanded.size()));
  for (std::size_t j = 0; j < f.expanded.size(); ++j) {
    m.term_names.push_back(term_name(f.expanded[j], space));
    for (std::size_t c = 0; c < n; ++c) {
      double e = 1.0;
      for (int v : f.expanded[j]) e *= CellSpace::bit(c, v);
      m.design(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) = e;
    }
  }
  for (const Term& t : f.maximal) {
    std::vector<std::int32_t> gid(n);
    for (std::size_t c = 0; c < n; ++c) {
      std::int32_t g = 0;
      for (std::size_t j = 0; j < t.size(); ++j) g |= CellSpace::bit(c, t[j]) << j;
      gid[c] = g;
    }
    m.margin_gid.push_back(std::move(gid));
    m.margin_groups.push_back(1 << t.size());
  }

  // Full column rank over the estimable (not structurally zero) cells.
  const auto sz = space.structural_zeros();
  std::size_t n_obs = 0;
  for (char z : sz) n_obs += !z;
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(n_obs), m.design.cols());
  Eigen::Index r = 0;
  for (std::size_t c = 0; c < n; ++c)
    if (!sz[c]) sub.row(r++) = m.design.row(static_cast<Eigen::Index>(c));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
  if (qr.rank() < m.design.cols()) {
    std::string msg = "design rank-deficient over estimable cells; aliased terms:";
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < m.design.cols(); ++j)
      msg += " " + m.term_names[static_cast<std::size_t>(perm[j])];
    throw ModelError(msg);
  }
  return m;
}

}  // namespace mse

#endif  // MSE_FORMULA_HPP
