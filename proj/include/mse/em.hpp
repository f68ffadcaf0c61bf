#ifndef MSE_EM_HPP
#define MSE_EM_HPP

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "mse/formula.hpp"
#include "mse/loglin.hpp"
#include "mse/schema.hpp"

namespace mse {

/// Expected completed counts plus the observed-pattern -> completed-cell map.
struct CompletedTable {
  Eigen::VectorXd expected;                         // per completed cell
  std::vector<std::vector<std::int32_t>> compatible;  // per observed pattern
};

struct EmOptions {
  double tol_loglik = 1e-7;  // absolute change in observed-data log-likelihood
  double tol_cells = 1e-8;   // max relative change of completed counts
  int max_iterations = 200000;
  int ipf_sweeps_per_m_step = 3;
  FitOptions final_fit;  // full M-step at convergence (parameters, SEs)
};

struct EmFit {
  CellSpace space;
  ModelFormula formula;
  ModelMatrix matrix;
  FittedLoglinear fit;
  CompletedTable completed;
  double observed_loglik = 0;  // up to the constant sum(log y!)
  int em_iterations = 0;
  bool converged = false;
  double n_observed = 0;
};

inline std::vector<std::vector<std::int32_t>> compatibility_map(const IncompleteTable& table,
                                                                const CellSpace& space) {
  std::vector<std::vector<std::int32_t>> lists;
  lists.reserve(table.patterns.size());
  for (const CellPattern& p : table.patterns) lists.push_back(space.compatible_cells(p));
  return lists;
}

/// Distribute each observed count over its compatible completed cells in
/// proportion to the current fitted means; a pattern whose compatible mass
/// is zero is split uniformly.
inline Eigen::VectorXd e_step(const std::vector<double>& counts,
                              const std::vector<std::vector<std::int32_t>>& compatible,
                              const Eigen::VectorXd& fitted) {
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(fitted.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& cells = compatible[i];
    double mass = 0;
    for (std::int32_t c : cells) mass += fitted[c];
    if (mass > 0) {
      for (std::int32_t c : cells) expected[c] += counts[i] * fitted[c] / mass;
    } else {
      for (std::int32_t c : cells) expected[c] += counts[i] / static_cast<double>(cells.size());
    }
  }
  return expected;
}

inline CompletedTable e_step(const IncompleteTable& table, const CellSpace& space,
                             const Eigen::VectorXd& fitted) {
  CompletedTable ct;
  ct.compatible = compatibility_map(table, space);
  ct.expected = e_step(table.counts, ct.compatible, fitted);
  return ct;
}

namespace detail {

inline double observed_loglik(const std::vector<double>& counts,
                              const std::vector<std::vector<std::int32_t>>& compatible,
                              const Eigen::VectorXd& mu, const std::vector<char>& sz) {
  double ll = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    double m = 0;
    for (std::int32_t c : compatible[i]) m += mu[c];
    ll += counts[i] * std::log(std::max(m, 1e-300));
  }
  for (Eigen::Index c = 0; c < mu.size(); ++c)
    if (!sz[static_cast<std::size_t>(c)]) ll -= mu[c];
  return ll;
}

}  // namespace detail

/// EM for the incomplete table: distribute item- and struct-missing mass
/// (E-step), refit the loglinear model (M-step, IPF-updated between
/// iterations), until the observed-data log-likelihood settles. An optional
/// init vector of cell weights seeds the first E-step (used by the latent
/// module's random restarts); by default missing mass starts uniformly split.
inline EmFit fit_em(const IncompleteTable& table, const ModelFormula& formula,
                    const CellSpace& space, const EmOptions& opts = {},
                    const Eigen::VectorXd* init_weights = nullptr) {
  table.validate();
  require_estimable(formula, space);

  EmFit out;
  out.space = space;
  out.formula = formula;
  out.matrix = build_design(formula, space);
  out.n_observed = table.total();
  out.completed.compatible = compatibility_map(table, space);
  const auto sz = space.structural_zeros();

  Eigen::VectorXd expected;
  if (init_weights) {
    expected = e_step(table.counts, out.completed.compatible, *init_weights);
  } else {
    expected = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.n_cells()));
    for (std::size_t i = 0; i < table.counts.size(); ++i) {
      const auto& cells = out.completed.compatible[i];
      for (std::int32_t c : cells) expected[c] += table.counts[i] / static_cast<double>(cells.size());
    }
  }

  Eigen::VectorXd mu(static_cast<Eigen::Index>(space.n_cells()));
  for (Eigen::Index c = 0; c < mu.size(); ++c)
    mu[c] = sz[static_cast<std::size_t>(c)] ? 0.0 : 1.0;
  mu *= out.n_observed / mu.sum();

  double prev_ll = -std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    detail::ipf_sweeps(out.matrix, expected, sz, mu, opts.ipf_sweeps_per_m_step);
    const double ll = detail::observed_loglik(table.counts, out.completed.compatible, mu, sz);
    if (ll < prev_ll - 1e-5 * (1.0 + std::abs(ll) * 1e-9))
      throw FitError("observed-data log-likelihood decreased during EM");
    Eigen::VectorXd next = e_step(table.counts, out.completed.compatible, mu);
    const double relcell =
        ((next - expected).cwiseAbs().cwiseQuotient(expected.cwiseMax(1e-12))).maxCoeff();
    const bool done = std::abs(ll - prev_ll) < opts.tol_loglik || relcell < opts.tol_cells;
    prev_ll = ll;
    expected = next;
    if (done) {
      out.converged = true;
      ++it;
      break;
    }
  }
  out.em_iterations = it;
  out.completed.expected = expected;
  out.observed_loglik = prev_ll;

  // Full M-step on the converged completed counts for parameters and SEs.
  out.fit = fit_poisson(out.matrix, expected, sz, opts.final_fit);
  return out;
}

inline EmFit fit_em(const IncompleteTable& table, const std::string& formula_text,
                    const EmOptions& opts = {}) {
  const CellSpace space = CellSpace::from(table.schema);
  return fit_em(table, parse_formula(formula_text, space), space, opts);
}

/// Observed-data log-likelihood of the maximal estimable model; the
/// reference point for observed-data deviances.
inline double reference_loglik(const IncompleteTable& table, const EmOptions& opts = {}) {
  const CellSpace space = CellSpace::from(table.schema);
  return fit_em(table, maximal_formula(space), space, opts).observed_loglik;
}

/// Deviance of a fitted model against the maximal estimable model on the
/// same observed data.
inline double observed_deviance(double reference_ll, double model_ll) {
  return 2.0 * (reference_ll - model_ll);
}

}  // namespace mse

#endif  // MSE_EM_HPP
