#ifndef MSE_LATENT_HPP
#define MSE_LATENT_HPP

#include <array>
#include <bit>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mse/em.hpp"
#include "mse/popsize.hpp"

namespace mse {

/// Two-class latent structure on the ethnicity variables, optionally with a
/// second latent variable carrying the register indicators.
struct LatentSpec {
  int classes_x = 2;
  bool latent_y = false;        // registers load on Y instead of retained terms
  bool xy_interaction = false;  // include the X-Y association
  std::vector<std::string> retained_terms;  // e.g. {"ABCd","ABDc","ACDb","BCDa"}
  int restarts = 20;            // seeds 1..restarts

  void validate() const {
    if (classes_x != 2)
      throw ModelError("only two latent classes are identified on binary indicators");
    if (restarts < 1) throw ModelError("need at least one restart");
    if (xy_interaction && !latent_y) throw ModelError("XY interaction needs the latent Y");
  }
};

/// Mixture parameters after fitting; class 2 is the class with the higher
/// conditional probability on the first ethnicity variable (the census
/// anchor), so restart order never shows through label switching.
struct LatentFit {
  std::array<double, 2> class_sizes{0, 0};
  std::vector<char> variables;
  std::vector<std::array<double, 2>> conditionals;  // P(variable = 1 | class)
  double loglik = -std::numeric_limits<double>::infinity();
  double deviance = std::numeric_limits<double>::quiet_NaN();
  int df = 0;
  int best_seed = 0;
  bool converged = false;
};

namespace detail {

inline void canonicalize_labels(LatentFit& fit, std::size_t anchor) {
  if (fit.conditionals.empty()) return;
  if (fit.conditionals[anchor][1] >= fit.conditionals[anchor][0]) return;
  std::swap(fit.class_sizes[0], fit.class_sizes[1]);
  for (auto& c : fit.conditionals) std::swap(c[0], c[1]);
}

}  // namespace detail

/// Two-class latent class model fitted to a 2^m margin table by EM with
/// random restarts. Cell g of counts holds the count for the binary pattern
/// g over the variables (variables[0] = low bit).
inline LatentFit fit_lc_margins(const std::vector<double>& counts,
                                const std::vector<char>& variables, int classes = 2,
                                int restarts = 20, double tol = 1e-10,
                                int max_iterations = 100000) {
  const std::size_t m = variables.size();
  if (classes != 2)
    throw ModelError("only two latent classes are identified on binary indicators");
  if (m < 3) throw ModelError("latent class model needs at least three indicators");
  if (counts.size() != (std::size_t{1} << m)) throw ModelError("margin table size mismatch");
  double n = 0;
  for (double c : counts) {
    if (c < 0) throw ModelError("negative count");
    n += c;
  }
  if (n <= 0) throw ModelError("empty margin table");

  LatentFit best;
  best.variables = variables;
  for (int seed = 1; seed <= restarts; ++seed) {
    std::mt19937 rng(static_cast<std::uint32_t>(seed));
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    std::array<double, 2> pi{0.5, 0.5};
    std::vector<std::array<double, 2>> p(m);
    for (auto& pv : p) pv = {unif(rng), unif(rng)};

    double prev = -std::numeric_limits<double>::infinity();
    bool conv = false;
    for (int it = 0; it < max_iterations; ++it) {
      double ll = 0;
      std::array<double, 2> npi{0, 0};
      std::vector<std::array<double, 2>> num(m, {0, 0});
      for (std::size_t g = 0; g < counts.size(); ++g) {
        std::array<double, 2> w;
        for (int x = 0; x < 2; ++x) {
          double t = pi[x];
          for (std::size_t v = 0; v < m; ++v)
            t *= ((g >> v) & 1u) ? p[v][x] : 1 - p[v][x];
          w[x] = t;
        }
        const double tot = w[0] + w[1];
        ll += counts[g] * std::log(std::max(tot, 1e-300));
        for (int x = 0; x < 2; ++x) {
          const double post = counts[g] * (tot > 0 ? w[x] / tot : 0.5);
          npi[x] += post;
          for (std::size_t v = 0; v < m; ++v)
            if ((g >> v) & 1u) num[v][x] += post;
        }
      }
      for (std::size_t v = 0; v < m; ++v)
        for (int x = 0; x < 2; ++x) p[v][x] = npi[x] > 0 ? num[v][x] / npi[x] : 0.5;
      for (int x = 0; x < 2; ++x) pi[x] = npi[x] / n;
      if (std::abs(ll - prev) < tol) {
        prev = ll;
        conv = true;
        break;
      }
      prev = ll;
    }

    if (prev > best.loglik) {
      best.loglik = prev;
      best.class_sizes = pi;
      best.conditionals = p;
      best.best_seed = seed;
      best.converged = conv;
    }
  }
  if (!std::isfinite(best.loglik)) throw FitError("no latent class restart converged");

  best.df = static_cast<int>(counts.size()) - (2 * static_cast<int>(m) + 1);
  double dev = 0;
  for (std::size_t g = 0; g < counts.size(); ++g) {
    std::array<double, 2> w;
    for (int x = 0; x < 2; ++x) {
      double t = best.class_sizes[x];
      for (std::size_t v = 0; v < m; ++v)
        t *= ((g >> v) & 1u) ? best.conditionals[v][x] : 1 - best.conditionals[v][x];
      w[x] = t;
    }
    const double mu = n * (w[0] + w[1]);
    if (counts[g] > 0) dev += 2 * counts[g] * std::log(counts[g] / std::max(mu, 1e-300));
  }
  best.deviance = dev;
  detail::canonicalize_labels(best, 0);
  return best;
}

/// Integrated latent-class fit: the latent variables are extra cells of the
/// completed space and EM distributes missing values and class membership in
/// one proportional allocation.
struct LcmseFit {
  LatentFit classes;
  EmFit em;
  PopulationEstimate population;
  double deviance = std::numeric_limits<double>::quiet_NaN();
  double deviance_normed = std::numeric_limits<double>::quiet_NaN();
  int restarts_converged = 0;
};

namespace detail {

inline ModelFormula latent_formula(const LatentSpec& spec, const CellSpace& space) {
  std::string text;
  for (const auto& t : spec.retained_terms) text += "[" + t + "]";
  for (int i = 0; i < space.n_registers; ++i)
    text += std::string("[") + space.names[space.ethnicity_var(i)] + "X]";
  if (spec.latent_y) {
    for (int i = 0; i < space.n_registers; ++i)
      text += std::string("[") + space.names[space.register_var(i)] + "Y]";
    if (spec.xy_interaction) text += "[XY]";
  }
  ModelFormula f = parse_formula(text, space);
  for (const Term& t : f.expanded) {
    int eths = 0;
    for (int v : t)
      if (v >= space.n_registers && v < 2 * space.n_registers) ++eths;
    if (eths > 1)
      throw ModelError("term " + term_name(t, space) +
                       " joins two ethnicity variables; conditional independence given the "
                       "latent class forbids that");
  }
  return f;
}

inline Eigen::VectorXd random_latent_weights(const CellSpace& space, int seed) {
  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  const int nl = space.n_latents();
  const int no = space.n_vars() - nl;
  // One random conditional per (observed variable, latent configuration).
  std::vector<std::vector<double>> p(static_cast<std::size_t>(no),
                                     std::vector<double>(std::size_t{1} << nl));
  for (auto& pv : p)
    for (double& q : pv) q = unif(rng);
  Eigen::VectorXd w(static_cast<Eigen::Index>(space.n_cells()));
  for (std::size_t c = 0; c < space.n_cells(); ++c) {
    std::size_t lat = 0;
    for (int l = 0; l < nl; ++l)
      lat |= static_cast<std::size_t>(CellSpace::bit(c, space.latent_var(l))) << l;
    double t = 1.0;
    for (int v = 0; v < no; ++v)
      t *= CellSpace::bit(c, v) ? p[v][lat] : 1 - p[v][lat];
    w[static_cast<Eigen::Index>(c)] = t;
  }
  return w;
}

}  // namespace detail

/// Fit the integrated model by EM with random restarts; the best restart by
/// observed-data log-likelihood wins. reference_ll, when supplied, is the
/// maximal-model log-likelihood used for the observed-data deviance.
inline LcmseFit fit_lcmse(const IncompleteTable& table, const LatentSpec& spec,
                          const EmOptions& opts = {},
                          double reference_ll = std::numeric_limits<double>::quiet_NaN()) {
  spec.validate();
  const CellSpace space = CellSpace::from(table.schema, spec.latent_y ? "XY" : "X");
  const ModelFormula formula = detail::latent_formula(spec, space);

  LcmseFit out;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int seed = 1; seed <= spec.restarts; ++seed) {
    const Eigen::VectorXd w = detail::random_latent_weights(space, seed);
    EmFit em = fit_em(table, formula, space, opts, &w);
    if (em.converged) ++out.restarts_converged;
    if (em.converged && em.observed_loglik > best_ll) {
      best_ll = em.observed_loglik;
      out.em = std::move(em);
      out.classes.best_seed = seed;
    }
  }
  if (out.restarts_converged == 0) throw FitError("no latent restart converged");

  out.population = estimate_population(out.em);
  const int xvar = space.index_of('X');
  const auto xmargin = collapse_margin(out.population.cell_means, space, {xvar});
  const double n = out.population.n_total;
  out.classes.class_sizes = {xmargin[0] / n, xmargin[1] / n};
  out.classes.loglik = out.em.observed_loglik;
  out.classes.converged = true;
  for (int i = 0; i < space.n_registers; ++i) {
    const auto m =
        collapse_margin(out.population.cell_means, space, {space.ethnicity_var(i), xvar});
    out.classes.variables.push_back(space.names[space.ethnicity_var(i)]);
    out.classes.conditionals.push_back({m[1] / (m[0] + m[1]), m[3] / (m[2] + m[3])});
  }
  // Observable patterns minus one, minus the free loglinear parameters.
  out.classes.df = static_cast<int>((std::size_t{1} << (2 * space.n_registers)) - 1) + 1 -
                   static_cast<int>(out.em.matrix.design.cols());
  detail::canonicalize_labels(out.classes, 0);
  if (std::isfinite(reference_ll)) {
    out.deviance = observed_deviance(reference_ll, out.em.observed_loglik);
    out.deviance_normed = deviance_normed(out.deviance, out.em.n_observed);
  }
  return out;
}

/// People counted as Maori by at least k of the sources, from a joint
/// ethnicity margin (2^m cells).
inline double maori_at_least_k(const std::vector<double>& margins, int k) {
  int m = 0;
  while ((std::size_t{1} << m) < margins.size()) ++m;
  if ((std::size_t{1} << m) != margins.size()) throw ModelError("margin table size not a power of two");
  if (k < 0 || k > m) throw ModelError("threshold out of range");
  double total = 0;
  for (std::size_t g = 0; g < margins.size(); ++g)
    if (std::popcount(g) >= static_cast<int>(k)) total += margins[g];
  return total;
}

}  // namespace mse

#endif  // MSE_LATENT_HPP
