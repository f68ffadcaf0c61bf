#ifndef MSE_BOOTSTRAP_HPP
#define MSE_BOOTSTRAP_HPP

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mse/em.hpp"
#include "mse/popsize.hpp"

namespace mse {

struct BootstrapConfig {
  int replicates = 2000;
  std::uint64_t seed = 0;
  double level = 0.95;

  void validate() const {
    if (replicates < 1) throw ModelError("replicates must be >= 1");
    if (!(level > 0 && level < 1)) throw ModelError("level must lie in (0, 1)");
  }
};

struct StatisticInterval {
  std::string name;
  double point = 0;
  double lower = 0;
  double upper = 0;
  bool point_outside = false;  // point not inside [lower, upper]; reported, not hidden
};

struct BootstrapResult {
  std::vector<StatisticInterval> statistics;
  int replicates = 0;
  int converged = 0;
  int failed = 0;
  bool degraded = false;  // >5% of replicates failed
  int lower_rank = 0;     // 1-based order statistics used for the bounds
  int upper_rank = 0;
};

namespace detail {

inline long long round_half_even(double x) {
  const int prev = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const long long r = static_cast<long long>(std::nearbyint(x));
  std::fesetround(prev);
  return r;
}

inline std::vector<long long> multinomial_draw(std::mt19937_64& rng, long long size,
                                               const std::vector<double>& probs) {
  std::vector<long long> draw(probs.size(), 0);
  double remaining_p = 0;
  for (double p : probs) remaining_p += p;
  long long remaining = size;
  for (std::size_t i = 0; i + 1 < probs.size() && remaining > 0; ++i) {
    const double p = remaining_p > 0 ? std::clamp(probs[i] / remaining_p, 0.0, 1.0) : 0.0;
    std::binomial_distribution<long long> bin(remaining, p);
    draw[i] = bin(rng);
    remaining -= draw[i];
    remaining_p -= probs[i];
  }
  if (!probs.empty()) draw.back() += remaining;
  return draw;
}

}  // namespace detail

/// Hybrid bootstrap: multinomial resampling over the observed patterns plus
/// one synthetic never-observed pattern carrying the fitted unobserved mass,
/// sample size round(N_hat), the synthetic count zeroed before refitting.
/// `statistics` maps a replicate fit to named values; replicates where the
/// refit throws or fails to converge are dropped from the percentiles and
/// counted as failed.
inline BootstrapResult run_bootstrap(
    const IncompleteTable& table, const ModelFormula& formula, const CellSpace& space,
    const BootstrapConfig& cfg, const EmOptions& opts = {},
    const std::function<std::vector<StatisticInterval>(const EmFit&, const PopulationEstimate&)>*
        statistics = nullptr) {
  cfg.validate();
  const auto default_stats = [&space](const EmFit&, const PopulationEstimate& est) {
    std::vector<StatisticInterval> s;
    s.push_back({"N_hat", est.n_total, 0, 0, false});
    s.push_back({"N_unobserved", est.n_unobserved, 0, 0, false});
    for (const EthnicityMargin& m : ethnicity_margins(est, space))
      s.push_back({std::string("maori_") + m.variable, m.maori, 0, 0, false});
    return s;
  };
  const auto eval = [&](const EmFit& em, const PopulationEstimate& est) {
    return statistics ? (*statistics)(em, est) : default_stats(em, est);
  };

  const EmFit base = fit_em(table, formula, space, opts);
  if (!base.converged) throw FitError("base fit did not converge; bootstrap aborted");
  const PopulationEstimate base_est = estimate_population(base);
  BootstrapResult out;
  out.statistics = eval(base, base_est);
  out.replicates = cfg.replicates;

  const long long size = detail::round_half_even(base_est.n_total);
  std::vector<double> probs;
  probs.reserve(table.counts.size() + 1);
  for (double c : table.counts) probs.push_back(c / base_est.n_total);
  probs.push_back(base_est.n_unobserved / base_est.n_total);

  std::vector<std::vector<double>> values(out.statistics.size());
  for (int rep = 0; rep < cfg.replicates; ++rep) {
    // Per-replicate stream split from the master seed: serial and parallel
    // execution orders agree.
    std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed), static_cast<std::uint64_t>(rep)};
    std::mt19937_64 rng(seq);
    const auto draw = detail::multinomial_draw(rng, size, probs);

    IncompleteTable rt;
    rt.schema = table.schema;
    rt.patterns = table.patterns;
    rt.counts.resize(table.counts.size());
    for (std::size_t i = 0; i < table.counts.size(); ++i)
      rt.counts[i] = static_cast<double>(draw[i]);  // synthetic all-out count dropped
    try {
      const EmFit fit = fit_em(rt, formula, space, opts);
      if (!fit.converged) throw FitError("replicate did not converge");
      const PopulationEstimate est = estimate_population(fit);
      const auto stats = eval(fit, est);
      for (std::size_t s = 0; s < values.size(); ++s) values[s].push_back(stats[s].point);
      ++out.converged;
    } catch (const std::exception&) {
      ++out.failed;
    }
  }

  if (out.converged == 0) throw FitError("every bootstrap replicate failed");
  out.degraded = out.failed > cfg.replicates / 20;
  const double alpha = 1 - cfg.level;
  const int r = out.converged;
  // tolerate representation noise in alpha (e.g. 1 - 0.95) before the ceiling
  out.lower_rank = std::max<int>(1, static_cast<int>(std::ceil(alpha / 2 * r - 1e-9)));
  out.upper_rank = std::max<int>(1, static_cast<int>(std::ceil((1 - alpha / 2) * r - 1e-9)));
  for (std::size_t s = 0; s < values.size(); ++s) {
    std::sort(values[s].begin(), values[s].end());
    StatisticInterval& si = out.statistics[s];
    si.lower = values[s][static_cast<std::size_t>(out.lower_rank - 1)];
    si.upper = values[s][static_cast<std::size_t>(out.upper_rank - 1)];
    si.point_outside = si.point < si.lower || si.point > si.upper;
  }
  return out;
}

inline BootstrapResult run_bootstrap(const IncompleteTable& table, const std::string& formula_text,
                                     const BootstrapConfig& cfg, const EmOptions& opts = {}) {
  const CellSpace space = CellSpace::from(table.schema);
  return run_bootstrap(table, parse_formula(formula_text, space), space, cfg, opts);
}

}  // namespace mse

#endif  // MSE_BOOTSTRAP_HPP
