#ifndef MSE_POPSIZE_HPP
#define MSE_POPSIZE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "mse/em.hpp"

namespace mse {

/// Population size under the fitted model: observed total plus the model's
/// prediction for the structurally unobservable cells.
struct PopulationEstimate {
  double n_observed = 0;
  double n_unobserved = 0;
  double n_total = 0;
  Eigen::VectorXd cell_means;  // full cell space; unobservable cells predicted
  std::vector<std::pair<std::size_t, double>> unobserved_cells;
};

inline PopulationEstimate estimate_population(const EmFit& em) {
  PopulationEstimate est;
  est.n_observed = em.n_observed;
  est.cell_means = em.fit.fitted;
  const auto sz = em.space.structural_zeros();
  for (std::size_t c = 0; c < em.space.n_cells(); ++c) {
    if (!sz[c]) continue;
    const double mu = std::exp(
        std::min(em.matrix.design.row(static_cast<Eigen::Index>(c)).dot(em.fit.beta), 700.0));
    est.cell_means[static_cast<Eigen::Index>(c)] = mu;
    est.n_unobserved += mu;
    est.unobserved_cells.emplace_back(c, mu);
  }
  est.n_total = est.n_observed + est.n_unobserved;
  return est;
}

/// Collapse estimated cell means onto the joint margin of the given
/// variables. Entry g of the result is the total mass of cells whose bits at
/// vars form the binary pattern g (vars[0] = low bit).
inline std::vector<double> collapse_margin(const Eigen::VectorXd& cell_means,
                                           const CellSpace& space, const std::vector<int>& vars) {
  std::vector<double> margin(std::size_t{1} << vars.size(), 0.0);
  for (std::size_t c = 0; c < space.n_cells(); ++c) {
    std::size_t g = 0;
    for (std::size_t j = 0; j < vars.size(); ++j)
      g |= static_cast<std::size_t>(CellSpace::bit(c, vars[j])) << j;
    margin[g] += cell_means[static_cast<Eigen::Index>(c)];
  }
  return margin;
}

/// Estimated ethnic composition per source: population totals by each
/// ethnicity variable, missing values resolved by the model.
struct EthnicityMargin {
  char variable = 0;
  double maori = 0;
  double non_maori = 0;
};

inline std::vector<EthnicityMargin> ethnicity_margins(const PopulationEstimate& est,
                                                      const CellSpace& space) {
  std::vector<EthnicityMargin> out;
  for (int i = 0; i < space.n_registers; ++i) {
    const auto m = collapse_margin(est.cell_means, space, {space.ethnicity_var(i)});
    out.push_back({space.names[space.ethnicity_var(i)], m[1], m[0]});
  }
  return out;
}

/// Within-register ethnic composition: mass restricted to cells where the
/// register indicator is 1, split by its ethnicity variable.
inline std::vector<EthnicityMargin> register_ethnicity_margins(const PopulationEstimate& est,
                                                               const CellSpace& space) {
  std::vector<EthnicityMargin> out;
  for (int i = 0; i < space.n_registers; ++i) {
    const auto m =
        collapse_margin(est.cell_means, space, {space.register_var(i), space.ethnicity_var(i)});
    // groups: bit0 = register, bit1 = ethnicity
    out.push_back({space.names[space.register_var(i)], m[3], m[1]});
  }
  return out;
}

}  // namespace mse

#endif  // MSE_POPSIZE_HPP
