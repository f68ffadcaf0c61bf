#ifndef MSE_SIM_HPP
#define MSE_SIM_HPP

#include <array>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "mse/schema.hpp"

namespace mse {

/// Generator settings for known-truth synthetic populations. Each register
/// has inclusion probabilities by (covariate level, true ethnicity), a 2x2
/// measurement matrix P(recorded | true) and an item-missingness rate.
struct SimSpec {
  struct RegisterSpec {
    std::array<std::array<double, 2>, 2> inclusion{{{0.8, 0.8}, {0.8, 0.8}}};  // [cov][eth]
    std::array<std::array<double, 2>, 2> measurement{{{1.0, 0.0}, {0.0, 1.0}}};  // [true][rec]
    double item_missing = 0.0;
  };

  long long n_true = 100000;
  double prevalence = 0.15;      // P(true Maori)
  double cov_prevalence = 0.0;   // binary covariate; 0 disables stratification
  std::vector<RegisterSpec> registers;
  std::uint64_t seed = 1;

  void validate() const {
    const auto prob = [](double p) { return p >= 0 && p <= 1; };
    if (n_true < 1) throw ModelError("n_true must be positive");
    if (!prob(prevalence) || !prob(cov_prevalence)) throw ModelError("probability out of [0,1]");
    if (registers.size() < 2) throw ModelError("need at least two registers");
    for (const auto& r : registers) {
      for (const auto& row : r.inclusion)
        for (double p : row)
          if (!prob(p)) throw ModelError("inclusion probability out of [0,1]");
      for (const auto& row : r.measurement) {
        if (!prob(row[0]) || !prob(row[1]) || std::abs(row[0] + row[1] - 1) > 1e-12)
          throw ModelError("measurement rows must be probabilities summing to 1");
      }
      if (!prob(r.item_missing)) throw ModelError("item-missing rate out of [0,1]");
    }
  }
};

struct SimResult {
  IncompleteTable table;                 // collapsed over the covariate
  std::vector<IncompleteTable> strata;   // per covariate level when enabled
  long long n_true = 0;
  long long n_observed = 0;              // persons in at least one register
  long long n_true_maori = 0;
};

/// Simulate persons independently and aggregate observed patterns; persons
/// out of every register are dropped from the table but counted in the truth
/// record.
inline SimResult generate(const SimSpec& spec) {
  spec.validate();
  const std::size_t k = spec.registers.size();
  Schema schema;
  for (std::size_t i = 0; i < k; ++i) {
    schema.registers.push_back(static_cast<char>('A' + i));
    schema.ethnicities.push_back(static_cast<char>('a' + i));
  }
  schema.validate();

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const bool stratified = spec.cov_prevalence > 0;

  using Key = std::pair<std::vector<std::uint8_t>, std::vector<Eth>>;
  std::array<std::map<Key, double>, 2> cells;  // by covariate level

  SimResult out;
  out.n_true = spec.n_true;
  for (long long person = 0; person < spec.n_true; ++person) {
    const int eth = u(rng) < spec.prevalence ? 1 : 0;
    const int cov = stratified && u(rng) < spec.cov_prevalence ? 1 : 0;
    out.n_true_maori += eth;

    CellPattern p;
    p.reg_in.resize(k);
    p.eth.resize(k);
    bool any = false;
    for (std::size_t i = 0; i < k; ++i) {
      const auto& r = spec.registers[i];
      p.reg_in[i] = u(rng) < r.inclusion[cov][eth] ? 1 : 0;
      if (!p.reg_in[i]) {
        p.eth[i] = Eth::StructMissing;
        continue;
      }
      any = true;
      const int rec = u(rng) < r.measurement[eth][1] ? 1 : 0;
      p.eth[i] = u(rng) < r.item_missing ? Eth::ItemMissing
                                         : (rec ? Eth::Maori : Eth::NonMaori);
    }
    if (!any) continue;
    ++out.n_observed;
    cells[cov][{p.reg_in, p.eth}] += 1;
  }

  const auto build = [&](const std::map<Key, double>& m) {
    IncompleteTable t;
    t.schema = schema;
    for (const auto& [key, count] : m) {
      t.patterns.push_back({key.first, key.second});
      t.counts.push_back(count);
    }
    return t;
  };

  if (stratified) {
    out.strata.push_back(build(cells[0]));
    out.strata.push_back(build(cells[1]));
  }
  std::map<Key, double> all = cells[0];
  for (const auto& [key, count] : cells[1]) all[key] += count;
  out.table = build(all);
  out.table.validate();
  return out;
}

}  // namespace mse

#endif  // MSE_SIM_HPP
