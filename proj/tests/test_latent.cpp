#include <catch_amalgamated.hpp>

#include "mse/latent.hpp"
#include "mse/sim.hpp"

namespace {

std::vector<double> mixture_counts(double n, const std::array<double, 2>& pi,
                                   const std::vector<std::array<double, 2>>& p) {
  const std::size_t m = p.size();
  std::vector<double> counts(std::size_t{1} << m, 0.0);
  for (std::size_t g = 0; g < counts.size(); ++g) {
    double total = 0;
    for (int x = 0; x < 2; ++x) {
      double t = pi[x];
      for (std::size_t v = 0; v < m; ++v) t *= ((g >> v) & 1u) ? p[v][x] : 1 - p[v][x];
      total += t;
    }
    counts[g] = n * total;
  }
  return counts;
}

}  // namespace

TEST_CASE("separated blocks give degenerate conditionals", "[latent]") {
  std::vector<double> counts(8, 0.0);
  counts[0] = 600;  // 000
  counts[7] = 400;  // 111
  const mse::LatentFit fit = mse::fit_lc_margins(counts, {'a', 'b', 'c'});
  REQUIRE(fit.class_sizes[0] == Catch::Approx(0.6).margin(1e-6));
  REQUIRE(fit.class_sizes[1] == Catch::Approx(0.4).margin(1e-6));
  for (const auto& c : fit.conditionals) {
    REQUIRE(c[0] == Catch::Approx(0.0).margin(1e-6));
    REQUIRE(c[1] == Catch::Approx(1.0).margin(1e-6));
  }
  REQUIRE(fit.df == 8 - 7);
}

TEST_CASE("expected counts from a known mixture are recovered", "[latent]") {
  const std::array<double, 2> pi{0.7, 0.3};
  const std::vector<std::array<double, 2>> p{{0.1, 0.9}, {0.2, 0.8}, {0.15, 0.7}, {0.05, 0.95}};
  const auto counts = mixture_counts(1e6, pi, p);
  const mse::LatentFit fit = mse::fit_lc_margins(counts, {'a', 'b', 'c', 'd'});
  REQUIRE(fit.converged);
  REQUIRE(fit.df == 7);
  REQUIRE(fit.class_sizes[0] + fit.class_sizes[1] == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(fit.class_sizes[1] == Catch::Approx(0.3).margin(1e-3));
  for (std::size_t v = 0; v < p.size(); ++v) {
    REQUIRE(fit.conditionals[v][0] == Catch::Approx(p[v][0]).margin(1e-3));
    REQUIRE(fit.conditionals[v][1] == Catch::Approx(p[v][1]).margin(1e-3));
  }
  REQUIRE(fit.deviance == Catch::Approx(0.0).margin(1e-4));
}

TEST_CASE("labels anchor on the first indicator, not on restart order", "[latent]") {
  const std::array<double, 2> pi{0.25, 0.75};
  const std::vector<std::array<double, 2>> p{{0.85, 0.1}, {0.7, 0.2}, {0.9, 0.3}};
  const auto counts = mixture_counts(5e5, pi, p);
  const mse::LatentFit few = mse::fit_lc_margins(counts, {'a', 'b', 'c'}, 2, 5);
  const mse::LatentFit many = mse::fit_lc_margins(counts, {'a', 'b', 'c'}, 2, 20);
  // class 2 is the high-P(a=1) class whichever restart won
  REQUIRE(few.conditionals[0][1] >= few.conditionals[0][0]);
  REQUIRE(many.conditionals[0][1] >= many.conditionals[0][0]);
  REQUIRE(few.class_sizes[1] == Catch::Approx(many.class_sizes[1]).margin(1e-6));
}

TEST_CASE("unidentified latent specs are refused", "[latent]") {
  std::vector<double> counts(8, 10.0);
  REQUIRE_THROWS_AS(mse::fit_lc_margins(counts, {'a', 'b', 'c'}, 3), mse::ModelError);
  REQUIRE_THROWS_AS(mse::fit_lc_margins({10, 20, 30, 40}, {'a', 'b'}), mse::ModelError);
  REQUIRE_THROWS_AS(mse::fit_lc_margins(counts, {'a', 'b', 'c', 'd'}), mse::ModelError);

  mse::LatentSpec spec;
  spec.classes_x = 3;
  REQUIRE_THROWS_AS(spec.validate(), mse::ModelError);
  mse::LatentSpec xy;
  xy.xy_interaction = true;
  REQUIRE_THROWS_AS(xy.validate(), mse::ModelError);
}

TEST_CASE("terms joining two ethnicity variables are rejected", "[latent]") {
  mse::SimSpec gen;
  gen.n_true = 20000;
  gen.registers.resize(3);
  const mse::SimResult world = mse::generate(gen);
  mse::LatentSpec spec;
  spec.retained_terms = {"ab"};
  spec.restarts = 1;
  REQUIRE_THROWS_AS(mse::fit_lcmse(world.table, spec), mse::ModelError);
}

TEST_CASE("integrated fit on noisy synthetic data is coherent", "[latent]") {
  mse::SimSpec gen;
  gen.n_true = 50000;
  gen.prevalence = 0.2;
  gen.registers.resize(3);
  for (auto& r : gen.registers) {
    r.inclusion = {{{0.7, 0.7}, {0.7, 0.7}}};
    r.measurement = {{{0.95, 0.05}, {0.1, 0.9}}};  // some misclassification
    r.item_missing = 0.05;
  }
  gen.seed = 5;
  const mse::SimResult world = mse::generate(gen);

  mse::LatentSpec spec;
  spec.retained_terms = {"ABc", "ACb", "BCa"};
  spec.restarts = 3;
  mse::EmOptions opts;
  opts.tol_loglik = 1e-6;
  const mse::LcmseFit fit = mse::fit_lcmse(world.table, spec, opts);

  REQUIRE(fit.restarts_converged == 3);
  REQUIRE(fit.classes.class_sizes[0] + fit.classes.class_sizes[1] ==
          Catch::Approx(1.0).margin(1e-9));
  for (const auto& c : fit.classes.conditionals) {
    REQUIRE(c[0] >= 0.0);
    REQUIRE(c[0] <= 1.0);
    REQUIRE(c[1] >= 0.0);
    REQUIRE(c[1] <= 1.0);
  }
  REQUIRE(fit.population.n_total >= fit.population.n_observed);
  // class 2 anchored on the first ethnicity variable
  REQUIRE(fit.classes.conditionals[0][1] >= fit.classes.conditionals[0][0]);
  // summing the joint over the latent variable reproduces the fitted
  // observable table
  const mse::CellSpace obs_space = mse::CellSpace::from(world.table.schema);
  std::vector<int> observed_vars;
  for (int v = 0; v < obs_space.n_vars(); ++v) observed_vars.push_back(v);
  const auto joint =
      mse::collapse_margin(fit.population.cell_means, fit.em.space, observed_vars);
  double total = 0;
  for (double m : joint) total += m;
  REQUIRE(total == Catch::Approx(fit.population.n_total).epsilon(1e-10));
}

TEST_CASE("at-least-k totals come from the joint ethnicity margin", "[latent]") {
  // margin over (a, b) with known masses
  const std::vector<double> m{10, 20, 30, 40};
  REQUIRE(mse::maori_at_least_k(m, 0) == Catch::Approx(100));
  REQUIRE(mse::maori_at_least_k(m, 1) == Catch::Approx(90));
  REQUIRE(mse::maori_at_least_k(m, 2) == Catch::Approx(40));
  REQUIRE_THROWS_AS(mse::maori_at_least_k(m, 3), mse::ModelError);
  REQUIRE_THROWS_AS(mse::maori_at_least_k(m, -1), mse::ModelError);
  REQUIRE_THROWS_AS(mse::maori_at_least_k({1, 2, 3}, 1), mse::ModelError);
}
