#include <catch_amalgamated.hpp>

#include "mse/bootstrap.hpp"
#include "mse/sim.hpp"

namespace {

mse::IncompleteTable small_world() {
  mse::SimSpec gen;
  gen.n_true = 4000;
  gen.prevalence = 0.3;
  gen.registers.resize(2);
  gen.registers[0].inclusion = {{{0.75, 0.75}, {0.75, 0.75}}};
  gen.registers[1].inclusion = {{{0.65, 0.65}, {0.65, 0.65}}};
  gen.registers[0].item_missing = 0.1;
  gen.registers[1].item_missing = 0.05;
  gen.seed = 9;
  return mse::generate(gen).table;
}

}  // namespace

TEST_CASE("rounding used for the sample size is half-even", "[bootstrap]") {
  REQUIRE(mse::detail::round_half_even(2.5) == 2);
  REQUIRE(mse::detail::round_half_even(3.5) == 4);
  REQUIRE(mse::detail::round_half_even(-2.5) == -2);
  REQUIRE(mse::detail::round_half_even(2.4999) == 2);
  REQUIRE(mse::detail::round_half_even(1000000.5) == 1000000);
}

TEST_CASE("configs are validated", "[bootstrap]") {
  mse::BootstrapConfig cfg;
  cfg.replicates = 0;
  REQUIRE_THROWS_AS(cfg.validate(), mse::ModelError);
  cfg.replicates = 10;
  cfg.level = 1.0;
  REQUIRE_THROWS_AS(cfg.validate(), mse::ModelError);
}

TEST_CASE("same seed reproduces the result exactly", "[bootstrap]") {
  const mse::IncompleteTable t = small_world();
  mse::BootstrapConfig cfg;
  cfg.replicates = 25;
  cfg.seed = 42;
  const mse::BootstrapResult a = mse::run_bootstrap(t, "[Ab][Ba][ab]", cfg);
  const mse::BootstrapResult b = mse::run_bootstrap(t, "[Ab][Ba][ab]", cfg);
  REQUIRE(a.statistics.size() == b.statistics.size());
  for (std::size_t s = 0; s < a.statistics.size(); ++s) {
    REQUIRE(a.statistics[s].point == b.statistics[s].point);
    REQUIRE(a.statistics[s].lower == b.statistics[s].lower);
    REQUIRE(a.statistics[s].upper == b.statistics[s].upper);
  }
  REQUIRE(a.converged == b.converged);

  mse::BootstrapConfig other = cfg;
  other.seed = 43;
  const mse::BootstrapResult c = mse::run_bootstrap(t, "[Ab][Ba][ab]", other);
  bool differs = false;
  for (std::size_t s = 0; s < a.statistics.size(); ++s)
    differs = differs || a.statistics[s].lower != c.statistics[s].lower ||
              a.statistics[s].upper != c.statistics[s].upper;
  REQUIRE(differs);
}

TEST_CASE("one replicate gives a degenerate interval", "[bootstrap]") {
  const mse::IncompleteTable t = small_world();
  mse::BootstrapConfig cfg;
  cfg.replicates = 1;
  cfg.seed = 7;
  const mse::BootstrapResult r = mse::run_bootstrap(t, "[Ab][Ba][ab]", cfg);
  REQUIRE(r.converged + r.failed == 1);
  REQUIRE(r.lower_rank == 1);
  REQUIRE(r.upper_rank == 1);
  REQUIRE(r.statistics[0].lower == r.statistics[0].upper);
}

TEST_CASE("intervals bracket the point estimate on a healthy fit", "[bootstrap]") {
  const mse::IncompleteTable t = small_world();
  mse::BootstrapConfig cfg;
  cfg.replicates = 80;
  cfg.seed = 3;
  const mse::BootstrapResult r = mse::run_bootstrap(t, "[Ab][Ba][ab]", cfg);
  REQUIRE(r.converged + r.failed == cfg.replicates);
  REQUIRE(r.failed <= cfg.replicates / 10);
  REQUIRE(r.lower_rank == 2);   // ceil(0.025 * 80)
  REQUIRE(r.upper_rank == 78);  // ceil(0.975 * 80)
  const mse::StatisticInterval& n_hat = r.statistics[0];
  REQUIRE(n_hat.name == "N_hat");
  REQUIRE(n_hat.lower <= n_hat.upper);
  REQUIRE_FALSE(n_hat.point_outside);
  REQUIRE(n_hat.lower <= n_hat.point);
  REQUIRE(n_hat.point <= n_hat.upper);
  // the interval should be a plausible scale: nonzero width, well under the
  // estimate itself
  REQUIRE(n_hat.upper - n_hat.lower > 0);
  REQUIRE(n_hat.upper - n_hat.lower < n_hat.point);
}
