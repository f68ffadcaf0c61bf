#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mse/ingest.hpp"
#include "mse/report.hpp"

namespace {

constexpr int kExitModelError = 2;
constexpr int kExitDataError = 3;

void emit(const mse::Json& report, const std::string& format, const std::string& output) {
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!output.empty()) {
    file.open(output);
    if (!file) throw mse::IngestError("cannot write '" + output + "'");
    out = &file;
  }
  if (format == "json")
    *out << report.dump(2) << "\n";
  else if (format == "text")
    mse::write_text_report(report, *out);
  else
    mse::write_csv_report(report, *out);
}

struct CommonOpts {
  std::string data, output;
  std::string format = "json";
  bool deviance = false;
  mse::EmOptions em;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_data = true) {
  if (needs_data) cmd->add_option("--data", o.data, "input CSV table")->required();
  cmd->add_option("--output", o.output, "output path (default stdout)");
  cmd->add_option("--format", o.format, "json, text or csv")
      ->check(CLI::IsMember({"json", "text", "csv"}));
  cmd->add_option("--tol", o.em.tol_loglik, "EM log-likelihood tolerance");
  cmd->add_option("--max-iter", o.em.max_iterations, "EM iteration cap");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-system population size estimation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value option file");

  CommonOpts fit_o;
  std::string fit_model;
  auto* fit = app.add_subcommand("fit", "fit a loglinear model and estimate the population");
  add_common(fit, fit_o);
  fit->add_option("--model", fit_model, "bracket formula, e.g. [Ac][ac][Ca]")->required();
  fit->add_flag("--deviance", fit_o.deviance, "also fit the maximal model for the deviance");

  CommonOpts lc_o;
  std::vector<std::string> lc_retained;
  std::string lc_model;
  int lc_classes = 2, lc_restarts = 20;
  bool lc_latent_y = false, lc_xy = false, lc_two_stage = false;
  auto* lcmse = app.add_subcommand("lcmse", "latent-class measurement-error fit");
  add_common(lcmse, lc_o);
  lcmse->add_option("--retained", lc_retained, "retained register interaction terms");
  lcmse->add_option("--model", lc_model, "stage-one bracket formula (two-stage only)");
  lcmse->add_option("--classes", lc_classes, "latent classes (2)");
  lcmse->add_option("--restarts", lc_restarts, "random restarts");
  lcmse->add_flag("--latent-y", lc_latent_y, "registers load on a second latent variable");
  lcmse->add_flag("--xy", lc_xy, "include the X-Y association");
  lcmse->add_flag("--deviance", lc_o.deviance, "also fit the maximal model for the deviance");
  lcmse->add_flag("--two-stage", lc_two_stage,
                  "fit the marginal latent class model on the completed ethnicity margins");

  std::string graph_path, col_output, col_format = "text";
  std::vector<std::string> col_covariates;
  auto* collapse = app.add_subcommand("collapse", "collapsibility verdicts from a graph file");
  collapse->add_option("--graph", graph_path, "interaction graph file")->required();
  collapse->add_option("--covariate", col_covariates, "covariates to judge (default: all)");
  collapse->add_option("--output", col_output, "output path (default stdout)");
  collapse->add_option("--format", col_format, "json or text")
      ->check(CLI::IsMember({"json", "text"}));

  CommonOpts boot_o;
  std::string boot_model;
  mse::BootstrapConfig boot_cfg;
  auto* boot = app.add_subcommand("bootstrap", "hybrid bootstrap confidence intervals");
  add_common(boot, boot_o);
  boot->add_option("--model", boot_model, "bracket formula")->required();
  boot->add_option("--replicates", boot_cfg.replicates, "bootstrap replicates");
  boot->add_option("--seed", boot_cfg.seed, "master seed");
  boot->add_option("--level", boot_cfg.level, "confidence level");

  CommonOpts sum_o;
  auto* summary = app.add_subcommand("summary", "observed marginal counts per register");
  add_common(summary, sum_o);

  // a [section] in a --config file may select the subcommand on its own
  for (CLI::App* cmd : {fit, lcmse, collapse, boot, summary}) cmd->configurable();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) {
      const mse::IncompleteTable table = mse::read_table(fit_o.data);
      const mse::CellSpace space = mse::CellSpace::from(table.schema);
      const mse::ModelFormula formula = mse::parse_formula(fit_model, space);
      const mse::EmFit em = mse::fit_em(table, formula, space, fit_o.em);
      if (!em.converged) throw mse::FitError("EM did not converge");
      const mse::PopulationEstimate est = mse::estimate_population(em);
      double ref = std::numeric_limits<double>::quiet_NaN();
      if (fit_o.deviance) ref = mse::reference_loglik(table, fit_o.em);
      emit(mse::fit_report(em, est, ref), fit_o.format, fit_o.output);
    } else if (lcmse->parsed()) {
      const mse::IncompleteTable table = mse::read_table(lc_o.data);
      if (lc_two_stage) {
        // stage one: ordinary loglinear fit; stage two: marginal latent class
        // model on its estimated joint ethnicity margin
        if (lc_model.empty())
          throw mse::ModelError("--two-stage needs a stage-one --model formula");
        const mse::CellSpace space = mse::CellSpace::from(table.schema);
        const mse::EmFit em =
            mse::fit_em(table, mse::parse_formula(lc_model, space), space, lc_o.em);
        if (!em.converged) throw mse::FitError("EM did not converge");
        const mse::PopulationEstimate est = mse::estimate_population(em);
        std::vector<int> vars;
        std::vector<char> names;
        for (int i = 0; i < space.n_registers; ++i) {
          vars.push_back(space.ethnicity_var(i));
          names.push_back(space.names[space.ethnicity_var(i)]);
        }
        const std::vector<double> margins = mse::collapse_margin(est.cell_means, space, vars);
        const mse::LatentFit lat =
            mse::fit_lc_margins(margins, names, lc_classes, lc_restarts);
        mse::Json j;
        j["report_version"] = mse::kReportVersion;
        j["latent"] = mse::latent_report(lat);
        emit(j, lc_o.format, lc_o.output);
      } else {
        mse::LatentSpec spec;
        spec.classes_x = lc_classes;
        spec.latent_y = lc_latent_y;
        spec.xy_interaction = lc_xy;
        spec.retained_terms = lc_retained;
        spec.restarts = lc_restarts;
        double ref = std::numeric_limits<double>::quiet_NaN();
        if (lc_o.deviance) ref = mse::reference_loglik(table, lc_o.em);
        const mse::LcmseFit fitted = mse::fit_lcmse(table, spec, lc_o.em, ref);
        emit(mse::lcmse_report(fitted), lc_o.format, lc_o.output);
      }
    } else if (collapse->parsed()) {
      const mse::InteractionGraph g = mse::read_graph_file(graph_path);
      std::vector<std::string> covs = col_covariates;
      if (covs.empty())
        for (std::size_t i = 0; i < g.nodes.size(); ++i)
          if (!g.is_register[i]) covs.push_back(g.nodes[i]);
      emit(mse::collapse_report(g, covs), col_format, col_output);
    } else if (boot->parsed()) {
      const mse::IncompleteTable table = mse::read_table(boot_o.data);
      const mse::BootstrapResult r =
          mse::run_bootstrap(table, boot_model, boot_cfg, boot_o.em);
      emit(mse::bootstrap_report(r), boot_o.format, boot_o.output);
    } else if (summary->parsed()) {
      const mse::IncompleteTable table = mse::read_table(sum_o.data);
      const mse::MarginalSummary m = mse::marginal_summary(table);
      mse::Json j;
      j["report_version"] = mse::kReportVersion;
      j["n_observed"] = table.total();
      mse::Json regs = mse::Json::array();
      for (std::size_t i = 0; i < m.registers.size(); ++i) {
        mse::Json r;
        r["register"] = std::string(1, m.registers[i]);
        r["non_maori"] = m.counts[i][0];
        r["maori"] = m.counts[i][1];
        r["ethnicity_missing"] = m.counts[i][2];
        r["not_in_register"] = m.counts[i][3];
        regs.push_back(std::move(r));
      }
      j["registers"] = std::move(regs);
      emit(j, sum_o.format, sum_o.output);
    }
  } catch (const mse::IngestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitModelError;
  }
  return 0;
}
