#ifndef MSE_REPORT_HPP
#define MSE_REPORT_HPP

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "mse/bootstrap.hpp"
#include "mse/em.hpp"
#include "mse/graph.hpp"
#include "mse/latent.hpp"
#include "mse/popsize.hpp"

namespace mse {

inline constexpr int kReportVersion = 1;

using Json = nlohmann::ordered_json;

namespace detail {

inline Json finite_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

}  // namespace detail

inline Json parameters_json(const FittedLoglinear& fit) {
  Json arr = Json::array();
  for (const Parameter& p : fit.parameters) {
    Json j;
    j["term"] = p.term;
    j["estimate"] = p.estimate;
    j["std_error"] = detail::finite_or_null(p.std_error);
    j["z"] = detail::finite_or_null(p.z);
    j["p_value"] = detail::finite_or_null(p.p_value);
    j["at_boundary"] = p.at_boundary;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline Json fit_report(const EmFit& em, const PopulationEstimate& est,
                       double reference_ll = std::numeric_limits<double>::quiet_NaN()) {
  Json j;
  j["report_version"] = kReportVersion;
  j["model"] = render_formula(em.formula, em.space);
  j["converged"] = em.converged;
  j["em_iterations"] = em.em_iterations;
  j["loglik"] = em.observed_loglik;
  if (std::isfinite(reference_ll)) {
    const double dev = observed_deviance(reference_ll, em.observed_loglik);
    j["deviance"] = dev;
    j["deviance_normed"] = deviance_normed(dev, em.n_observed);
  }
  j["n_observed"] = est.n_observed;
  j["n_unobserved"] = est.n_unobserved;
  j["n_total"] = est.n_total;
  Json unobs = Json::array();
  for (const auto& [cell, mu] : est.unobserved_cells) {
    Json u;
    std::string label;
    for (int v = 0; v < em.space.n_vars(); ++v)
      if (CellSpace::bit(cell, v)) label.push_back(em.space.names[v]);
    u["cell"] = label.empty() ? "(all zero)" : label;
    u["mean"] = mu;
    unobs.push_back(std::move(u));
  }
  j["unobserved_cells"] = std::move(unobs);
  Json margins = Json::array();
  for (const EthnicityMargin& m : ethnicity_margins(est, em.space)) {
    Json mj;
    mj["variable"] = std::string(1, m.variable);
    mj["maori"] = m.maori;
    mj["non_maori"] = m.non_maori;
    margins.push_back(std::move(mj));
  }
  j["ethnicity_margins"] = std::move(margins);
  j["parameters"] = parameters_json(em.fit);
  return j;
}

inline Json latent_report(const LatentFit& lat) {
  Json j;
  j["class_sizes"] = {lat.class_sizes[0], lat.class_sizes[1]};
  Json cond = Json::array();
  for (std::size_t v = 0; v < lat.variables.size(); ++v) {
    Json c;
    c["variable"] = std::string(1, lat.variables[v]);
    c["class_1"] = lat.conditionals[v][0];
    c["class_2"] = lat.conditionals[v][1];
    cond.push_back(std::move(c));
  }
  j["conditionals"] = std::move(cond);
  j["loglik"] = lat.loglik;
  j["deviance"] = detail::finite_or_null(lat.deviance);
  j["df"] = lat.df;
  j["best_seed"] = lat.best_seed;
  return j;
}

inline Json lcmse_report(const LcmseFit& fit) {
  Json j = fit_report(fit.em, fit.population);
  if (std::isfinite(fit.deviance)) {
    j["deviance"] = fit.deviance;
    j["deviance_normed"] = fit.deviance_normed;
  }
  j["latent"] = latent_report(fit.classes);
  j["restarts_converged"] = fit.restarts_converged;
  return j;
}

inline Json bootstrap_report(const BootstrapResult& r) {
  Json j;
  j["report_version"] = kReportVersion;
  j["replicates"] = r.replicates;
  j["converged"] = r.converged;
  j["failed"] = r.failed;
  j["degraded"] = r.degraded;
  j["rank_convention"] = "order statistics ceil(a/2*R) and ceil((1-a/2)*R) of converged replicates";
  j["lower_rank"] = r.lower_rank;
  j["upper_rank"] = r.upper_rank;
  Json stats = Json::array();
  for (const StatisticInterval& s : r.statistics) {
    Json sj;
    sj["name"] = s.name;
    sj["point"] = s.point;
    sj["lower"] = s.lower;
    sj["upper"] = s.upper;
    sj["point_outside"] = s.point_outside;
    stats.push_back(std::move(sj));
  }
  j["statistics"] = std::move(stats);
  return j;
}

inline Json collapse_report(const InteractionGraph& g,
                            const std::vector<std::string>& covariates) {
  Json j;
  j["report_version"] = kReportVersion;
  Json verdicts = Json::array();
  for (const std::string& c : covariates) {
    const CollapseVerdict v = is_collapsible(g, c);
    Json vj;
    vj["covariate"] = c;
    vj["collapsible"] = v.collapsible;
    if (!v.collapsible) vj["witness"] = v.witness_text(g);
    verdicts.push_back(std::move(vj));
  }
  j["verdicts"] = std::move(verdicts);
  return j;
}

/// Text rendering: population counts to whole persons, probabilities and
/// parameters to three decimals.
inline void write_text_report(const Json& j, std::ostream& out) {
  const auto persons = [](double x) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(0) << x;
    return ss.str();
  };
  if (j.contains("model")) out << "model       " << j["model"].get<std::string>() << "\n";
  if (j.contains("n_total")) {
    out << "n observed  " << persons(j["n_observed"].get<double>()) << "\n";
    out << "unobserved  " << persons(j["n_unobserved"].get<double>()) << "\n";
    out << "N estimate  " << persons(j["n_total"].get<double>()) << "\n";
  }
  if (j.contains("deviance"))
    out << "deviance    " << std::fixed << std::setprecision(2) << j["deviance"].get<double>()
        << " (normed " << std::setprecision(2) << j["deviance_normed"].get<double>() << ")\n";
  if (j.contains("latent")) {
    const Json& lat = j["latent"];
    out << "class sizes " << std::fixed << std::setprecision(3)
        << lat["class_sizes"][0].get<double>() << " " << lat["class_sizes"][1].get<double>()
        << "\n";
    for (const Json& c : lat["conditionals"])
      out << "P(" << c["variable"].get<std::string>() << "=1|class) " << std::fixed
          << std::setprecision(3) << c["class_1"].get<double>() << " "
          << c["class_2"].get<double>() << "\n";
  }
  if (j.contains("parameters")) {
    out << "term  estimate  se\n";
    for (const Json& p : j["parameters"]) {
      out << p["term"].get<std::string>() << "  " << std::fixed << std::setprecision(4)
          << p["estimate"].get<double>() << "  ";
      if (p["std_error"].is_null())
        out << (p["at_boundary"].get<bool>() ? "*" : "-");
      else
        out << std::setprecision(4) << p["std_error"].get<double>();
      out << "\n";
    }
  }
  if (j.contains("statistics")) {
    out << "statistic  point  lower  upper\n";
    for (const Json& s : j["statistics"])
      out << s["name"].get<std::string>() << "  " << persons(s["point"].get<double>()) << "  "
          << persons(s["lower"].get<double>()) << "  " << persons(s["upper"].get<double>())
          << "\n";
  }
  if (j.contains("verdicts")) {
    for (const Json& v : j["verdicts"]) {
      out << v["covariate"].get<std::string>() << ": ";
      if (v["collapsible"].get<bool>())
        out << "collapsible\n";
      else
        out << "not collapsible (" << v["witness"].get<std::string>() << ")\n";
    }
  }
}

/// CSV rendering of the tabular block a report carries (parameters or
/// bootstrap statistics).
inline void write_csv_report(const Json& j, std::ostream& out) {
  if (j.contains("parameters")) {
    out << "term,estimate,std_error,z,p_value,at_boundary\n";
    for (const Json& p : j["parameters"]) {
      out << p["term"].get<std::string>() << "," << p["estimate"].get<double>() << ",";
      if (!p["std_error"].is_null()) out << p["std_error"].get<double>();
      out << ",";
      if (!p["z"].is_null()) out << p["z"].get<double>();
      out << ",";
      if (!p["p_value"].is_null()) out << p["p_value"].get<double>();
      out << "," << (p["at_boundary"].get<bool>() ? 1 : 0) << "\n";
    }
  } else if (j.contains("statistics")) {
    out << "statistic,point,lower,upper\n";
    for (const Json& s : j["statistics"])
      out << s["name"].get<std::string>() << "," << s["point"].get<double>() << ","
          << s["lower"].get<double>() << "," << s["upper"].get<double>() << "\n";
  }
}

}  // namespace mse

#endif  // MSE_REPORT_HPP
