#ifndef MSE_LOGLIN_HPP
#define MSE_LOGLIN_HPP

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mse/formula.hpp"
#include "mse/schema.hpp"

namespace mse {

struct FitOptions {
  enum class Method { Auto, Newton, Ipf };
  Method method = Method::Auto;
  int max_iterations = 10000;
  double tol_fitted = 1e-10;    // max relative change in fitted means
  double tol_deviance = 1e-8;   // change in deviance
  double parameter_cap = 25.0;  // |estimate| above this flags a boundary fit
};

struct Parameter {
  std::string term;
  double estimate = 0;
  double std_error = std::numeric_limits<double>::quiet_NaN();
  double z = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
  bool at_boundary = false;  // SE suppressed, mirroring starred table entries
};

/// Maximum-likelihood Poisson loglinear fit on a completed count array.
struct FittedLoglinear {
  std::vector<Parameter> parameters;
  Eigen::VectorXd beta;
  Eigen::VectorXd fitted;  // all cells; exactly 0 on structural zeros
  double deviance = 0;
  bool converged = false;
  int iterations = 0;
  Eigen::MatrixXd covariance;
  FitOptions::Method method_used = FitOptions::Method::Newton;
};

/// Deviance scaled to a notional population of 1,000: deviance / (n/1000).
inline double deviance_normed(double deviance, double n_observed) {
  if (n_observed <= 0) throw FitError("normed deviance needs n > 0");
  return deviance / (n_observed / 1000.0);
}

namespace detail {

inline double poisson_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu,
                               const std::vector<char>& sz) {
  double d = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (sz[static_cast<std::size_t>(i)]) continue;
    if (y[i] > 0) d += y[i] * std::log(y[i] / mu[i]);
    d -= y[i] - mu[i];
  }
  return 2.0 * d;
}

inline double normal_sf2(double z) {  // two-sided tail probability
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

/// IPF on the maximal-term margins; warm-startable. Returns max relative
/// margin discrepancy after the final sweep.
inline double ipf_sweeps(const ModelMatrix& mm, const Eigen::VectorXd& target,
                         const std::vector<char>& sz, Eigen::VectorXd& mu, int sweeps) {
  const double total = target.sum();
  double maxdiff = 0;
  for (int s = 0; s < sweeps; ++s) {
    maxdiff = 0;
    for (std::size_t t = 0; t < mm.margin_gid.size(); ++t) {
      const auto& gid = mm.margin_gid[t];
      const int ng = mm.margin_groups[t];
      std::vector<double> obs(ng, 0.0), fit(ng, 0.0);
      for (Eigen::Index c = 0; c < target.size(); ++c) {
        obs[gid[static_cast<std::size_t>(c)]] += target[c];
        fit[gid[static_cast<std::size_t>(c)]] += mu[c];
      }
      std::vector<double> f(ng, 0.0);
      for (int g = 0; g < ng; ++g) {
        f[g] = fit[g] > 0 ? obs[g] / fit[g] : 0.0;
        maxdiff = std::max(maxdiff, std::abs(obs[g] - fit[g]) / std::max(total, 1.0));
      }
      for (Eigen::Index c = 0; c < mu.size(); ++c) mu[c] *= f[gid[static_cast<std::size_t>(c)]];
    }
    const double tot = mu.sum();
    if (tot > 0) mu *= total / tot;
    if (maxdiff < 1e-14) break;
  }
  (void)sz;
  return maxdiff;
}

}  // namespace detail

inline FittedLoglinear fit_poisson(const ModelMatrix& mm, const Eigen::VectorXd& counts,
                                   const std::vector<char>& structural_zero,
                                   const FitOptions& opts = {}) {
  const Eigen::Index n = counts.size();
  const Eigen::Index p = mm.design.cols();
  if (static_cast<Eigen::Index>(structural_zero.size()) != n || mm.design.rows() != n)
    throw FitError("dimension mismatch between design, counts and structural zeros");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (counts[i] < 0) throw FitError("negative count");
    if (structural_zero[static_cast<std::size_t>(i)] && counts[i] != 0)
      throw FitError("structural-zero cell carries a nonzero count");
  }

  std::vector<Eigen::Index> obs;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!structural_zero[static_cast<std::size_t>(i)]) obs.push_back(i);
  Eigen::MatrixXd Xo(static_cast<Eigen::Index>(obs.size()), p);
  Eigen::VectorXd yo(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t r = 0; r < obs.size(); ++r) {
    Xo.row(static_cast<Eigen::Index>(r)) = mm.design.row(obs[r]);
    yo[static_cast<Eigen::Index>(r)] = counts[obs[r]];
  }

  FittedLoglinear fit;
  fit.fitted = Eigen::VectorXd::Zero(n);

  const auto finish = [&](const Eigen::VectorXd& beta, bool converged, int iters,
                          FitOptions::Method used) {
    fit.beta = beta;
    fit.converged = converged;
    fit.iterations = iters;
    fit.method_used = used;
    for (Eigen::Index i = 0; i < n; ++i)
      fit.fitted[i] = structural_zero[static_cast<std::size_t>(i)]
                          ? 0.0
                          : std::exp(std::min(mm.design.row(i).dot(beta), 700.0));
    fit.deviance = detail::poisson_deviance(counts, fit.fitted, structural_zero);

    // Expected Fisher information at the optimum.
    Eigen::VectorXd mu_o = (Xo * beta).array().min(700.0).exp();
    Eigen::MatrixXd info = Xo.transpose() * mu_o.asDiagonal() * Xo;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    bool have_cov = ldlt.info() == Eigen::Success;
    if (have_cov) fit.covariance = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    fit.parameters.resize(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
      Parameter& par = fit.parameters[static_cast<std::size_t>(j)];
      par.term = mm.term_names[static_cast<std::size_t>(j)];
      par.estimate = beta[j];
      par.at_boundary = std::abs(beta[j]) >= opts.parameter_cap - 1e-9;
      if (have_cov && !par.at_boundary && fit.covariance(j, j) > 0) {
        par.std_error = std::sqrt(fit.covariance(j, j));
        par.z = par.estimate / par.std_error;
        par.p_value = detail::normal_sf2(par.z);
      }
    }
    return fit;
  };

  const auto try_newton = [&]() -> bool {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    beta[0] = std::log(std::max(yo.mean(), 1e-8));
    const auto dev_of = [&](const Eigen::VectorXd& b) {
      Eigen::VectorXd mu = (Xo * b).array().min(700.0).exp();
      double d = 0;
      for (Eigen::Index i = 0; i < yo.size(); ++i) {
        if (yo[i] > 0) d += yo[i] * std::log(yo[i] / mu[i]);
        d -= yo[i] - mu[i];
      }
      return 2 * d;
    };
    double dev = dev_of(beta);
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
      Eigen::VectorXd mu = (Xo * beta).array().min(700.0).exp();
      Eigen::VectorXd grad = Xo.transpose() * (yo - mu);
      Eigen::MatrixXd hess = Xo.transpose() * mu.asDiagonal() * Xo;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
      if (ldlt.info() != Eigen::Success) return false;
      Eigen::VectorXd step = ldlt.solve(grad);
      if (!step.allFinite()) return false;
      double t = 1.0;
      Eigen::VectorXd nb;
      double nd = dev;
      for (int h = 0; h < 50; ++h, t /= 2) {
        nb = (beta + t * step).cwiseMax(-opts.parameter_cap).cwiseMin(opts.parameter_cap);
        nd = dev_of(nb);
        if (nd <= dev + 1e-9) break;
      }
      Eigen::VectorXd nmu = (Xo * nb).array().min(700.0).exp();
      const double relmu = ((nmu - mu).cwiseAbs().cwiseQuotient(mu.cwiseMax(1e-12))).maxCoeff();
      const bool done = std::abs(dev - nd) < opts.tol_deviance && relmu < opts.tol_fitted;
      beta = nb;
      dev = nd;
      if (done) {
        finish(beta, true, it + 1, FitOptions::Method::Newton);
        return true;
      }
    }
    if (opts.method == FitOptions::Method::Newton) {
      finish(beta, false, it, FitOptions::Method::Newton);
      return true;  // caller asked for Newton explicitly; report non-convergence
    }
    return false;
  };

  const auto run_ipf = [&]() {
    Eigen::VectorXd mu(n);
    for (Eigen::Index i = 0; i < n; ++i)
      mu[i] = structural_zero[static_cast<std::size_t>(i)] ? 0.0 : 1.0;
    mu *= counts.sum() / mu.sum();
    int it = 0;
    double diff = 1;
    for (; it < opts.max_iterations && diff > 1e-13; ++it)
      diff = detail::ipf_sweeps(mm, counts, structural_zero, mu, 1);
    // Recover treatment-coded parameters from the fitted table.
    std::vector<Eigen::Index> pos;
    for (Eigen::Index i : obs)
      if (mu[i] > 0) pos.push_back(i);
    Eigen::MatrixXd Xp(static_cast<Eigen::Index>(pos.size()), p);
    Eigen::VectorXd lp(static_cast<Eigen::Index>(pos.size()));
    for (std::size_t r = 0; r < pos.size(); ++r) {
      Xp.row(static_cast<Eigen::Index>(r)) = mm.design.row(pos[r]);
      lp[static_cast<Eigen::Index>(r)] = std::log(mu[pos[r]]);
    }
    Eigen::VectorXd beta = Xp.colPivHouseholderQr().solve(lp);
    beta = beta.cwiseMax(-opts.parameter_cap).cwiseMin(opts.parameter_cap);
    finish(beta, diff <= 1e-10, it, FitOptions::Method::Ipf);
    // Keep the IPF means verbatim; exp(X beta) may differ when the fit sits
    // on the boundary of the parameter space.
    for (Eigen::Index i = 0; i < n; ++i)
      fit.fitted[i] = structural_zero[static_cast<std::size_t>(i)] ? 0.0 : mu[i];
    fit.deviance = detail::poisson_deviance(counts, fit.fitted, structural_zero);
  };

  switch (opts.method) {
    case FitOptions::Method::Newton:
      try_newton();
      break;
    case FitOptions::Method::Ipf:
      run_ipf();
      break;
    case FitOptions::Method::Auto:
      if (!try_newton()) run_ipf();
      break;
  }
  if (!fit.converged && opts.method != FitOptions::Method::Auto && fit.iterations >= opts.max_iterations)
    return fit;  // non-convergence reported through the flag
  return fit;
}

}  // namespace mse

#endif  // MSE_LOGLIN_HPP
