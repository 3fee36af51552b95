#pragma once

#include <Eigen/Cholesky>
#include <atomic>
#include <cmath>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "causalpanel/preprocess.hpp"
#include "causalpanel/stats.hpp"
#include "causalpanel/var.hpp"

namespace causalpanel {

// Responses are in response-variable units per one-standard-deviation
// orthogonalized shock; entry (h, impulse, response).
struct IrfResult {
  int horizon = 0;
  std::vector<std::string> ordering;
  std::vector<std::string> variables;
  std::vector<Eigen::MatrixXd> point;  // per h, (response, impulse)
  std::vector<Eigen::MatrixXd> ci_lower;
  std::vector<Eigen::MatrixXd> ci_upper;
  bool has_bands = false;
  long bootstrap_reps = 0;
  long failed_reps = 0;

  double response(int h, std::size_t impulse, std::size_t resp) const {
    return point[static_cast<std::size_t>(h)](static_cast<long>(resp),
                                              static_cast<long>(impulse));
  }
};

struct FevdResult {
  int horizon = 0;
  std::vector<std::string> ordering;
  std::vector<std::string> variables;
  std::vector<Eigen::MatrixXd> shares;  // per h, (variable, shock)
};

namespace detail {

// Lower Cholesky factor of sigma under the given variable ordering,
// expressed back in the model's native variable order.
inline Eigen::MatrixXd ordered_cholesky(const VarModel& model,
                                        const std::vector<std::string>& ordering,
                                        double ridge) {
  const int k = model.k;
  if (static_cast<int>(ordering.size()) != k)
    throw ConfigError("ordering must list every variable exactly once");
  std::vector<long> ord(ordering.size());
  std::vector<bool> used(static_cast<std::size_t>(k), false);
  for (std::size_t a = 0; a < ordering.size(); ++a) {
    auto it = std::find(model.variables.begin(), model.variables.end(), ordering[a]);
    if (it == model.variables.end())
      throw ConfigError("ordering names unknown variable: " + ordering[a]);
    long j = it - model.variables.begin();
    if (used[static_cast<std::size_t>(j)])
      throw ConfigError("ordering repeats variable: " + ordering[a]);
    used[static_cast<std::size_t>(j)] = true;
    ord[a] = j;
  }
  Eigen::MatrixXd sig = model.sigma;
  if (ridge > 0) sig += ridge * Eigen::MatrixXd::Identity(k, k);
  Eigen::MatrixXd perm(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) perm(a, b) = sig(ord[a], ord[b]);
  Eigen::LLT<Eigen::MatrixXd> llt(perm);
  if (llt.info() != Eigen::Success)
    throw NumericError(
        "residual covariance is not positive definite; a small diagonal ridge "
        "can be enabled via the ridge parameter");
  Eigen::MatrixXd lp = llt.matrixL();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) l(ord[a], ord[b]) = lp(a, b);
  return l;
}

// MA coefficients Psi_h from the companion-form recursion.
inline std::vector<Eigen::MatrixXd> ma_coefficients(const VarModel& model,
                                                    int horizon) {
  std::vector<Eigen::MatrixXd> psi;
  psi.push_back(Eigen::MatrixXd::Identity(model.k, model.k));
  for (int h = 1; h <= horizon; ++h) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(model.k, model.k);
    for (int j = 1; j <= std::min(h, model.p); ++j)
      m += model.coeffs[static_cast<std::size_t>(j - 1)] *
           psi[static_cast<std::size_t>(h - j)];
    psi.push_back(m);
  }
  return psi;
}

}  // namespace detail

inline IrfResult impulse_response(const VarModel& model, int horizon,
                                  const std::vector<std::string>& ordering,
                                  double ridge = 0.0) {
  if (horizon < 0) throw ConfigError("horizon must be >= 0");
  Eigen::MatrixXd l = detail::ordered_cholesky(model, ordering, ridge);
  auto psi = detail::ma_coefficients(model, horizon);
  IrfResult irf;
  irf.horizon = horizon;
  irf.ordering = ordering;
  irf.variables = model.variables;
  for (int h = 0; h <= horizon; ++h)
    irf.point.push_back(psi[static_cast<std::size_t>(h)] * l);
  return irf;
}

// shares[h](j, s) = cumulative squared orthogonalized response of j to shock
// s, normalized over shocks.
inline FevdResult fevd(const VarModel& model, int horizon,
                       const std::vector<std::string>& ordering,
                       double ridge = 0.0) {
  IrfResult irf = impulse_response(model, horizon, ordering, ridge);
  FevdResult out;
  out.horizon = horizon;
  out.ordering = ordering;
  out.variables = model.variables;
  Eigen::MatrixXd cum = Eigen::MatrixXd::Zero(model.k, model.k);
  for (int h = 0; h <= horizon; ++h) {
    cum += irf.point[static_cast<std::size_t>(h)].cwiseAbs2();
    Eigen::MatrixXd shares(model.k, model.k);
    for (int j = 0; j < model.k; ++j) {
      double total = cum.row(j).sum();
      if (total <= 0) throw NumericError("fevd: zero forecast-error variance");
      shares.row(j) = cum.row(j) / total;
    }
    out.shares.push_back(shares);
  }
  return out;
}

struct BootstrapOptions {
  long reps = 200;
  std::uint64_t seed = 0;
  int threads = 1;
  double lower_q = 0.025;
  double upper_q = 0.975;
  double ridge = 0.0;
  double max_failure_fraction = 0.10;
};

// Country-block bootstrap: each replicate resamples entire entity series
// with replacement from the differenced (pre-demeaning) panel, then reruns
// within_transform + estimate_var + impulse_response. Replicates are merged
// by index, so results do not depend on the thread count.
inline IrfResult bootstrap_irf(const PanelDataset& differenced, int p, int horizon,
                               const std::vector<std::string>& ordering,
                               const BootstrapOptions& opt) {
  if (opt.reps < 2) throw ConfigError("bootstrap reps must be >= 2");
  PanelDataset demeaned = within_transform(differenced);
  VarModel model = estimate_var(demeaned, p);
  IrfResult irf = impulse_response(model, horizon, ordering, opt.ridge);
  irf.bootstrap_reps = opt.reps;

  const std::size_t n_ent = differenced.n_entities();
  std::vector<std::optional<IrfResult>> draws(static_cast<std::size_t>(opt.reps));
  parallel_for(static_cast<std::size_t>(opt.reps), opt.threads, [&](std::size_t r) {
    auto rng = replicate_rng(opt.seed, r);
    std::uniform_int_distribution<std::size_t> pick(0, n_ent - 1);
    std::vector<std::size_t> idx(n_ent);
    std::vector<std::string> names(n_ent);
    for (std::size_t j = 0; j < n_ent; ++j) {
      idx[j] = pick(rng);
      names[j] = differenced.entities[idx[j]] + "#" + std::to_string(j);
    }
    try {
      PanelDataset sample = subset_entities(differenced, idx, &names);
      VarModel m = estimate_var(within_transform(sample), p);
      draws[r] = impulse_response(m, horizon, ordering, opt.ridge);
    } catch (const std::exception&) {
      // rank-deficient or otherwise degenerate replicate; counted below
    }
  });

  long failed = 0;
  for (const auto& d : draws) failed += !d.has_value();
  irf.failed_reps = failed;
  if (static_cast<double>(failed) >
      opt.max_failure_fraction * static_cast<double>(opt.reps))
    throw NumericError("bootstrap: " + std::to_string(failed) + " of " +
                       std::to_string(opt.reps) + " replicates failed");

  const int k = model.k;
  for (int h = 0; h <= horizon; ++h) {
    Eigen::MatrixXd lo(k, k), hi(k, k);
    for (int resp = 0; resp < k; ++resp)
      for (int imp = 0; imp < k; ++imp) {
        std::vector<double> vals;
        vals.reserve(static_cast<std::size_t>(opt.reps));
        for (const auto& d : draws)
          if (d) vals.push_back((*d).point[static_cast<std::size_t>(h)](resp, imp));
        double l = percentile(vals, opt.lower_q);
        double u = percentile(vals, opt.upper_q);
        double pt = irf.point[static_cast<std::size_t>(h)](resp, imp);
        lo(resp, imp) = std::min(l, pt);
        hi(resp, imp) = std::max(u, pt);
      }
    irf.ci_lower.push_back(lo);
    irf.ci_upper.push_back(hi);
  }
  irf.has_bands = true;
  return irf;
}

}  // namespace causalpanel
