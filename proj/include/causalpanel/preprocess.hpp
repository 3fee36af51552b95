#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalpanel/panel.hpp"
#include "causalpanel/stats.hpp"

namespace causalpanel {

struct AdfResult {
  double stat = 0.0;
  double p = 1.0;
  int lags_used = 0;
  bool reject = false;
};

struct TransformStep {
  std::string operation;
  nlohmann::json params;
  long rows_lost = 0;
};

// Audit trail for the stationarity pipeline; rows-lost accounting must
// reconcile input and output observation counts.
struct TransformLog {
  std::vector<TransformStep> steps;
  struct VarAdf {
    std::string variable;
    double median_stat = 0.0;
    double median_p = 1.0;
    int lags_used = 0;
    double reject_fraction = 0.0;
    bool reject = false;
  };
  std::vector<VarAdf> adf_results;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["steps"] = nlohmann::json::array();
    for (const auto& s : steps)
      j["steps"].push_back({{"operation", s.operation},
                            {"params", s.params},
                            {"rows_lost", s.rows_lost}});
    j["adf"] = nlohmann::json::array();
    for (const auto& a : adf_results)
      j["adf"].push_back({{"variable", a.variable},
                          {"median_stat", a.median_stat},
                          {"median_p", a.median_p},
                          {"lags_used", a.lags_used},
                          {"reject_fraction", a.reject_fraction},
                          {"reject", a.reject}});
    return j;
  }
};

inline std::size_t observed_cells(const PanelDataset& d) {
  return d.values.size() - d.missing_count();
}

// value[i][t][k] = x[i][t][k] - x[i][t-1][k]; a difference across a missing
// cell is missing. Entities left without any consecutive pair are dropped.
inline PanelDataset first_difference(const PanelDataset& data,
                                     TransformLog* log = nullptr) {
  if (data.n_years() < 2) throw DataError("first_difference: need at least 2 years");
  std::vector<std::size_t> keep;
  std::vector<std::string> dropped;
  for (std::size_t i = 0; i < data.n_entities(); ++i) {
    bool any = false;
    for (std::size_t t = 1; t < data.n_years() && !any; ++t)
      for (std::size_t k = 0; k < data.n_vars() && !any; ++k)
        any = data.has(i, t, k) && data.has(i, t - 1, k);
    if (any) keep.push_back(i);
    else dropped.push_back(data.entities[i]);
  }
  if (keep.empty()) throw DataError("first_difference: no entity has 2 consecutive observations");

  PanelDataset src = subset_entities(data, keep);
  PanelDataset out;
  out.entities = src.entities;
  out.variables = src.variables;
  out.groups = src.groups;
  out.years.assign(src.years.begin() + 1, src.years.end());
  out.allocate();
  for (std::size_t i = 0; i < src.n_entities(); ++i)
    for (std::size_t t = 1; t < src.n_years(); ++t)
      for (std::size_t k = 0; k < src.n_vars(); ++k)
        if (src.has(i, t, k) && src.has(i, t - 1, k))
          out.set(i, t - 1, k, src.value(i, t, k) - src.value(i, t - 1, k));
  out.validate();
  if (log) {
    TransformStep step;
    step.operation = "first_difference";
    step.params = {{"dropped_entities", dropped}};
    step.rows_lost = static_cast<long>(observed_cells(data)) -
                     static_cast<long>(observed_cells(out));
    log->steps.push_back(step);
  }
  return out;
}

namespace detail {

// ADF regression: dy_t = c + rho*y_{t-1} + sum_j d_j dy_{t-j} + e.
// Returns the t ratio on rho and the fit's AIC for lag selection.
struct AdfFit {
  double tau;
  double aic;
};

inline AdfFit adf_fit(const std::vector<double>& y, int lag, int start) {
  auto n_obs = static_cast<long>(y.size()) - 1 - start;
  long ncoef = 2 + lag;
  Eigen::MatrixXd X(n_obs, ncoef);
  Eigen::VectorXd dy(n_obs);
  for (long r = 0; r < n_obs; ++r) {
    auto t = static_cast<std::size_t>(start + 1 + r);
    dy(r) = y[t] - y[t - 1];
    X(r, 0) = 1.0;
    X(r, 1) = y[t - 1];
    for (int j = 1; j <= lag; ++j)
      X(r, 1 + j) = y[t - j] - y[t - j - 1];
  }
  OlsFit fit = ols(X, dy);
  double dof = static_cast<double>(n_obs - ncoef);
  if (dof <= 0) throw NumericError("adf_test: not enough observations");
  double sigma2 = fit.ssr / dof;
  Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();
  double se = std::sqrt(sigma2 * xtx_inv(1, 1));
  double tau = fit.coef(1) / se;
  double aic = static_cast<double>(n_obs) *
                   std::log(fit.ssr / static_cast<double>(n_obs)) +
               2.0 * static_cast<double>(ncoef);
  return {tau, aic};
}

}  // namespace detail

// Augmented Dickey-Fuller test with constant. max_lag < 0 selects the
// Schwert bound floor(12*(T/100)^0.25); the reported lag minimizes AIC over
// a common estimation sample.
inline AdfResult adf_test(const std::vector<double>& series, int max_lag = -1,
                          double alpha = 0.05) {
  auto t_len = static_cast<long>(series.size());
  if (max_lag < 0)
    max_lag = static_cast<int>(
        std::floor(12.0 * std::pow(static_cast<double>(t_len) / 100.0, 0.25)));
  if (t_len <= max_lag + 3) {
    max_lag = static_cast<int>(t_len) - 4;
    if (max_lag < 0) throw DataError("adf_test: series too short");
  }
  double m = 0;
  for (double v : series) m += v;
  m /= static_cast<double>(t_len);
  double var = 0;
  for (double v : series) var += (v - m) * (v - m);
  if (var < 1e-14) throw NumericError("adf_test: zero variance");

  int best_lag = 0;
  double best_aic = std::numeric_limits<double>::infinity();
  for (int lag = 0; lag <= max_lag; ++lag) {
    auto fit = detail::adf_fit(series, lag, max_lag);
    if (fit.aic < best_aic) {
      best_aic = fit.aic;
      best_lag = lag;
    }
  }
  auto fit = detail::adf_fit(series, best_lag, best_lag);
  AdfResult res;
  res.stat = fit.tau;
  res.p = mackinnon_pvalue_const(fit.tau);
  res.lags_used = best_lag;
  res.reject = res.p < alpha;
  return res;
}

// Per-entity per-variable demeaning over observed cells (fixed-effects
// removal on a balanced post-clean panel).
inline PanelDataset within_transform(const PanelDataset& data,
                                     TransformLog* log = nullptr) {
  PanelDataset out = data;
  for (std::size_t i = 0; i < data.n_entities(); ++i)
    for (std::size_t k = 0; k < data.n_vars(); ++k) {
      double sum = 0;
      std::size_t n = 0;
      for (std::size_t t = 0; t < data.n_years(); ++t)
        if (data.has(i, t, k)) {
          sum += data.value(i, t, k);
          ++n;
        }
      if (n == 0) continue;
      double mean = sum / static_cast<double>(n);
      for (std::size_t t = 0; t < data.n_years(); ++t)
        if (data.has(i, t, k)) out.set(i, t, k, data.value(i, t, k) - mean);
    }
  if (log) {
    TransformStep step;
    step.operation = "within_transform";
    step.params = nlohmann::json::object();
    step.rows_lost = 0;
    log->steps.push_back(step);
  }
  return out;
}

// Runs the ADF test on every entity series of each variable and aggregates
// medians; used for the stationarity report after differencing.
inline void adf_report(const PanelDataset& data, double alpha,
                       TransformLog& log) {
  for (std::size_t k = 0; k < data.n_vars(); ++k) {
    std::vector<double> stats, ps;
    std::vector<int> lags;
    std::size_t rejects = 0, tested = 0;
    for (std::size_t i = 0; i < data.n_entities(); ++i) {
      std::vector<double> series;
      for (std::size_t t = 0; t < data.n_years(); ++t)
        if (data.has(i, t, k)) series.push_back(data.value(i, t, k));
      if (series.size() < 8) continue;
      try {
        AdfResult r = adf_test(series, -1, alpha);
        stats.push_back(r.stat);
        ps.push_back(r.p);
        lags.push_back(r.lags_used);
        rejects += r.reject;
        ++tested;
      } catch (const NumericError&) {
        // constant series; skip
      }
    }
    TransformLog::VarAdf agg;
    agg.variable = data.variables[k];
    if (tested > 0) {
      agg.median_stat = percentile(stats, 0.5);
      agg.median_p = percentile(ps, 0.5);
      agg.lags_used = lags[lags.size() / 2];
      agg.reject_fraction =
          static_cast<double>(rejects) / static_cast<double>(tested);
      agg.reject = agg.median_p < alpha;
    }
    log.adf_results.push_back(agg);
  }
}

}  // namespace causalpanel
