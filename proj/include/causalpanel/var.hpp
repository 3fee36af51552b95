#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "causalpanel/graph.hpp"
#include "causalpanel/panel.hpp"
#include "causalpanel/stats.hpp"

namespace causalpanel {

// Observations stacked across entities; lagged regressors never cross an
// entity boundary (the first trim years of each entity are dropped).
struct StackedDesign {
  Eigen::MatrixXd Y;  // n x k
  Eigen::MatrixXd X;  // n x (k*p + 1); col 0 intercept, then lag-major blocks
  std::vector<std::string> x_names;
  int k = 0;
  int p = 0;
};

inline StackedDesign build_design(const PanelDataset& data, int p, int trim = -1) {
  if (p < 1) throw ConfigError("lag order must be >= 1");
  if (trim < p) trim = p;
  const auto k = static_cast<int>(data.n_vars());
  const auto t_len = data.n_years();
  if (t_len <= static_cast<std::size_t>(trim))
    throw DataError("not enough years for lag order " + std::to_string(trim));

  std::vector<std::pair<std::size_t, std::size_t>> rows;  // (entity, time)
  for (std::size_t i = 0; i < data.n_entities(); ++i)
    for (std::size_t t = static_cast<std::size_t>(trim); t < t_len; ++t) {
      bool ok = true;
      for (int j = 0; j <= trim && ok; ++j)
        for (int v = 0; v < k && ok; ++v)
          ok = data.has(i, t - static_cast<std::size_t>(j), static_cast<std::size_t>(v));
      if (ok) rows.emplace_back(i, t);
    }
  if (rows.empty()) throw DataError("stacked design is empty");

  StackedDesign d;
  d.k = k;
  d.p = p;
  const long n = static_cast<long>(rows.size());
  d.Y.resize(n, k);
  d.X.resize(n, 1 + k * p);
  d.x_names.push_back("const");
  for (int lag = 1; lag <= p; ++lag)
    for (int v = 0; v < k; ++v)
      d.x_names.push_back(data.variables[static_cast<std::size_t>(v)] + "[-" +
                          std::to_string(lag) + "]");
  for (long r = 0; r < n; ++r) {
    auto [i, t] = rows[static_cast<std::size_t>(r)];
    for (int v = 0; v < k; ++v)
      d.Y(r, v) = data.value(i, t, static_cast<std::size_t>(v));
    d.X(r, 0) = 1.0;
    for (int lag = 1; lag <= p; ++lag)
      for (int v = 0; v < k; ++v)
        d.X(r, 1 + (lag - 1) * k + v) =
            data.value(i, t - static_cast<std::size_t>(lag), static_cast<std::size_t>(v));
  }
  return d;
}

struct VarModel {
  int k = 0;
  int p = 0;
  std::vector<std::string> variables;
  Eigen::VectorXd intercept;              // k
  std::vector<Eigen::MatrixXd> coeffs;    // p matrices, (response, driver)
  std::vector<Eigen::MatrixXd> coeff_se;  // matching standard errors
  Eigen::VectorXd intercept_se;
  Eigen::MatrixXd sigma;  // residual covariance, k x k
  long nobs = 0;
  long dof_resid = 0;
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  double spectral_radius = 0.0;
  bool stable = true;

  Eigen::MatrixXd companion() const {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(k * p, k * p);
    for (int lag = 0; lag < p; ++lag)
      c.block(0, lag * k, k, k) = coeffs[static_cast<std::size_t>(lag)];
    if (p > 1)
      c.block(k, 0, k * (p - 1), k * (p - 1)) =
          Eigen::MatrixXd::Identity(k * (p - 1), k * (p - 1));
    return c;
  }
};

namespace detail {

inline VarModel fit_design(const StackedDesign& d,
                           const std::vector<std::string>& variables) {
  const int k = d.k, p = d.p;
  const long n = d.Y.rows();
  const long ncoef = d.X.cols();
  if (ncoef >= n)
    throw DataError("too few stacked observations (" + std::to_string(n) +
                    ") for " + std::to_string(ncoef) + " coefficients");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
  qr.setThreshold(1e-10);
  if (qr.rank() < ncoef) {
    const auto perm = qr.colsPermutation().indices();
    std::string msg = "rank-deficient regressor matrix; collinear columns:";
    for (long i = qr.rank(); i < ncoef; ++i)
      msg += " " + d.x_names[static_cast<std::size_t>(perm[i])];
    throw NumericError(msg);
  }
  Eigen::MatrixXd B = qr.solve(d.Y);  // ncoef x k
  Eigen::MatrixXd E = d.Y - d.X * B;

  VarModel m;
  m.k = k;
  m.p = p;
  m.variables = variables;
  m.nobs = n;
  m.dof_resid = n - ncoef;
  m.sigma = (E.transpose() * E) / static_cast<double>(m.dof_resid);

  m.intercept = B.row(0).transpose();
  for (int lag = 0; lag < p; ++lag)
    m.coeffs.push_back(B.block(1 + lag * k, 0, k, k).transpose());

  Eigen::MatrixXd xtx_inv = (d.X.transpose() * d.X).inverse();
  Eigen::VectorXd xtx_diag = xtx_inv.diagonal();
  m.intercept_se.resize(k);
  for (int j = 0; j < k; ++j)
    m.intercept_se(j) = std::sqrt(m.sigma(j, j) * xtx_diag(0));
  for (int lag = 0; lag < p; ++lag) {
    Eigen::MatrixXd se(k, k);
    for (int j = 0; j < k; ++j)
      for (int v = 0; v < k; ++v)
        se(j, v) = std::sqrt(m.sigma(j, j) * xtx_diag(1 + lag * k + v));
    m.coeff_se.push_back(se);
  }

  // System Gaussian log-likelihood with the MLE covariance.
  Eigen::MatrixXd sigma_mle = (E.transpose() * E) / static_cast<double>(n);
  double logdet = std::log(sigma_mle.determinant());
  if (!std::isfinite(logdet))
    throw NumericError("residual covariance is singular");
  m.loglik = -0.5 * static_cast<double>(n) *
             (k * std::log(2.0 * std::numbers::pi) + logdet + k);
  const double npar = static_cast<double>(k) * static_cast<double>(ncoef);
  m.aic = -2.0 * m.loglik + 2.0 * npar;
  m.bic = -2.0 * m.loglik + std::log(static_cast<double>(n)) * npar;

  Eigen::VectorXcd eig = m.companion().eigenvalues();
  m.spectral_radius = eig.cwiseAbs().maxCoeff();
  m.stable = m.spectral_radius < 1.0;
  return m;
}

}  // namespace detail

// Pooled per-equation OLS on demeaned, differenced data.
inline VarModel estimate_var(const PanelDataset& data, int p) {
  StackedDesign d = build_design(data, p);
  return detail::fit_design(d, data.variables);
}

struct LagSelection {
  struct Row {
    int p;
    double aic;
    double bic;
  };
  std::vector<Row> table;
  int chosen_p = 1;
};

// Criteria are compared on a common sample trimmed to p_max.
inline LagSelection select_lag(const PanelDataset& data, int p_max) {
  if (p_max < 1) throw ConfigError("p_max must be >= 1");
  LagSelection sel;
  double best = std::numeric_limits<double>::infinity();
  for (int p = 1; p <= p_max; ++p) {
    StackedDesign d = build_design(data, p, p_max);
    VarModel m = detail::fit_design(d, data.variables);
    sel.table.push_back({p, m.aic, m.bic});
    if (m.aic < best) {  // strict: ties keep the smaller p
      best = m.aic;
      sel.chosen_p = p;
    }
  }
  return sel;
}

struct GrangerResult {
  std::string source;
  std::string target;
  double f_stat = 0.0;
  double p_value = 1.0;
  int df_num = 0;
  long df_den = 0;
  bool significant = false;
};

// Nested-model F test: the restricted equation omits all p lags of source
// from the target equation.
inline GrangerResult granger_test(const VarModel& model, const PanelDataset& data,
                                  const std::string& source,
                                  const std::string& target,
                                  double alpha = 0.05) {
  if (source == target) throw ConfigError("granger_test: source equals target");
  StackedDesign d = build_design(data, model.p);
  const int k = d.k, p = d.p;
  const auto src = static_cast<int>(data.var_index(source));
  const auto tgt = static_cast<long>(data.var_index(target));

  Eigen::VectorXd y = d.Y.col(tgt);
  OlsFit unres = ols(d.X, y, &d.x_names);

  Eigen::MatrixXd xr(d.X.rows(), d.X.cols() - p);
  std::vector<std::string> xr_names;
  long c = 0;
  for (long j = 0; j < d.X.cols(); ++j) {
    bool is_source_lag = j >= 1 && ((j - 1) % k) == src;
    if (is_source_lag) continue;
    xr.col(c++) = d.X.col(j);
    xr_names.push_back(d.x_names[static_cast<std::size_t>(j)]);
  }
  OlsFit res = ols(xr, y, &xr_names);

  GrangerResult g;
  g.source = source;
  g.target = target;
  g.df_num = p;
  g.df_den = unres.n - d.X.cols();
  g.f_stat = ((res.ssr - unres.ssr) / static_cast<double>(p)) /
             (unres.ssr / static_cast<double>(g.df_den));
  if (g.f_stat < 0) g.f_stat = 0;  // numerical noise on nested SSRs
  g.p_value = f_pvalue(g.f_stat, g.df_num, static_cast<double>(g.df_den));
  g.significant = g.p_value < alpha;
  return g;
}

inline std::vector<GrangerResult> granger_all(const VarModel& model,
                                              const PanelDataset& data,
                                              double alpha = 0.05) {
  std::vector<GrangerResult> out;
  for (const auto& src : data.variables)
    for (const auto& tgt : data.variables)
      if (src != tgt) out.push_back(granger_test(model, data, src, tgt, alpha));
  return out;
}

// One directed edge per significant ordered pair. The edge is annotated with
// the lag carrying the largest absolute coefficient of the source in the
// target equation.
inline CausalGraph granger_network(const VarModel& model, const PanelDataset& data,
                                   double alpha) {
  if (alpha < 0.0 || alpha >= 1.0)
    throw ConfigError("alpha must be in [0,1)");
  CausalGraph g;
  g.nodes = data.variables;
  for (const auto& r : granger_all(model, data, alpha)) {
    if (!r.significant) continue;
    auto src = data.var_index(r.source);
    auto tgt = data.var_index(r.target);
    int best_lag = 1;
    double best = model.coeffs[0](static_cast<long>(tgt), static_cast<long>(src));
    for (int lag = 1; lag < model.p; ++lag) {
      double c = model.coeffs[static_cast<std::size_t>(lag)](
          static_cast<long>(tgt), static_cast<long>(src));
      if (std::fabs(c) > std::fabs(best)) {
        best = c;
        best_lag = lag + 1;
      }
    }
    g.edges.push_back({r.source, r.target, best_lag, best, r.p_value,
                       EdgeKind::Lagged, Provenance::Granger});
  }
  g.check();
  return g;
}

}  // namespace causalpanel
