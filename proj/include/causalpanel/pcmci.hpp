#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "causalpanel/graph.hpp"
#include "causalpanel/panel.hpp"
#include "causalpanel/stats.hpp"

namespace causalpanel {

struct CiTestResult {
  double statistic = 0.0;  // partial correlation
  double p_value = 1.0;
  std::vector<std::pair<int, int>> conditioning_set;  // (variable, lag)
  long sample_size = 0;
};

// Partial correlation of x and y given Z: correlation of the OLS residuals
// of each on [1 Z], with the analytic t transform.
inline CiTestResult parcorr_test(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                 const Eigen::MatrixXd& z) {
  const long n = x.size();
  if (y.size() != n || (z.cols() > 0 && z.rows() != n))
    throw ConfigError("parcorr_test: length mismatch");
  const long dz = z.cols();
  if (n <= dz + 3) throw DataError("parcorr_test: sample too small for conditioning set");

  Eigen::MatrixXd design(n, dz + 1);
  design.col(0).setOnes();
  if (dz > 0) design.rightCols(dz) = z;
  Eigen::VectorXd rx = ols_residuals(design, x);
  Eigen::VectorXd ry = ols_residuals(design, y);

  double sx = rx.norm(), sy = ry.norm();
  if (sx < 1e-12 || sy < 1e-12)
    throw NumericError("parcorr_test: degenerate after conditioning");
  double r = rx.dot(ry) / (sx * sy);
  r = std::clamp(r, -1.0, 1.0);

  CiTestResult res;
  res.statistic = r;
  res.sample_size = n;
  double df = static_cast<double>(n - dz - 2);
  if (std::fabs(r) >= 1.0 - 1e-15) {
    res.p_value = 0.0;
  } else {
    double t = r * std::sqrt(df / (1.0 - r * r));
    res.p_value = t_pvalue_two_sided(t, df);
  }
  return res;
}

// Stacked lagged view of a demeaned panel: column (variable, lag) holds the
// variable at t-lag; rows never cross entity boundaries.
struct LaggedPanel {
  std::vector<std::string> variables;
  int k = 0;
  int max_window = 0;
  Eigen::MatrixXd cols;  // n x (k * (max_window + 1))

  Eigen::VectorXd col(int var, int lag) const {
    return cols.col(static_cast<long>(lag) * k + var);
  }
  Eigen::MatrixXd cond_matrix(const std::vector<std::pair<int, int>>& zs) const {
    Eigen::MatrixXd z(cols.rows(), static_cast<long>(zs.size()));
    for (std::size_t j = 0; j < zs.size(); ++j)
      z.col(static_cast<long>(j)) = col(zs[j].first, zs[j].second);
    return z;
  }
};

inline LaggedPanel build_lagged_panel(const PanelDataset& data, int max_window) {
  if (max_window < 1) throw ConfigError("max lag window must be >= 1");
  LaggedPanel lp;
  lp.variables = data.variables;
  lp.k = static_cast<int>(data.n_vars());
  lp.max_window = max_window;
  std::vector<std::pair<std::size_t, std::size_t>> rows;
  for (std::size_t i = 0; i < data.n_entities(); ++i)
    for (std::size_t t = static_cast<std::size_t>(max_window); t < data.n_years(); ++t) {
      bool ok = true;
      for (int j = 0; j <= max_window && ok; ++j)
        for (int v = 0; v < lp.k && ok; ++v)
          ok = data.has(i, t - static_cast<std::size_t>(j), static_cast<std::size_t>(v));
      if (ok) rows.emplace_back(i, t);
    }
  if (rows.size() < 10) throw DataError("lagged panel: too few complete windows");
  lp.cols.resize(static_cast<long>(rows.size()), static_cast<long>(lp.k * (max_window + 1)));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto [i, t] = rows[r];
    for (int lag = 0; lag <= max_window; ++lag)
      for (int v = 0; v < lp.k; ++v)
        lp.cols(static_cast<long>(r), static_cast<long>(lag) * lp.k + v) =
            data.value(i, t - static_cast<std::size_t>(lag), static_cast<std::size_t>(v));
  }
  return lp;
}

struct Parent {
  int var = 0;
  int lag = 1;
  double r = 0.0;
  double p = 1.0;
};

// PC1 condition-selection phase: iteratively prunes the lagged candidate
// pool, conditioning each candidate on the q strongest remaining others with
// q growing per pass. Survivors are sorted by |r| descending.
inline std::vector<Parent> pc1_parents(const LaggedPanel& lp, int target,
                                       int tau_max, double alpha_pc,
                                       int max_conds = 10) {
  if (tau_max < 1 || tau_max > lp.max_window)
    throw ConfigError("tau_max out of range for lagged panel");
  Eigen::VectorXd y = lp.col(target, 0);

  std::vector<Parent> cands;
  for (int v = 0; v < lp.k; ++v)
    for (int lag = 1; lag <= tau_max; ++lag) cands.push_back({v, lag, 0.0, 1.0});

  // marginal pass
  std::vector<Parent> kept;
  for (auto c : cands) {
    CiTestResult t = parcorr_test(lp.col(c.var, c.lag), y, Eigen::MatrixXd(lp.cols.rows(), 0));
    if (t.p_value > alpha_pc) continue;
    c.r = t.statistic;
    c.p = t.p_value;
    kept.push_back(c);
  }
  auto by_strength = [](const Parent& a, const Parent& b) {
    if (std::fabs(a.r) != std::fabs(b.r)) return std::fabs(a.r) > std::fabs(b.r);
    if (a.var != b.var) return a.var < b.var;
    return a.lag < b.lag;
  };
  std::sort(kept.begin(), kept.end(), by_strength);

  for (int q = 1; q <= max_conds; ++q) {
    if (static_cast<int>(kept.size()) - 1 < q) break;
    std::vector<Parent> next;
    bool removed = false;
    for (std::size_t ci = 0; ci < kept.size(); ++ci) {
      std::vector<std::pair<int, int>> zs;
      for (std::size_t j = 0; j < kept.size() && static_cast<int>(zs.size()) < q; ++j)
        if (j != ci) zs.emplace_back(kept[j].var, kept[j].lag);
      CiTestResult t =
          parcorr_test(lp.col(kept[ci].var, kept[ci].lag), y, lp.cond_matrix(zs));
      if (t.p_value > alpha_pc) {
        removed = true;
        continue;
      }
      Parent p = kept[ci];
      p.r = t.statistic;
      p.p = t.p_value;
      next.push_back(p);
    }
    std::sort(next.begin(), next.end(), by_strength);
    kept = std::move(next);
    if (!removed) break;
  }
  return kept;
}

namespace pcmci_detail {

struct PairKey {
  int a;
  int b;
  bool operator<(const PairKey& o) const {
    return std::tie(a, b) < std::tie(o.a, o.b);
  }
};

}  // namespace pcmci_detail

// MCI phase: retests every candidate link conditioning on the parents of the
// target and the time-shifted parents of the source. Contemporaneous links
// are oriented by the collider rule with majority voting across triples;
// unresolved pairs land in conflicts.
inline CausalGraph mci_graph(const LaggedPanel& lp,
                             const std::vector<std::vector<Parent>>& parents,
                             int tau_max, double alpha) {
  if (static_cast<int>(parents.size()) != lp.k)
    throw ConfigError("mci_graph: one parent list per variable required");
  CausalGraph g;
  g.nodes = lp.variables;

  auto conditions = [&](int x, int tau, int y) {
    std::set<std::pair<int, int>> zs;
    for (const auto& p : parents[static_cast<std::size_t>(y)]) {
      if (p.var == x && p.lag == tau) continue;
      zs.insert({p.var, p.lag});
    }
    for (const auto& p : parents[static_cast<std::size_t>(x)]) {
      int shifted = p.lag + tau;
      if (shifted <= lp.max_window) zs.insert({p.var, shifted});
    }
    zs.erase({y, 0});
    zs.erase({x, tau});
    return std::vector<std::pair<int, int>>(zs.begin(), zs.end());
  };

  // lagged links
  for (int x = 0; x < lp.k; ++x)
    for (int y = 0; y < lp.k; ++y)
      for (int tau = 1; tau <= tau_max; ++tau) {
        auto zs = conditions(x, tau, y);
        CiTestResult t = parcorr_test(lp.col(x, tau), lp.col(y, 0), lp.cond_matrix(zs));
        if (t.p_value <= alpha)
          g.edges.push_back({lp.variables[static_cast<std::size_t>(x)],
                             lp.variables[static_cast<std::size_t>(y)], tau,
                             t.statistic, t.p_value, EdgeKind::Lagged,
                             Provenance::Pcmci});
      }

  // contemporaneous candidates
  struct Contemp {
    double r;
    double p;
  };
  std::map<pcmci_detail::PairKey, Contemp> adj0;
  std::map<pcmci_detail::PairKey, std::set<std::pair<int, int>>> sepsets;
  for (int x = 0; x < lp.k; ++x)
    for (int y = x + 1; y < lp.k; ++y) {
      std::set<std::pair<int, int>> zs;
      for (const auto& p : parents[static_cast<std::size_t>(x)]) zs.insert({p.var, p.lag});
      for (const auto& p : parents[static_cast<std::size_t>(y)]) zs.insert({p.var, p.lag});
      std::vector<std::pair<int, int>> zv(zs.begin(), zs.end());
      CiTestResult t = parcorr_test(lp.col(x, 0), lp.col(y, 0), lp.cond_matrix(zv));
      if (t.p_value <= alpha)
        adj0[{x, y}] = {t.statistic, t.p_value};
      else
        sepsets[{x, y}] = zs;
    }

  auto adjacent0 = [&](int a, int b) {
    return adj0.count({std::min(a, b), std::max(a, b)}) > 0;
  };

  // collider votes: unshielded triple a - z - b with a, b nonadjacent and z
  // outside their separating set puts arrowheads at z.
  std::map<std::pair<int, int>, int> arrow_votes;  // (tail, head) -> votes
  for (int z = 0; z < lp.k; ++z)
    for (int a = 0; a < lp.k; ++a)
      for (int b = a + 1; b < lp.k; ++b) {
        if (a == z || b == z) continue;
        if (!adjacent0(a, z) || !adjacent0(b, z) || adjacent0(a, b)) continue;
        auto sep = sepsets.find({std::min(a, b), std::max(a, b)});
        if (sep == sepsets.end()) continue;
        if (sep->second.count({z, 0})) continue;
        ++arrow_votes[{a, z}];
        ++arrow_votes[{b, z}];
      }

  for (const auto& [key, c] : adj0) {
    int at_b = arrow_votes.count({key.a, key.b}) ? arrow_votes[{key.a, key.b}] : 0;
    int at_a = arrow_votes.count({key.b, key.a}) ? arrow_votes[{key.b, key.a}] : 0;
    const auto& na = lp.variables[static_cast<std::size_t>(key.a)];
    const auto& nb = lp.variables[static_cast<std::size_t>(key.b)];
    if (at_b > at_a) {
      g.edges.push_back({na, nb, 0, c.r, c.p, EdgeKind::Contemporaneous, Provenance::Pcmci});
    } else if (at_a > at_b) {
      g.edges.push_back({nb, na, 0, c.r, c.p, EdgeKind::Contemporaneous, Provenance::Pcmci});
    } else {
      g.conflicts.push_back(
          {na, nb, c.r, c.p, at_a == 0 ? "unoriented" : "majority tie"});
    }
  }

  g.check();
  return g;
}

// Full two-phase discovery on a differenced, demeaned panel. One lagged view
// with a 2*tau_max window serves both phases so every test sees the same
// sample.
inline CausalGraph run_pcmci_plus(const PanelDataset& data, int tau_max = 3,
                                  double alpha = 0.05, double alpha_pc = -1.0) {
  if (alpha_pc < 0) alpha_pc = alpha;
  LaggedPanel lp = build_lagged_panel(data, 2 * tau_max);
  std::vector<std::vector<Parent>> parents;
  for (int v = 0; v < lp.k; ++v)
    parents.push_back(pc1_parents(lp, v, tau_max, alpha_pc));
  return mci_graph(lp, parents, tau_max, alpha);
}

}  // namespace causalpanel
