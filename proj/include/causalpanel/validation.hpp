#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "causalpanel/preprocess.hpp"
#include "causalpanel/stats.hpp"
#include "causalpanel/var.hpp"

namespace causalpanel {

// VAR(1) data-generating process: diagonal persistence plus uniform
// off-diagonal coefficients, Gaussian innovations, burn-in discarded.
struct DgpSpec {
  int k = 8;
  std::size_t n = 168;
  int t = 25;
  double diag = 0.5;
  double offdiag_low = -0.3;
  double offdiag_high = 0.3;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
  int burn_in = 50;
  int first_year = 2000;
};

inline double spectral_radius(const Eigen::MatrixXd& m) {
  return m.eigenvalues().cwiseAbs().maxCoeff();
}

// Redraws until the coefficient matrix is stable; after 100 failed draws the
// last draw is rescaled to spectral radius 0.95.
inline Eigen::MatrixXd draw_var1_coefficients(const DgpSpec& spec,
                                              std::mt19937_64& rng) {
  std::uniform_real_distribution<double> off(spec.offdiag_low, spec.offdiag_high);
  Eigen::MatrixXd phi(spec.k, spec.k);
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (int i = 0; i < spec.k; ++i)
      for (int j = 0; j < spec.k; ++j) phi(i, j) = (i == j) ? spec.diag : off(rng);
    if (spectral_radius(phi) < 1.0) return phi;
  }
  double r = spectral_radius(phi);
  if (r <= 0) throw NumericError("simulate_dgp: cannot stabilize a zero matrix");
  return phi * (0.95 / r);
}

inline PanelDataset simulate_var1_paths(const Eigen::MatrixXd& phi,
                                        const DgpSpec& spec,
                                        std::mt19937_64& rng) {
  PanelDataset data;
  for (std::size_t i = 0; i < spec.n; ++i)
    data.entities.push_back("E" + std::to_string(i + 1));
  for (int t = 0; t < spec.t; ++t) data.years.push_back(spec.first_year + t);
  for (int v = 0; v < spec.k; ++v)
    data.variables.push_back("V" + std::to_string(v + 1));
  data.allocate();
  std::normal_distribution<double> noise(0.0, spec.noise_sd);
  Eigen::VectorXd y(spec.k), eps(spec.k);
  for (std::size_t i = 0; i < spec.n; ++i) {
    y.setZero();
    for (int s = 0; s < spec.burn_in + spec.t; ++s) {
      for (int v = 0; v < spec.k; ++v) eps(v) = noise(rng);
      y = phi * y + eps;
      if (s >= spec.burn_in)
        for (int v = 0; v < spec.k; ++v)
          data.set(i, static_cast<std::size_t>(s - spec.burn_in),
                   static_cast<std::size_t>(v), y(v));
    }
  }
  data.validate();
  return data;
}

inline PanelDataset simulate_dgp(const DgpSpec& spec) {
  auto rng = replicate_rng(spec.seed, 0);
  Eigen::MatrixXd phi = draw_var1_coefficients(spec, rng);
  return simulate_var1_paths(phi, spec, rng);
}

struct McReport {
  double mean_abs_bias = 0.0;
  double ci_coverage = 0.0;
  long replications = 0;
  long failures = 0;
};

// Per replicate: draw a fresh stable coefficient matrix, simulate, demean
// (the DGP is already stationary, so no differencing), estimate a VAR(1),
// and score |estimate - truth| and 95% normal-approximation CI coverage
// over the k*k lag-1 coefficients.
inline McReport monte_carlo_validate(const DgpSpec& spec, long reps,
                                     int threads = 1) {
  if (reps < 10) throw ConfigError("monte_carlo_validate: reps must be >= 10");
  struct RepOut {
    double bias;
    double coverage;
  };
  std::vector<std::optional<RepOut>> outs(static_cast<std::size_t>(reps));
  parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
    try {
      auto rng = replicate_rng(spec.seed, r + 1);
      Eigen::MatrixXd truth = draw_var1_coefficients(spec, rng);
      PanelDataset data = simulate_var1_paths(truth, spec, rng);
      VarModel m = estimate_var(within_transform(data), 1);
      double bias = 0.0;
      long covered = 0;
      for (int i = 0; i < spec.k; ++i)
        for (int j = 0; j < spec.k; ++j) {
          double est = m.coeffs[0](i, j), se = m.coeff_se[0](i, j);
          bias += std::fabs(est - truth(i, j));
          covered += (truth(i, j) >= est - 1.96 * se &&
                      truth(i, j) <= est + 1.96 * se);
        }
      double cells = static_cast<double>(spec.k) * spec.k;
      outs[r] = RepOut{bias / cells, static_cast<double>(covered) / cells};
    } catch (const std::exception&) {
      // degenerate replicate, counted below
    }
  });
  McReport rep;
  for (const auto& o : outs) {
    if (!o) {
      ++rep.failures;
      continue;
    }
    rep.mean_abs_bias += o->bias;
    rep.ci_coverage += o->coverage;
    ++rep.replications;
  }
  if (rep.failures * 10 > reps)
    throw NumericError("monte_carlo_validate: more than 10% of replicates failed");
  rep.mean_abs_bias /= static_cast<double>(rep.replications);
  rep.ci_coverage /= static_cast<double>(rep.replications);
  return rep;
}

struct PermReport {
  long real_link_count = 0;
  std::vector<long> null_counts;
  double z_score = 0.0;
  bool infinite_separation = false;
};

inline long count_significant_links(const PanelDataset& differenced, int p,
                                    double alpha) {
  PanelDataset demeaned = within_transform(differenced);
  VarModel m = estimate_var(demeaned, p);
  long n = 0;
  for (const auto& g : granger_all(m, demeaned, alpha)) n += g.significant;
  return n;
}

// Permutation falsification: each variable's entity-series assignment is
// permuted independently across entities, which destroys within-entity
// cross-variable alignment while preserving every column's marginals.
inline PermReport permutation_falsification(const PanelDataset& differenced,
                                            int p, double alpha, long reps,
                                            std::uint64_t seed,
                                            int threads = 1) {
  if (reps < 10) throw ConfigError("permutation_falsification: reps must be >= 10");
  PermReport rep;
  rep.real_link_count = count_significant_links(differenced, p, alpha);
  rep.null_counts.assign(static_cast<std::size_t>(reps), 0);

  const std::size_t n = differenced.n_entities();
  parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
    auto rng = replicate_rng(seed, r + 1);
    PanelDataset perm = differenced;
    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < differenced.n_vars(); ++k) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < differenced.n_years(); ++t) {
          if (differenced.has(order[i], t, k))
            perm.set(i, t, k, differenced.value(order[i], t, k));
          else
            perm.clear_cell(i, t, k);
        }
    }
    rep.null_counts[r] = count_significant_links(perm, p, alpha);
  });

  std::vector<double> counts(rep.null_counts.begin(), rep.null_counts.end());
  double m = mean(counts), sd = stddev(counts);
  if (sd == 0.0) {
    rep.infinite_separation = static_cast<double>(rep.real_link_count) != m;
    rep.z_score = rep.infinite_separation
                      ? std::numeric_limits<double>::infinity() *
                            (rep.real_link_count > m ? 1.0 : -1.0)
                      : 0.0;
  } else {
    rep.z_score = (static_cast<double>(rep.real_link_count) - m) / sd;
  }
  return rep;
}

struct RobustnessSpec {
  std::string label;
  int p = 1;
  std::optional<int> year_from;
  std::optional<int> year_to;
  bool fixed_effects = true;
};

struct RobustnessRow {
  std::string label;
  bool failed = false;
  std::string error;
  double aic = 0.0;
  double bic = 0.0;
  long link_count = 0;
  std::vector<double> tracked_strengths;  // lag-1 coefficient per tracked pair
};

struct RobustnessTable {
  std::vector<std::pair<std::string, std::string>> tracked_pairs;
  std::vector<RobustnessRow> rows;
};

// Takes the differenced (pre-demeaning) panel so the fixed-effects toggle is
// meaningful. Infeasible specs produce a failed row, not an error.
inline RobustnessTable robustness_sweep(
    const PanelDataset& differenced, const std::vector<RobustnessSpec>& specs,
    double alpha,
    const std::vector<std::pair<std::string, std::string>>& tracked_pairs) {
  RobustnessTable table;
  table.tracked_pairs = tracked_pairs;
  for (const auto& spec : specs) {
    RobustnessRow row;
    row.label = spec.label;
    try {
      PanelDataset d = differenced;
      if (spec.year_from || spec.year_to)
        d = subset_years(d, spec.year_from.value_or(d.years.front()),
                         spec.year_to.value_or(d.years.back()));
      if (spec.fixed_effects) d = within_transform(d);
      VarModel m = estimate_var(d, spec.p);
      row.aic = m.aic;
      row.bic = m.bic;
      for (const auto& g : granger_all(m, d, alpha)) row.link_count += g.significant;
      for (const auto& [src, tgt] : tracked_pairs)
        row.tracked_strengths.push_back(
            m.coeffs[0](static_cast<long>(d.var_index(tgt)),
                        static_cast<long>(d.var_index(src))));
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace causalpanel
