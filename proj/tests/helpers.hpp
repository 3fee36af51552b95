#pragma once

// Shared fixtures and independent oracles for the test suites. The oracle
// code here deliberately avoids the library's linear-algebra path: plain
// loops and Gaussian elimination only.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "causalpanel/panel.hpp"

namespace testutil {

inline std::string make_temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("causalpanel_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir.string();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// ---------------------------------------------------------------------------
// Straight-line OLS oracle: normal equations + Gaussian elimination.

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline std::vector<double> solve_normal_equations(const Matrix& x,
                                                  const std::vector<double>& y) {
  const std::size_t n = x.size();
  const std::size_t m = x[0].size();
  Matrix a(m, std::vector<double>(m + 1, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t r = 0; r < n; ++r) a[i][j] += x[r][i] * x[r][j];
    for (std::size_t r = 0; r < n; ++r) a[i][m] += x[r][i] * y[r];
  }
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < m; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    for (std::size_t r = 0; r < m; ++r) {
      if (r == col || a[col][col] == 0.0) continue;
      double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= m; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> beta(m);
  for (std::size_t i = 0; i < m; ++i) beta[i] = a[i][m] / a[i][i];
  return beta;
}

inline double ssr(const Matrix& x, const std::vector<double>& y) {
  auto beta = solve_normal_equations(x, y);
  double s = 0.0;
  for (std::size_t r = 0; r < x.size(); ++r) {
    double fit = 0.0;
    for (std::size_t c = 0; c < x[r].size(); ++c) fit += x[r][c] * beta[c];
    s += (y[r] - fit) * (y[r] - fit);
  }
  return s;
}

struct GrangerOracle {
  double f_stat;
  long df_num;
  long df_den;
};

// Brute-force nested-regression Granger F on the same stacked convention
// used by the library: intercept + p lags of every variable, rows only
// where the full window is observed inside one entity.
inline GrangerOracle granger_f(const causalpanel::PanelDataset& data, int p,
                               const std::string& source,
                               const std::string& target) {
  const auto k = data.n_vars();
  const auto src = data.var_index(source);
  const auto tgt = data.var_index(target);
  Matrix x_full, x_restricted;
  std::vector<double> y;
  for (std::size_t i = 0; i < data.n_entities(); ++i)
    for (std::size_t t = static_cast<std::size_t>(p); t < data.n_years(); ++t) {
      bool ok = true;
      for (int j = 0; j <= p && ok; ++j)
        for (std::size_t v = 0; v < k && ok; ++v)
          ok = data.has(i, t - static_cast<std::size_t>(j), v);
      if (!ok) continue;
      std::vector<double> full = {1.0}, restricted = {1.0};
      for (int lag = 1; lag <= p; ++lag)
        for (std::size_t v = 0; v < k; ++v) {
          double val = data.value(i, t - static_cast<std::size_t>(lag), v);
          full.push_back(val);
          if (v != src) restricted.push_back(val);
        }
      x_full.push_back(full);
      x_restricted.push_back(restricted);
      y.push_back(data.value(i, t, tgt));
    }
  double ssr_u = ssr(x_full, y);
  double ssr_r = ssr(x_restricted, y);
  GrangerOracle out;
  out.df_num = p;
  out.df_den = static_cast<long>(y.size()) - static_cast<long>(x_full[0].size());
  out.f_stat = ((ssr_r - ssr_u) / static_cast<double>(p)) /
               (ssr_u / static_cast<double>(out.df_den));
  return out;
}

}  // namespace oracle

// ---------------------------------------------------------------------------
// Simple panel generators.

// Independent white-noise panel.
inline causalpanel::PanelDataset white_noise_panel(std::size_t n, int t_len,
                                                   int k, std::uint64_t seed) {
  causalpanel::PanelDataset d;
  for (std::size_t i = 0; i < n; ++i) d.entities.push_back("E" + std::to_string(i));
  for (int t = 0; t < t_len; ++t) d.years.push_back(2000 + t);
  for (int v = 0; v < k; ++v) d.variables.push_back("V" + std::to_string(v + 1));
  d.allocate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (int t = 0; t < t_len; ++t)
      for (int v = 0; v < k; ++v)
        d.set(i, static_cast<std::size_t>(t), static_cast<std::size_t>(v), noise(rng));
  return d;
}

// Panel generated from explicit lag-1 coefficients; y[t] = phi * y[t-1] + e.
inline causalpanel::PanelDataset var1_panel(
    const std::vector<std::vector<double>>& phi, std::size_t n, int t_len,
    std::uint64_t seed, double noise_sd = 1.0, int burn = 50) {
  const int k = static_cast<int>(phi.size());
  causalpanel::PanelDataset d;
  for (std::size_t i = 0; i < n; ++i) d.entities.push_back("E" + std::to_string(i));
  for (int t = 0; t < t_len; ++t) d.years.push_back(2000 + t);
  for (int v = 0; v < k; ++v) d.variables.push_back("V" + std::to_string(v + 1));
  d.allocate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_sd);
  std::vector<double> y(static_cast<std::size_t>(k)), prev;
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(y.begin(), y.end(), 0.0);
    for (int s = 0; s < burn + t_len; ++s) {
      prev = y;
      for (int r = 0; r < k; ++r) {
        double acc = noise(rng);
        for (int c = 0; c < k; ++c)
          acc += phi[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] *
                 prev[static_cast<std::size_t>(c)];
        y[static_cast<std::size_t>(r)] = acc;
      }
      if (s >= burn)
        for (int r = 0; r < k; ++r)
          d.set(i, static_cast<std::size_t>(s - burn), static_cast<std::size_t>(r),
                y[static_cast<std::size_t>(r)]);
    }
  }
  return d;
}

}  // namespace testutil
