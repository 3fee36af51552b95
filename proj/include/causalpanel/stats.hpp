#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <thread>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "causalpanel/errors.hpp"

namespace causalpanel {

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Two-sided p-value for a t statistic.
inline double t_pvalue_two_sided(double t, double df) {
  if (df <= 0) throw NumericError("t test: nonpositive degrees of freedom");
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(dist, -std::fabs(t));
}

// Upper-tail p-value for an F statistic.
inline double f_pvalue(double f, double df_num, double df_den) {
  if (df_num <= 0 || df_den <= 0)
    throw NumericError("F test: nonpositive degrees of freedom");
  if (f < 0) f = 0;
  boost::math::fisher_f dist(df_num, df_den);
  return boost::math::cdf(boost::math::complement(dist, f));
}

// MacKinnon (1994/2010) response-surface p-value for the ADF tau statistic,
// constant-only regression, single series.
inline double mackinnon_pvalue_const(double tau) {
  constexpr double tau_star = -1.61;
  constexpr double tau_min = -18.83;
  constexpr double tau_max = 2.74;
  if (tau > tau_max) return 1.0;
  if (tau < tau_min) return 1e-16;
  double z;
  if (tau <= tau_star) {
    z = 2.1659 + tau * (1.4412 + tau * 0.038269);
  } else {
    z = 1.7339 + tau * (0.93202 + tau * (-0.12745 + tau * (-0.010368)));
  }
  return normal_cdf(z);
}

struct OlsFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd residuals;
  double ssr = 0.0;
  long n = 0;
  long rank = 0;
};

// Least squares with a rank check; names of the regressors (when given) are
// used to report which columns are collinear.
inline OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const std::vector<std::string>* col_names = nullptr) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols()) {
    std::string msg = "rank-deficient regressor matrix";
    if (col_names) {
      const auto perm = qr.colsPermutation().indices();
      msg += "; collinear columns:";
      for (long i = qr.rank(); i < X.cols(); ++i)
        msg += " " + (*col_names)[static_cast<std::size_t>(perm[i])];
    }
    throw NumericError(msg);
  }
  OlsFit fit;
  fit.coef = qr.solve(y);
  fit.residuals = y - X * fit.coef;
  fit.ssr = fit.residuals.squaredNorm();
  fit.n = X.rows();
  fit.rank = qr.rank();
  return fit;
}

// Residuals of y after projecting out X (no rank check; used by CI tests
// where the conditioning set is built incrementally).
inline Eigen::VectorXd ols_residuals(const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& y) {
  Eigen::VectorXd coef = X.colPivHouseholderQr().solve(y);
  return y - X * coef;
}

// Linearly interpolated percentile (R type 7). q in [0,1].
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw NumericError("percentile of empty sample");
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v[0];
  double pos = q * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = static_cast<std::size_t>(std::ceil(pos));
  double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// splitmix64; used to derive independent per-replicate seeds so parallel
// schedules cannot change results.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t rep) {
  return std::mt19937_64(mix_seed(seed, rep));
}

// Static partition of [0, n) over a fixed worker count; each index is
// processed exactly once regardless of scheduling.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  auto workers = static_cast<std::size_t>(threads);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace causalpanel
