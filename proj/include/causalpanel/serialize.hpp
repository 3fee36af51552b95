#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalpanel/analysis.hpp"
#include "causalpanel/csv.hpp"
#include "causalpanel/irf.hpp"
#include "causalpanel/validation.hpp"
#include "causalpanel/var.hpp"

namespace causalpanel {

inline nlohmann::json to_json(const VarModel& m) {
  nlohmann::json j;
  j["k"] = m.k;
  j["p"] = m.p;
  j["variables"] = m.variables;
  j["intercept"] = std::vector<double>(m.intercept.data(), m.intercept.data() + m.k);
  j["coeffs"] = nlohmann::json::array();
  for (const auto& c : m.coeffs) {
    nlohmann::json mat = nlohmann::json::array();
    for (int r = 0; r < m.k; ++r) {
      std::vector<double> row(m.k);
      for (int v = 0; v < m.k; ++v) row[static_cast<std::size_t>(v)] = c(r, v);
      mat.push_back(row);
    }
    j["coeffs"].push_back(mat);
  }
  nlohmann::json sig = nlohmann::json::array();
  for (int r = 0; r < m.k; ++r) {
    std::vector<double> row(m.k);
    for (int v = 0; v < m.k; ++v) row[static_cast<std::size_t>(v)] = m.sigma(r, v);
    sig.push_back(row);
  }
  j["sigma"] = sig;
  j["nobs"] = m.nobs;
  j["dof_resid"] = m.dof_resid;
  j["loglik"] = m.loglik;
  j["aic"] = m.aic;
  j["bic"] = m.bic;
  j["spectral_radius"] = m.spectral_radius;
  j["stable"] = m.stable;
  return j;
}

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
}

// k x k matrix of Granger p-values; the diagonal serializes empty.
inline void write_granger_csv(const std::string& path,
                              const std::vector<std::string>& variables,
                              const std::vector<GrangerResult>& results) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  std::vector<std::string> header = {"source"};
  header.insert(header.end(), variables.begin(), variables.end());
  csv::write_row(out, header);
  for (const auto& src : variables) {
    std::vector<std::string> row = {src};
    for (const auto& tgt : variables) {
      if (src == tgt) {
        row.push_back("");
        continue;
      }
      for (const auto& r : results)
        if (r.source == src && r.target == tgt) {
          row.push_back(csv::format_double(r.p_value));
          break;
        }
    }
    csv::write_row(out, row);
  }
}

inline void write_coefficients_csv(const std::string& path, const VarModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  csv::write_row(out, {"response", "driver", "lag", "coefficient", "std_error"});
  for (int lag = 0; lag < m.p; ++lag)
    for (int r = 0; r < m.k; ++r)
      for (int v = 0; v < m.k; ++v)
        csv::write_row(
            out, {m.variables[static_cast<std::size_t>(r)],
                  m.variables[static_cast<std::size_t>(v)], std::to_string(lag + 1),
                  csv::format_double(m.coeffs[static_cast<std::size_t>(lag)](r, v)),
                  csv::format_double(m.coeff_se[static_cast<std::size_t>(lag)](r, v))});
}

// Long format: h, impulse, response, point, lo, hi.
inline void write_irf_csv(const std::string& path, const IrfResult& irf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  csv::write_row(out, {"h", "impulse", "response", "point", "lo", "hi"});
  const auto k = irf.variables.size();
  for (int h = 0; h <= irf.horizon; ++h)
    for (std::size_t imp = 0; imp < k; ++imp)
      for (std::size_t resp = 0; resp < k; ++resp) {
        auto hi = static_cast<std::size_t>(h);
        std::vector<std::string> row = {
            std::to_string(h), irf.variables[imp], irf.variables[resp],
            csv::format_double(irf.point[hi](static_cast<long>(resp),
                                             static_cast<long>(imp)))};
        if (irf.has_bands) {
          row.push_back(csv::format_double(
              irf.ci_lower[hi](static_cast<long>(resp), static_cast<long>(imp))));
          row.push_back(csv::format_double(
              irf.ci_upper[hi](static_cast<long>(resp), static_cast<long>(imp))));
        } else {
          row.push_back("");
          row.push_back("");
        }
        csv::write_row(out, row);
      }
}

inline void write_fevd_csv(const std::string& path, const FevdResult& fevd) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  csv::write_row(out, {"h", "variable", "shock", "share"});
  const auto k = fevd.variables.size();
  for (int h = 0; h <= fevd.horizon; ++h)
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t s = 0; s < k; ++s)
        csv::write_row(out, {std::to_string(h), fevd.variables[j],
                             fevd.variables[s],
                             csv::format_double(fevd.shares[static_cast<std::size_t>(h)](
                                 static_cast<long>(j), static_cast<long>(s)))});
}

inline void write_centrality_csv(const std::string& path,
                                 const CentralityTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  csv::write_row(out, {"node", "in_degree", "out_degree", "total", "role"});
  for (const auto& r : table.rows)
    csv::write_row(out, {r.node, std::to_string(r.in_degree),
                         std::to_string(r.out_degree), std::to_string(r.total),
                         to_string(r.role)});
}

inline void write_tiers_csv(const std::string& path, const TierAssignment& tiers) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  csv::write_row(out, {"node", "tier", "rationale"});
  for (const auto& r : tiers.rows)
    csv::write_row(out, {r.node, to_string(r.tier), r.rationale});
}

inline nlohmann::json to_json(const LagSelection& sel) {
  nlohmann::json j;
  j["table"] = nlohmann::json::array();
  for (const auto& r : sel.table)
    j["table"].push_back({{"p", r.p}, {"aic", r.aic}, {"bic", r.bic}});
  j["chosen_p"] = sel.chosen_p;
  return j;
}

inline nlohmann::json to_json(const McReport& mc) {
  return {{"mean_abs_bias", mc.mean_abs_bias},
          {"ci_coverage", mc.ci_coverage},
          {"replications", mc.replications},
          {"failures", mc.failures}};
}

inline nlohmann::json to_json(const PermReport& perm) {
  nlohmann::json j;
  j["real_link_count"] = perm.real_link_count;
  j["null_counts"] = perm.null_counts;
  j["infinite_separation"] = perm.infinite_separation;
  if (std::isfinite(perm.z_score))
    j["z_score"] = perm.z_score;
  else
    j["z_score"] = perm.z_score > 0 ? "inf" : "-inf";
  std::vector<double> counts(perm.null_counts.begin(), perm.null_counts.end());
  j["null_mean"] = mean(counts);
  j["null_sd"] = stddev(counts);
  return j;
}

inline nlohmann::json to_json(const RobustnessTable& table) {
  nlohmann::json j;
  j["tracked_pairs"] = nlohmann::json::array();
  for (const auto& [s, t] : table.tracked_pairs)
    j["tracked_pairs"].push_back({{"source", s}, {"target", t}});
  j["rows"] = nlohmann::json::array();
  for (const auto& r : table.rows) {
    nlohmann::json row = {{"label", r.label}, {"failed", r.failed}};
    if (r.failed) {
      row["error"] = r.error;
    } else {
      row["aic"] = r.aic;
      row["bic"] = r.bic;
      row["link_count"] = r.link_count;
      row["tracked_strengths"] = r.tracked_strengths;
    }
    j["rows"].push_back(row);
  }
  return j;
}

// Human-readable summary mirroring the validation tables.
inline std::string validation_summary_text(const McReport& mc,
                                           const PermReport& perm,
                                           const RobustnessTable& robust) {
  std::string s;
  char buf[256];
  s += "Monte Carlo validation\n";
  s += "  Metric              Target      Result\n";
  std::snprintf(buf, sizeof(buf), "  Mean Abs. Bias      <0.15       %.3f\n",
                mc.mean_abs_bias);
  s += buf;
  std::snprintf(buf, sizeof(buf), "  95%% CI Coverage     93-96%%      %.1f%%\n",
                100.0 * mc.ci_coverage);
  s += buf;
  std::snprintf(buf, sizeof(buf), "  Replications        >=100       %ld\n\n",
                mc.replications);
  s += buf;

  std::vector<double> counts(perm.null_counts.begin(), perm.null_counts.end());
  s += "Permutation falsification\n";
  std::snprintf(buf, sizeof(buf),
                "  %ld real vs %.1f+/-%.1f placebo, Z=%s\n\n",
                perm.real_link_count, mean(counts), stddev(counts),
                perm.infinite_separation
                    ? "inf"
                    : csv::format_double(perm.z_score).c_str());
  s += buf;

  s += "Robustness checks\n";
  s += "  Model        AIC        BIC        Links";
  for (const auto& [src, tgt] : robust.tracked_pairs)
    s += "  " + src + "->" + tgt;
  s += "\n";
  for (const auto& r : robust.rows) {
    if (r.failed) {
      s += "  " + r.label + "  FAILED: " + r.error + "\n";
      continue;
    }
    std::snprintf(buf, sizeof(buf), "  %-11s  %-9.1f  %-9.1f  %ld", r.label.c_str(),
                  r.aic, r.bic, r.link_count);
    s += buf;
    for (double v : r.tracked_strengths) {
      std::snprintf(buf, sizeof(buf), "  %+.3f", v);
      s += buf;
    }
    s += "\n";
  }
  return s;
}

}  // namespace causalpanel
