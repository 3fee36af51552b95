#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "causalpanel/graph.hpp"
#include "causalpanel/irf.hpp"
#include "causalpanel/pcmci.hpp"
#include "causalpanel/var.hpp"

namespace causalpanel {

enum class NodeRole { Driver, Enabler, Outcome, Neutral };

inline std::string to_string(NodeRole r) {
  switch (r) {
    case NodeRole::Driver: return "Driver";
    case NodeRole::Enabler: return "Enabler";
    case NodeRole::Outcome: return "Outcome";
    case NodeRole::Neutral: return "Neutral";
  }
  return "Neutral";
}

struct CentralityRow {
  std::string node;
  int in_degree = 0;
  int out_degree = 0;
  int total = 0;
  NodeRole role = NodeRole::Neutral;
};

struct CentralityTable {
  std::vector<CentralityRow> rows;
  int edge_count = 0;  // distinct (source, target) pairs, lags collapsed
};

// Degree-based role thresholds. The rule table is explicit so it can be
// audited: Driver = out > in and out >= 2; Outcome = in > out;
// Enabler = out >= 1 and (out == in or in <= 1 < out); Neutral otherwise.
struct RoleRule {
  int driver_min_out = 2;

  NodeRole classify(int in, int out) const {
    if (out > in && out >= driver_min_out) return NodeRole::Driver;
    if (in > out) return NodeRole::Outcome;
    if (out >= 1 && (out == in || (in <= 1 && 1 < out))) return NodeRole::Enabler;
    return NodeRole::Neutral;
  }
};

// Degrees count distinct directed (source, target) pairs; multiple lags of
// the same pair collapse to one link. Undirected conflicts do not count.
inline CentralityTable centrality(const CausalGraph& graph,
                                  const RoleRule& rule = {}) {
  if (graph.nodes.empty()) throw DataError("centrality: empty graph");
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& e : graph.edges)
    if (e.source != e.target) pairs.insert({e.source, e.target});

  CentralityTable table;
  table.edge_count = static_cast<int>(pairs.size());
  for (const auto& node : graph.nodes) {
    CentralityRow row;
    row.node = node;
    for (const auto& [src, tgt] : pairs) {
      row.out_degree += (src == node);
      row.in_degree += (tgt == node);
    }
    row.total = row.in_degree + row.out_degree;
    row.role = rule.classify(row.in_degree, row.out_degree);
    table.rows.push_back(row);
  }
  return table;
}

enum class Tier { T1Driver, T2Enabler, T3Outcome };

inline std::string to_string(Tier t) {
  switch (t) {
    case Tier::T1Driver: return "T1";
    case Tier::T2Enabler: return "T2";
    case Tier::T3Outcome: return "T3";
  }
  return "T3";
}

struct TierAssignment {
  struct Row {
    std::string node;
    Tier tier = Tier::T3Outcome;
    std::string rationale;
  };
  std::vector<Row> rows;
};

// T1 = out-degree >= 2 with a confirmed direct effect; T3 = in >= out and
// out <= 1; everything else T2.
inline TierAssignment tier_classify(const CentralityTable& table,
                                    const std::map<std::string, bool>& directness) {
  if (table.rows.empty()) throw DataError("tier_classify: empty table");
  TierAssignment out;
  for (const auto& r : table.rows) {
    bool direct = false;
    if (auto it = directness.find(r.node); it != directness.end()) direct = it->second;
    TierAssignment::Row row;
    row.node = r.node;
    std::string degrees = "in=" + std::to_string(r.in_degree) +
                          ", out=" + std::to_string(r.out_degree);
    if (r.out_degree >= 2 && direct) {
      row.tier = Tier::T1Driver;
      row.rationale = degrees + ", direct effect confirmed";
    } else if (r.in_degree >= r.out_degree && r.out_degree <= 1) {
      row.tier = Tier::T3Outcome;
      row.rationale = degrees + ", predominantly receiving";
    } else {
      row.tier = Tier::T2Enabler;
      row.rationale = degrees + ", intermediate position";
    }
    out.rows.push_back(row);
  }
  return out;
}

struct PipelineParams {
  int p = 2;
  int horizon = 10;
  int tau_max = 3;
  double alpha = 0.05;
  long bootstrap_reps = 200;
  std::uint64_t seed = 0;
  int threads = 1;
  double ridge = 0.0;
};

struct GroupResult {
  VarModel model;
  IrfResult irf;
  CausalGraph granger_graph;
  CausalGraph pcmci_graph;
};

struct TrackedPeak {
  std::string group;
  std::string impulse;
  std::string response;
  int peak_horizon = 0;
  double peak = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool significant = false;  // band excludes zero at the peak
};

struct HeterogeneityResult {
  std::map<std::string, GroupResult> groups;
  std::map<std::string, std::string> failures;  // group -> error
  std::vector<TrackedPeak> comparison;
  // tracked pair -> groups whose bands do not overlap at the peak horizon
  std::vector<std::string> non_overlap_flags;
};

// Same pipeline on each sub-panel (input panels are differenced, not yet
// demeaned); per-group failures are isolated.
inline HeterogeneityResult heterogeneity_run(
    const std::map<std::string, PanelDataset>& panels,
    const PipelineParams& params,
    const std::vector<std::pair<std::string, std::string>>& tracked_pairs) {
  HeterogeneityResult out;
  for (const auto& [label, panel] : panels) {
    try {
      GroupResult res;
      PanelDataset demeaned = within_transform(panel);
      res.model = estimate_var(demeaned, params.p);
      BootstrapOptions opt;
      opt.reps = params.bootstrap_reps;
      opt.seed = params.seed;
      opt.threads = params.threads;
      opt.ridge = params.ridge;
      res.irf = bootstrap_irf(panel, params.p, params.horizon, panel.variables, opt);
      res.granger_graph = granger_network(res.model, demeaned, params.alpha);
      res.pcmci_graph = run_pcmci_plus(demeaned, params.tau_max, params.alpha);
      out.groups.emplace(label, std::move(res));
    } catch (const std::exception& e) {
      out.failures[label] = e.what();
    }
  }

  for (const auto& [src, tgt] : tracked_pairs) {
    for (const auto& [label, res] : out.groups) {
      auto imp = res.irf.variables;
      auto si = std::find(imp.begin(), imp.end(), src) - imp.begin();
      auto ti = std::find(imp.begin(), imp.end(), tgt) - imp.begin();
      if (si == static_cast<long>(imp.size()) || ti == static_cast<long>(imp.size()))
        continue;
      TrackedPeak peak;
      peak.group = label;
      peak.impulse = src;
      peak.response = tgt;
      // h = 0 is the contemporaneous Cholesky impact, not a lagged response;
      // peaks are searched from year 1 on (when the horizon allows it)
      int h_first = res.irf.horizon >= 1 ? 1 : 0;
      for (int h = h_first; h <= res.irf.horizon; ++h) {
        double v = res.irf.point[static_cast<std::size_t>(h)](ti, si);
        if (h == h_first || std::fabs(v) > std::fabs(peak.peak)) {
          peak.peak = v;
          peak.peak_horizon = h;
        }
      }
      auto hidx = static_cast<std::size_t>(peak.peak_horizon);
      peak.lo = res.irf.ci_lower[hidx](ti, si);
      peak.hi = res.irf.ci_upper[hidx](ti, si);
      peak.significant = peak.lo > 0.0 || peak.hi < 0.0;
      out.comparison.push_back(peak);
    }
    // flag group pairs whose bands do not overlap at their peaks
    for (std::size_t a = 0; a < out.comparison.size(); ++a)
      for (std::size_t b = a + 1; b < out.comparison.size(); ++b) {
        const auto& pa = out.comparison[a];
        const auto& pb = out.comparison[b];
        if (pa.impulse != src || pa.response != tgt) continue;
        if (pb.impulse != src || pb.response != tgt) continue;
        if (pa.hi < pb.lo || pb.hi < pa.lo)
          out.non_overlap_flags.push_back(src + "->" + tgt + ": " + pa.group +
                                          " vs " + pb.group);
      }
  }
  return out;
}

}  // namespace causalpanel
