#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalpanel/errors.hpp"

namespace causalpanel {

enum class EdgeKind { Lagged, Contemporaneous };
enum class Provenance { Granger, Pcmci };

struct CausalEdge {
  std::string source;
  std::string target;
  int lag = 1;            // 0 = contemporaneous
  double strength = 0.0;  // partial correlation (PCMCI) or peak coefficient (Granger)
  double p_value = 1.0;
  EdgeKind kind = EdgeKind::Lagged;
  Provenance provenance = Provenance::Granger;
};

// Contemporaneous pair whose orientation could not be resolved.
struct OrientationConflict {
  std::string a;
  std::string b;
  double strength = 0.0;
  double p_value = 1.0;
  std::string note;
};

struct CausalGraph {
  std::vector<std::string> nodes;
  std::vector<CausalEdge> edges;
  std::vector<OrientationConflict> conflicts;

  // Fraction of the k(k-1) ordered pairs with at least one edge, lags collapsed.
  double density() const {
    if (nodes.size() < 2) return 0.0;
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& e : edges)
      if (e.source != e.target) pairs.insert({e.source, e.target});
    return static_cast<double>(pairs.size()) /
           (static_cast<double>(nodes.size()) *
            static_cast<double>(nodes.size() - 1));
  }

  void check() const {
    std::set<std::tuple<std::string, std::string, int>> seen;
    for (const auto& e : edges) {
      if (e.lag == 0 && e.source == e.target)
        throw DataError("causal graph: self-edge at lag 0");
      if (!seen.insert({e.source, e.target, e.lag}).second)
        throw DataError("causal graph: duplicate edge " + e.source + "->" +
                        e.target + " lag " + std::to_string(e.lag));
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["nodes"] = nodes;
    j["edges"] = nlohmann::json::array();
    for (const auto& e : edges)
      j["edges"].push_back(
          {{"source", e.source},
           {"target", e.target},
           {"lag", e.lag},
           {"strength", e.strength},
           {"p_value", e.p_value},
           {"kind", e.kind == EdgeKind::Lagged ? "lagged" : "contemporaneous"},
           {"provenance", e.provenance == Provenance::Granger ? "granger" : "pcmci"}});
    j["conflicts"] = nlohmann::json::array();
    for (const auto& c : conflicts)
      j["conflicts"].push_back({{"a", c.a},
                                {"b", c.b},
                                {"strength", c.strength},
                                {"p_value", c.p_value},
                                {"note", c.note}});
    return j;
  }

  std::string to_dot() const {
    std::string out = "digraph causal {\n";
    for (const auto& n : nodes) out += "  \"" + n + "\";\n";
    for (const auto& e : edges) {
      out += "  \"" + e.source + "\" -> \"" + e.target + "\" [label=\"lag " +
             std::to_string(e.lag) + "\"];\n";
    }
    for (const auto& c : conflicts)
      out += "  \"" + c.a + "\" -> \"" + c.b + "\" [dir=none, style=dashed];\n";
    out += "}\n";
    return out;
  }
};

}  // namespace causalpanel
