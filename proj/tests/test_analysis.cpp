#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "causalpanel/analysis.hpp"
#include "helpers.hpp"

using namespace causalpanel;

namespace {

CausalGraph graph_from(const std::vector<std::string>& nodes,
                       const std::vector<std::pair<std::string, std::string>>& links) {
  CausalGraph g;
  g.nodes = nodes;
  for (const auto& [s, t] : links)
    g.edges.push_back({s, t, 1, 0.3, 0.01, EdgeKind::Lagged, Provenance::Granger});
  g.check();
  return g;
}

const std::vector<std::string> kDomains = {
    "Education", "Growth",  "Institutions", "Inequality",
    "Climate",   "Poverty", "Health",       "Energy"};

// benchmark network used across the degree/tier checks
const std::vector<std::pair<std::string, std::string>> kBenchmarkLinks = {
    {"Education", "Inequality"}, {"Education", "Growth"},
    {"Education", "Poverty"},    {"Growth", "Poverty"},
    {"Growth", "Climate"},       {"Institutions", "Growth"},
    {"Institutions", "Health"},  {"Inequality", "Institutions"},
    {"Climate", "Education"},    {"Energy", "Inequality"}};

}  // namespace

TEST_CASE("empty graph yields zero degrees and neutral roles", "[analysis]") {
  CausalGraph g = graph_from({"a", "b", "c"}, {});
  CentralityTable t = centrality(g);
  CHECK(t.edge_count == 0);
  for (const auto& r : t.rows) {
    CHECK(r.in_degree == 0);
    CHECK(r.out_degree == 0);
    CHECK(r.total == 0);
    CHECK(r.role == NodeRole::Neutral);
  }
  CausalGraph empty;
  CHECK_THROWS_AS(centrality(empty), DataError);
}

TEST_CASE("star graph degrees and driver role", "[analysis]") {
  CausalGraph g = graph_from({"hub", "s1", "s2", "s3"},
                             {{"hub", "s1"}, {"hub", "s2"}, {"hub", "s3"}});
  CentralityTable t = centrality(g);
  CHECK(t.edge_count == 3);
  REQUIRE(t.rows[0].node == "hub");
  CHECK(t.rows[0].out_degree == 3);
  CHECK(t.rows[0].in_degree == 0);
  CHECK(t.rows[0].role == NodeRole::Driver);
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(t.rows[i].in_degree == 1);
    CHECK(t.rows[i].role == NodeRole::Outcome);
  }
}

TEST_CASE("multiple lags of the same pair collapse to one link", "[analysis]") {
  CausalGraph g;
  g.nodes = {"a", "b"};
  g.edges.push_back({"a", "b", 1, 0.3, 0.01, EdgeKind::Lagged, Provenance::Granger});
  g.edges.push_back({"a", "b", 2, 0.2, 0.02, EdgeKind::Lagged, Provenance::Pcmci});
  CentralityTable t = centrality(g);
  CHECK(t.edge_count == 1);
  CHECK(t.rows[0].out_degree == 1);
  CHECK(t.rows[1].in_degree == 1);
}

TEST_CASE("degree totals always sum to twice the link count", "[analysis]") {
  CentralityTable t = centrality(graph_from(kDomains, kBenchmarkLinks));
  int in_sum = 0, out_sum = 0;
  for (const auto& r : t.rows) {
    in_sum += r.in_degree;
    out_sum += r.out_degree;
  }
  CHECK(in_sum == t.edge_count);
  CHECK(out_sum == t.edge_count);
}

TEST_CASE("benchmark network reproduces the expected degree table", "[analysis]") {
  CentralityTable t = centrality(graph_from(kDomains, kBenchmarkLinks));
  std::map<std::string, std::pair<int, int>> expect = {
      {"Education", {1, 3}}, {"Growth", {2, 2}},  {"Institutions", {1, 2}},
      {"Inequality", {2, 1}}, {"Climate", {1, 1}}, {"Poverty", {2, 0}},
      {"Health", {1, 0}},     {"Energy", {0, 1}}};
  for (const auto& r : t.rows) {
    auto [in, out] = expect.at(r.node);
    CHECK(r.in_degree == in);
    CHECK(r.out_degree == out);
  }
}

TEST_CASE("tier classification on the benchmark network", "[analysis]") {
  CentralityTable t = centrality(graph_from(kDomains, kBenchmarkLinks));
  std::map<std::string, bool> direct = {{"Education", true}, {"Growth", true}};
  TierAssignment tiers = tier_classify(t, direct);
  std::map<std::string, Tier> got;
  for (const auto& r : tiers.rows) {
    got[r.node] = r.tier;
    CHECK(!r.rationale.empty());
  }
  CHECK(got.at("Education") == Tier::T1Driver);
  CHECK(got.at("Growth") == Tier::T1Driver);
  CHECK(got.at("Institutions") == Tier::T2Enabler);
  CHECK(got.at("Energy") == Tier::T2Enabler);
  CHECK(got.at("Poverty") == Tier::T3Outcome);
  CHECK(got.at("Health") == Tier::T3Outcome);
  CHECK(got.at("Inequality") == Tier::T3Outcome);

  CHECK_THROWS_AS(tier_classify(CentralityTable{}, {}), DataError);
}

TEST_CASE("isolated nodes fall to the outcome tier", "[analysis]") {
  CentralityTable t = centrality(graph_from({"solo"}, {}));
  TierAssignment tiers = tier_classify(t, {});
  REQUIRE(tiers.rows.size() == 1);
  CHECK(tiers.rows[0].tier == Tier::T3Outcome);
}

TEST_CASE("high out-degree without a direct effect stays in tier 2", "[analysis]") {
  CausalGraph g = graph_from({"hub", "a", "b"}, {{"hub", "a"}, {"hub", "b"}});
  TierAssignment tiers = tier_classify(centrality(g), {});
  CHECK(tiers.rows[0].tier == Tier::T2Enabler);
  TierAssignment confirmed = tier_classify(centrality(g), {{"hub", true}});
  CHECK(confirmed.rows[0].tier == Tier::T1Driver);
}

TEST_CASE("heterogeneity run keeps groups independent", "[analysis]") {
  std::vector<std::vector<double>> strong = {{0.4, 0.0}, {0.6, 0.3}};
  std::vector<std::vector<double>> weak = {{0.4, 0.0}, {0.1, 0.3}};
  std::map<std::string, PanelDataset> panels;
  panels.emplace("strong", testutil::var1_panel(strong, 70, 22, 11));
  panels.emplace("weak", testutil::var1_panel(weak, 70, 22, 12));

  PipelineParams params;
  params.p = 1;
  params.horizon = 6;
  params.tau_max = 2;
  params.bootstrap_reps = 60;
  params.seed = 5;
  params.threads = 2;
  HeterogeneityResult res =
      heterogeneity_run(panels, params, {{"V1", "V2"}});
  CHECK(res.failures.empty());
  REQUIRE(res.groups.size() == 2);
  REQUIRE(res.comparison.size() == 2);

  std::map<std::string, TrackedPeak> peaks;
  for (const auto& p : res.comparison) peaks[p.group] = p;
  CHECK(std::fabs(peaks.at("strong").peak) > std::fabs(peaks.at("weak").peak));
  CHECK(peaks.at("strong").significant);
  CHECK(peaks.at("strong").lo <= peaks.at("strong").peak);
  CHECK(peaks.at("strong").hi >= peaks.at("strong").peak);
}

TEST_CASE("a single group reproduces the pooled pipeline exactly", "[analysis]") {
  std::vector<std::vector<double>> phi = {{0.5, 0.0}, {0.4, 0.3}};
  PanelDataset d = testutil::var1_panel(phi, 60, 20, 77);

  PipelineParams params;
  params.p = 1;
  params.horizon = 5;
  params.tau_max = 2;
  params.bootstrap_reps = 40;
  params.seed = 9;
  std::map<std::string, PanelDataset> one;
  one.emplace("all", d);
  HeterogeneityResult res = heterogeneity_run(one, params, {{"V1", "V2"}});
  REQUIRE(res.groups.count("all") == 1);

  BootstrapOptions opt;
  opt.reps = params.bootstrap_reps;
  opt.seed = params.seed;
  IrfResult direct = bootstrap_irf(d, 1, 5, d.variables, opt);
  const IrfResult& got = res.groups.at("all").irf;
  for (int h = 0; h <= 5; ++h) {
    auto hs = static_cast<std::size_t>(h);
    CHECK((got.point[hs] - direct.point[hs]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((got.ci_lower[hs] - direct.ci_lower[hs]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("failing groups are isolated, healthy ones still run", "[analysis]") {
  std::vector<std::vector<double>> phi = {{0.5, 0.0}, {0.4, 0.3}};
  std::map<std::string, PanelDataset> panels;
  panels.emplace("ok", testutil::var1_panel(phi, 60, 20, 3));
  panels.emplace("broken", testutil::white_noise_panel(2, 4, 2, 4));  // too short
  PipelineParams params;
  params.p = 1;
  params.horizon = 4;
  params.tau_max = 2;
  params.bootstrap_reps = 30;
  HeterogeneityResult res = heterogeneity_run(panels, params, {});
  CHECK(res.groups.count("ok") == 1);
  CHECK(res.failures.count("broken") == 1);
  CHECK(!res.failures.at("broken").empty());
}
