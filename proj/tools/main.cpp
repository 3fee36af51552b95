// Command-line front end for the panel causal-discovery pipeline.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
// failure.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "causalpanel/analysis.hpp"
#include "causalpanel/pcmci.hpp"
#include "causalpanel/preprocess.hpp"
#include "causalpanel/serialize.hpp"
#include "causalpanel/validation.hpp"

namespace fs = std::filesystem;
using namespace causalpanel;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string input;
  std::string groups_file;
  std::string format = "auto";
  std::vector<std::string> variables;
  std::vector<std::string> ordering;
  double max_missing = 0.40;
  int p = 0;  // 0 = auto-select via AIC up to p_max
  int p_max = 3;
  int tau_max = 3;
  double alpha = 0.05;
  int horizon = 10;
  long bootstrap_reps = 200;
  long permutation_reps = 100;
  long mc_reps = 100;
  std::size_t mc_entities = 1;
  int mc_vars = 8;
  int mc_years = 25;
  double mc_diag = 0.5;
  double mc_offdiag = 0.3;
  double mc_noise_sd = 1.0;
  std::size_t min_group_entities = 5;
  std::uint64_t seed = 0;
  int threads = 1;
  double ridge = 0.0;
  std::string output_dir = "out";
  std::vector<std::string> tracked;  // "src->tgt"
  bool raw = false;
  int split_year = 0;  // 0 = midpoint of the sample
  std::string config_file;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--input", o.input, "Input panel CSV");
  cmd->add_option("--groups", o.groups_file, "Entity group map CSV (entity,label)");
  cmd->add_option("--format", o.format, "Input layout: auto|long|wide")
      ->check(CLI::IsMember({"auto", "long", "wide"}));
  cmd->add_option("--variables", o.variables, "Variable subset (comma separated)")
      ->delimiter(',');
  cmd->add_option("--ordering", o.ordering, "Cholesky ordering (comma separated)")
      ->delimiter(',');
  cmd->add_option("--max-missing", o.max_missing,
                  "Per-entity missing fraction threshold")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--p", o.p, "VAR lag order (0 = AIC auto-select)");
  cmd->add_option("--p-max", o.p_max, "Maximum lag for auto-selection and sweeps");
  cmd->add_option("--tau-max", o.tau_max, "Maximum lag for conditional-independence search");
  cmd->add_option("--alpha", o.alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--horizon", o.horizon, "Impulse-response horizon");
  cmd->add_option("--bootstrap-reps", o.bootstrap_reps, "Bootstrap replicates");
  cmd->add_option("--permutation-reps", o.permutation_reps, "Permutation replicates");
  cmd->add_option("--mc-reps", o.mc_reps, "Monte Carlo replicates");
  cmd->add_option("--mc-entities", o.mc_entities, "Monte Carlo cross-sectional size");
  cmd->add_option("--mc-vars", o.mc_vars, "Monte Carlo variable count");
  cmd->add_option("--mc-years", o.mc_years, "Monte Carlo series length");
  cmd->add_option("--mc-diag", o.mc_diag, "Monte Carlo diagonal persistence");
  cmd->add_option("--mc-offdiag", o.mc_offdiag, "Monte Carlo off-diagonal bound");
  cmd->add_option("--mc-noise-sd", o.mc_noise_sd, "Monte Carlo innovation scale");
  cmd->add_option("--min-group-entities", o.min_group_entities,
                  "Smallest group kept by the split");
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--threads", o.threads, "Worker pool size");
  cmd->add_option("--ridge", o.ridge, "Diagonal ridge for a non-PD covariance");
  cmd->add_option("--output-dir", o.output_dir, "Output directory");
  cmd->add_option("--tracked", o.tracked, "Tracked pairs, e.g. V1->V2 (comma separated)")
      ->delimiter(',');
  cmd->add_option("--split-year", o.split_year,
                  "Boundary year for the temporal-stability split (0 = midpoint)");
  cmd->add_flag("--raw", o.raw, "Treat input as raw and preprocess first");
  cmd->add_option("--config", o.config_file,
                  "Flat key=value config file; flags override");
}

// Expands --config into ordinary options. Keys mirror the long option names;
// values already present on the command line win.
std::vector<std::string> expand_config(const std::vector<std::string>& args,
                                       const CLI::App& app) {
  std::string cfg_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config" && i + 1 < args.size()) cfg_path = args[i + 1];
    else if (a.rfind("--config=", 0) == 0) cfg_path = a.substr(9);
  }
  if (cfg_path.empty()) return args;
  if (args.empty()) throw ConfigError("--config requires a subcommand");
  const CLI::App* sub = nullptr;
  for (const auto* s : app.get_subcommands(nullptr))
    if (s->get_name() == args.front()) sub = s;
  if (!sub) return args;

  std::ifstream in(cfg_path);
  if (!in) throw ConfigError("cannot open config file: " + cfg_path);
  std::vector<std::string> out = args;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line is not key=value: " + line);
    std::string key = "--" + line.substr(0, eq);
    if (key == "--config")
      throw ConfigError("config files cannot nest --config");
    if (!sub->get_option_no_throw(key))
      throw ConfigError("unknown config key: " + line.substr(0, eq));
    bool on_cli = false;
    for (const auto& a : args)
      if (a == key || a.rfind(key + "=", 0) == 0) on_cli = true;
    if (!on_cli) out.push_back(key + "=" + line.substr(eq + 1));
  }
  return out;
}

PanelFormat parse_format(const std::string& s) {
  if (s == "long") return PanelFormat::Long;
  if (s == "wide") return PanelFormat::Wide;
  return PanelFormat::Auto;
}

std::vector<std::pair<std::string, std::string>> parse_tracked(
    const std::vector<std::string>& raw) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : raw) {
    auto pos = s.find("->");
    if (pos == std::string::npos)
      throw ConfigError("tracked pair must look like SRC->TGT: " + s);
    out.emplace_back(s.substr(0, pos), s.substr(pos + 2));
  }
  return out;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return fnv1a(bytes);
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Tracks files written during a run; everything is removed again when the
// run fails partway.
class OutputSet {
 public:
  explicit OutputSet(const std::string& dir) : dir_(dir) {
    fs::create_directories(dir_);
  }
  std::string path(const std::string& name) {
    std::string p = (fs::path(dir_) / name).string();
    written_.push_back(p);
    return p;
  }
  void rollback() {
    for (const auto& p : written_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }

 private:
  std::string dir_;
  std::vector<std::string> written_;
};

nlohmann::json config_json(const Options& o) {
  return {{"input", o.input},
          {"groups", o.groups_file},
          {"format", o.format},
          {"variables", o.variables},
          {"ordering", o.ordering},
          {"max_missing", o.max_missing},
          {"p", o.p},
          {"p_max", o.p_max},
          {"tau_max", o.tau_max},
          {"alpha", o.alpha},
          {"horizon", o.horizon},
          {"bootstrap_reps", o.bootstrap_reps},
          {"permutation_reps", o.permutation_reps},
          {"mc_reps", o.mc_reps},
          {"mc_entities", o.mc_entities},
          {"mc_vars", o.mc_vars},
          {"mc_years", o.mc_years},
          {"mc_diag", o.mc_diag},
          {"mc_offdiag", o.mc_offdiag},
          {"mc_noise_sd", o.mc_noise_sd},
          {"min_group_entities", o.min_group_entities},
          {"seed", o.seed},
          {"threads", o.threads},
          {"ridge", o.ridge},
          {"tracked", o.tracked},
          {"split_year", o.split_year},
          {"raw", o.raw}};
}

void write_manifest(OutputSet& out, const Options& o,
                    const std::vector<std::string>& inputs) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["config"] = config_json(o);
  j["config_hash"] = hex64(fnv1a(config_json(o).dump()));
  j["seed"] = o.seed;
  j["inputs"] = nlohmann::json::array();
  for (const auto& path : inputs)
    j["inputs"].push_back({{"path", path}, {"fnv1a", hex64(file_checksum(path))}});
  write_text(out.path("manifest.json"), j.dump(2) + "\n");
}

PanelDataset load_input(const Options& o) {
  if (o.input.empty()) throw ConfigError("--input is required");
  if (!fs::exists(o.input)) throw DataError("input file not found: " + o.input);
  PanelDataset data = load_panel(o.input, parse_format(o.format));
  if (!o.variables.empty()) data = subset_variables(data, o.variables);
  if (!o.groups_file.empty()) {
    if (!fs::exists(o.groups_file))
      throw DataError("group file not found: " + o.groups_file);
    data.groups = load_groups(o.groups_file);
  }
  return data;
}

// Cleaning + differencing + demeaning with a full audit log.
PanelDataset preprocess_pipeline(const PanelDataset& raw, const Options& o,
                                 TransformLog& log) {
  CleanStats cstats;
  PanelDataset clean = clean_panel(raw, o.max_missing, &cstats);
  TransformStep step;
  step.operation = "clean_panel";
  step.params = {{"max_missing_fraction", o.max_missing},
                 {"dropped_entities", cstats.dropped_entities},
                 {"interpolated_cells", cstats.interpolated_cells},
                 {"edge_missing_cells", cstats.edge_missing_cells}};
  step.rows_lost = static_cast<long>(observed_cells(raw)) -
                   static_cast<long>(observed_cells(clean));
  log.steps.push_back(step);

  PanelDataset diff = first_difference(clean, &log);
  adf_report(diff, o.alpha, log);
  return within_transform(diff, &log);
}

int cmd_preprocess(const Options& o) {
  OutputSet out(o.output_dir);
  try {
    PanelDataset raw = load_input(o);
    TransformLog log;
    PanelDataset ready = preprocess_pipeline(raw, o, log);
    save_panel(ready, out.path("panel_preprocessed.csv"));
    write_text(out.path("transform_log.json"), log.to_json().dump(2) + "\n");
    std::vector<std::string> inputs = {o.input};
    if (!o.groups_file.empty()) inputs.push_back(o.groups_file);
    write_manifest(out, o, inputs);
    std::cout << "preprocess: " << ready.n_entities() << " entities, "
              << ready.n_years() << " years, " << ready.n_vars()
              << " variables -> " << o.output_dir << "\n";
    return 0;
  } catch (...) {
    out.rollback();
    throw;
  }
}

int cmd_discover(const Options& o) {
  OutputSet out(o.output_dir);
  try {
    PanelDataset data = load_input(o);
    TransformLog log;
    if (o.raw) data = preprocess_pipeline(data, o, log);

    int p = o.p;
    std::optional<LagSelection> sel;
    if (p == 0) {
      sel = select_lag(data, o.p_max);
      p = sel->chosen_p;
    }
    VarModel model = estimate_var(data, p);
    auto granger = granger_all(model, data, o.alpha);
    CausalGraph gnet = granger_network(model, data, o.alpha);
    CausalGraph pnet = run_pcmci_plus(data, o.tau_max, o.alpha);

    std::vector<std::string> ordering =
        o.ordering.empty() ? data.variables : o.ordering;
    BootstrapOptions bopt;
    bopt.reps = o.bootstrap_reps;
    bopt.seed = o.seed;
    bopt.threads = o.threads;
    bopt.ridge = o.ridge;
    IrfResult irf = bootstrap_irf(data, p, o.horizon, ordering, bopt);
    FevdResult fe = fevd(model, o.horizon, ordering, o.ridge);

    write_granger_csv(out.path("granger.csv"), data.variables, granger);
    CausalGraph merged = pnet;
    merged.edges.insert(merged.edges.end(), gnet.edges.begin(), gnet.edges.end());
    write_text(out.path("graph.json"), merged.to_json().dump(2) + "\n");
    write_text(out.path("graph.dot"), merged.to_dot());
    write_irf_csv(out.path("irf.csv"), irf);
    write_fevd_csv(out.path("fevd.csv"), fe);
    write_coefficients_csv(out.path("coefficients.csv"), model);
    nlohmann::json mj = to_json(model);
    if (sel) mj["lag_selection"] = to_json(*sel);
    mj["cholesky_ordering"] = ordering;
    write_text(out.path("model.json"), mj.dump(2) + "\n");
    write_manifest(out, o, {o.input});
    std::cout << "discover: p=" << p << ", granger edges=" << gnet.edges.size()
              << ", refined edges=" << pnet.edges.size() << " -> "
              << o.output_dir << "\n";
    return 0;
  } catch (...) {
    out.rollback();
    throw;
  }
}

int cmd_validate(const Options& o) {
  OutputSet out(o.output_dir);
  try {
    DgpSpec spec;
    spec.k = o.mc_vars;
    spec.n = o.mc_entities;
    spec.t = o.mc_years;
    spec.diag = o.mc_diag;
    spec.offdiag_low = -o.mc_offdiag;
    spec.offdiag_high = o.mc_offdiag;
    spec.noise_sd = o.mc_noise_sd;
    spec.seed = o.seed;
    McReport mc = monte_carlo_validate(spec, o.mc_reps, o.threads);

    nlohmann::json j;
    j["monte_carlo"] = to_json(mc);
    j["monte_carlo"]["dgp"] = {{"k", spec.k},     {"n", spec.n},
                               {"t", spec.t},     {"diag", spec.diag},
                               {"offdiag", o.mc_offdiag}, {"noise_sd", spec.noise_sd}};
    j["monte_carlo"]["targets"] = {{"mean_abs_bias", "<0.15"},
                                   {"ci_coverage", "93-96%"}};

    PermReport perm;
    RobustnessTable robust;
    std::vector<std::string> inputs;
    if (!o.input.empty()) {
      PanelDataset data = load_input(o);
      TransformLog log;
      if (o.raw) {
        CleanStats cstats;
        PanelDataset clean = clean_panel(data, o.max_missing, &cstats);
        data = first_difference(clean, &log);
      }
      int p = o.p == 0 ? 1 : o.p;
      perm = permutation_falsification(data, p, o.alpha, o.permutation_reps,
                                       o.seed, o.threads);
      j["permutation"] = to_json(perm);
      j["permutation"]["note"] =
          "entity assignment permuted independently per variable";

      std::vector<RobustnessSpec> specs;
      for (int lag = 1; lag <= o.p_max; ++lag)
        specs.push_back({"VAR(" + std::to_string(lag) + ")", lag, {}, {}, true});
      int split = o.split_year;
      if (split == 0)
        split = data.years[data.n_years() / 2];
      specs.push_back({"Pre-" + std::to_string(split), p, {}, split - 1, true});
      specs.push_back({"Post-" + std::to_string(split), p, split, {}, true});
      specs.push_back({"With FE", p, {}, {}, true});
      specs.push_back({"No FE", p, {}, {}, false});
      robust = robustness_sweep(data, specs, o.alpha, parse_tracked(o.tracked));
      j["robustness"] = to_json(robust);
      inputs.push_back(o.input);
    }

    write_text(out.path("validation.json"), j.dump(2) + "\n");
    write_text(out.path("summary.txt"),
               validation_summary_text(mc, perm, robust));
    write_manifest(out, o, inputs);
    std::cout << "validate: bias=" << mc.mean_abs_bias
              << " coverage=" << mc.ci_coverage << " -> " << o.output_dir << "\n";
    return 0;
  } catch (...) {
    out.rollback();
    throw;
  }
}

int cmd_analyze(const Options& o) {
  OutputSet out(o.output_dir);
  try {
    PanelDataset data = load_input(o);
    TransformLog log;
    PanelDataset differenced = data;
    if (o.raw) {
      CleanStats cstats;
      PanelDataset clean = clean_panel(data, o.max_missing, &cstats);
      differenced = first_difference(clean, &log);
      data = within_transform(differenced, &log);
    }

    int p = o.p;
    if (p == 0) p = select_lag(data, o.p_max).chosen_p;
    VarModel model = estimate_var(data, p);
    CausalGraph gnet = granger_network(model, data, o.alpha);
    CausalGraph pnet = run_pcmci_plus(data, o.tau_max, o.alpha);

    CentralityTable table = centrality(gnet);
    std::map<std::string, bool> direct;
    for (const auto& n : pnet.nodes) direct[n] = false;
    for (const auto& e : pnet.edges)
      if (e.source != e.target) direct[e.source] = true;
    TierAssignment tiers = tier_classify(table, direct);

    write_centrality_csv(out.path("centrality.csv"), table);
    write_tiers_csv(out.path("tiers.csv"), tiers);

    nlohmann::json j;
    j["granger_density"] = gnet.density();
    j["pcmci_edges"] = pnet.edges.size();

    if (!data.groups.empty()) {
      auto panels = split_by_group(differenced, o.min_group_entities);
      PipelineParams params;
      params.p = p;
      params.horizon = o.horizon;
      params.tau_max = o.tau_max;
      params.alpha = o.alpha;
      params.bootstrap_reps = o.bootstrap_reps;
      params.seed = o.seed;
      params.threads = o.threads;
      params.ridge = o.ridge;
      auto het = heterogeneity_run(panels, params, parse_tracked(o.tracked));

      std::ofstream cmp(out.path("comparison.csv"), std::ios::binary);
      csv::write_row(cmp, {"group", "impulse", "response", "peak_horizon",
                           "peak", "lo", "hi", "significant"});
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& pk : het.comparison) {
        csv::write_row(cmp, {pk.group, pk.impulse, pk.response,
                             std::to_string(pk.peak_horizon),
                             csv::format_double(pk.peak), csv::format_double(pk.lo),
                             csv::format_double(pk.hi),
                             pk.significant ? "true" : "false"});
        rows.push_back({{"group", pk.group},
                        {"impulse", pk.impulse},
                        {"response", pk.response},
                        {"peak_horizon", pk.peak_horizon},
                        {"peak", pk.peak},
                        {"lo", pk.lo},
                        {"hi", pk.hi},
                        {"significant", pk.significant}});
      }
      j["heterogeneity"] = {{"comparison", rows},
                            {"non_overlap_flags", het.non_overlap_flags},
                            {"failures", het.failures}};
    }
    write_text(out.path("analysis.json"), j.dump(2) + "\n");
    std::vector<std::string> inputs = {o.input};
    if (!o.groups_file.empty()) inputs.push_back(o.groups_file);
    write_manifest(out, o, inputs);
    std::cout << "analyze: " << table.edge_count << " links -> " << o.output_dir
              << "\n";
    return 0;
  } catch (...) {
    out.rollback();
    throw;
  }
}

int cmd_sweep(const Options& o) {
  OutputSet out(o.output_dir);
  try {
    PanelDataset data = load_input(o);
    if (o.raw) {
      CleanStats cstats;
      PanelDataset clean = clean_panel(data, o.max_missing, &cstats);
      TransformLog log;
      data = within_transform(first_difference(clean, &log));
    }

    nlohmann::json j;
    LagSelection sel = select_lag(data, o.p_max);
    j["lag_sweep"] = to_json(sel);

    j["tau_sweep"] = nlohmann::json::array();
    std::ofstream sw(out.path("sweep.csv"), std::ios::binary);
    csv::write_row(sw, {"sweep", "setting", "value"});
    for (const auto& row : sel.table) {
      csv::write_row(sw, {"lag", "VAR(" + std::to_string(row.p) + ") AIC",
                          csv::format_double(row.aic)});
      csv::write_row(sw, {"lag", "VAR(" + std::to_string(row.p) + ") BIC",
                          csv::format_double(row.bic)});
    }
    for (int tau : {2, 3, 4}) {
      try {
        CausalGraph g = run_pcmci_plus(data, tau, o.alpha);
        long cross = 0;
        for (const auto& e : g.edges) cross += (e.source != e.target);
        j["tau_sweep"].push_back(
            {{"tau_max", tau}, {"edges", g.edges.size()}, {"cross_edges", cross}});
        csv::write_row(sw, {"tau_max", std::to_string(tau), std::to_string(cross)});
      } catch (const std::exception& e) {
        j["tau_sweep"].push_back({{"tau_max", tau}, {"failed", e.what()}});
        csv::write_row(sw, {"tau_max", std::to_string(tau), "failed"});
      }
    }
    write_text(out.path("sweep.json"), j.dump(2) + "\n");
    write_manifest(out, o, {o.input});
    std::cout << "sweep: chosen p=" << sel.chosen_p << " -> " << o.output_dir << "\n";
    return 0;
  } catch (...) {
    out.rollback();
    throw;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Panel VAR + conditional-independence causal discovery"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Options o;
  auto* pre = app.add_subcommand("preprocess", "Clean, difference and demean a raw panel");
  auto* disc = app.add_subcommand("discover", "Estimate VAR, Granger network, refined graph, IRF, FEVD");
  auto* val = app.add_subcommand("validate", "Monte Carlo, permutation and robustness checks");
  auto* ana = app.add_subcommand("analyze", "Centrality, tiers and group heterogeneity");
  auto* swp = app.add_subcommand("sweep", "Lag-order and tau-max sensitivity sweeps");
  for (auto* cmd : {pre, disc, val, ana, swp}) add_common(cmd, o);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(args, app);
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
    if (pre->parsed()) return cmd_preprocess(o);
    if (disc->parsed()) return cmd_discover(o);
    if (val->parsed()) return cmd_validate(o);
    if (ana->parsed()) return cmd_analyze(o);
    if (swp->parsed()) return cmd_sweep(o);
    return 1;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
