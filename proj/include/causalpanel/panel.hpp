#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "causalpanel/csv.hpp"
#include "causalpanel/errors.hpp"

namespace causalpanel {

enum class IncomeGroup { HighIncome, UpperMiddle, LowerMiddle, LowIncome };

inline std::string to_string(IncomeGroup g) {
  switch (g) {
    case IncomeGroup::HighIncome: return "HighIncome";
    case IncomeGroup::UpperMiddle: return "UpperMiddle";
    case IncomeGroup::LowerMiddle: return "LowerMiddle";
    case IncomeGroup::LowIncome: return "LowIncome";
  }
  throw ConfigError("invalid income group");
}

inline std::optional<IncomeGroup> parse_income_group(const std::string& s) {
  if (s == "HighIncome") return IncomeGroup::HighIncome;
  if (s == "UpperMiddle") return IncomeGroup::UpperMiddle;
  if (s == "LowerMiddle") return IncomeGroup::LowerMiddle;
  if (s == "LowIncome") return IncomeGroup::LowIncome;
  return std::nullopt;
}

// Entity-by-year-by-variable panel with an explicit presence mask.
// Immutable by convention after construction; all pipeline stages return
// fresh copies.
struct PanelDataset {
  std::vector<std::string> entities;
  std::vector<int> years;  // strictly increasing, unit step
  std::vector<std::string> variables;
  std::vector<double> values;         // [entity][year][variable]
  std::vector<std::uint8_t> present;  // same layout
  std::map<std::string, std::string> groups;  // entity -> group label

  std::size_t n_entities() const { return entities.size(); }
  std::size_t n_years() const { return years.size(); }
  std::size_t n_vars() const { return variables.size(); }

  std::size_t idx(std::size_t i, std::size_t t, std::size_t k) const {
    return (i * years.size() + t) * variables.size() + k;
  }
  double value(std::size_t i, std::size_t t, std::size_t k) const {
    return values[idx(i, t, k)];
  }
  bool has(std::size_t i, std::size_t t, std::size_t k) const {
    return present[idx(i, t, k)] != 0;
  }
  void set(std::size_t i, std::size_t t, std::size_t k, double v) {
    values[idx(i, t, k)] = v;
    present[idx(i, t, k)] = 1;
  }
  void clear_cell(std::size_t i, std::size_t t, std::size_t k) {
    values[idx(i, t, k)] = 0.0;
    present[idx(i, t, k)] = 0;
  }

  std::size_t missing_count() const {
    std::size_t m = 0;
    for (auto p : present) m += (p == 0);
    return m;
  }

  std::size_t entity_index(const std::string& name) const {
    auto it = std::find(entities.begin(), entities.end(), name);
    if (it == entities.end()) throw DataError("unknown entity: " + name);
    return static_cast<std::size_t>(it - entities.begin());
  }
  std::size_t var_index(const std::string& name) const {
    auto it = std::find(variables.begin(), variables.end(), name);
    if (it == variables.end()) throw DataError("unknown variable: " + name);
    return static_cast<std::size_t>(it - variables.begin());
  }

  void allocate() {
    values.assign(entities.size() * years.size() * variables.size(), 0.0);
    present.assign(values.size(), 0);
  }

  void validate() const {
    for (std::size_t t = 1; t < years.size(); ++t)
      if (years[t] != years[t - 1] + 1)
        throw DataError("years must be strictly increasing with unit step");
    if (values.size() != entities.size() * years.size() * variables.size() ||
        present.size() != values.size())
      throw DataError("value array dimensions do not match index sets");
    std::unordered_set<std::string> seen;
    for (const auto& e : entities)
      if (!seen.insert(e).second) throw DataError("duplicate entity: " + e);
  }
};

enum class PanelFormat { Auto, Long, Wide };

struct LoadStats {
  std::size_t unparseable_cells = 0;
  std::size_t rows_read = 0;
};

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (...) {
    return std::nullopt;
  }
}

inline std::optional<int> parse_year(const std::string& s) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (...) {
    return std::nullopt;
  }
}

inline std::size_t require_column(const std::vector<std::string>& header,
                                  const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (lower(header[i]) == name) return i;
  throw DataError("missing mandatory column: " + name);
}

inline std::optional<std::size_t> find_column(
    const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (lower(header[i]) == name) return i;
  return std::nullopt;
}

}  // namespace detail

inline PanelDataset load_panel(const std::string& path,
                               PanelFormat format = PanelFormat::Auto,
                               LoadStats* stats = nullptr) {
  auto rows = csv::read_file(path);
  if (rows.empty()) throw DataError("empty file: " + path);
  const auto& header = rows[0];

  if (format == PanelFormat::Auto) {
    bool has_var = detail::find_column(header, "variable").has_value();
    bool has_val = detail::find_column(header, "value").has_value();
    format = (has_var && has_val) ? PanelFormat::Long : PanelFormat::Wide;
  }

  std::size_t col_entity = detail::require_column(header, "entity");
  std::size_t col_year = detail::require_column(header, "year");

  // First pass collects index sets, second pass fills cells.
  std::vector<std::string> entities;
  std::set<int> year_set;
  std::vector<std::string> variables;
  std::unordered_set<std::string> entity_seen, var_seen;

  struct Cell {
    std::string entity;
    int year;
    std::string variable;
    std::optional<double> value;
    bool blank;
  };
  std::vector<Cell> cells;
  LoadStats local{};

  auto add_entity = [&](const std::string& e) {
    if (entity_seen.insert(e).second) entities.push_back(e);
  };
  auto add_variable = [&](const std::string& v) {
    if (var_seen.insert(v).second) variables.push_back(v);
  };

  if (format == PanelFormat::Long) {
    std::size_t col_var = detail::require_column(header, "variable");
    std::size_t col_val = detail::require_column(header, "value");
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (row.size() <= std::max({col_entity, col_year, col_var, col_val}))
        throw DataError("row " + std::to_string(r + 1) + ": too few fields");
      auto year = detail::parse_year(row[col_year]);
      if (!year)
        throw DataError("row " + std::to_string(r + 1) +
                        ": year does not parse as integer: '" + row[col_year] + "'");
      add_entity(row[col_entity]);
      add_variable(row[col_var]);
      bool blank = row[col_val].empty();
      auto v = detail::parse_double(row[col_val]);
      if (!v && !blank) ++local.unparseable_cells;
      cells.push_back({row[col_entity], *year, row[col_var], v, blank});
      year_set.insert(*year);
      ++local.rows_read;
    }
  } else {
    std::vector<std::size_t> var_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i == col_entity || i == col_year) continue;
      var_cols.push_back(i);
      add_variable(header[i]);
    }
    if (var_cols.empty()) throw DataError("wide format: no variable columns");
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (row.size() <= std::max(col_entity, col_year))
        throw DataError("row " + std::to_string(r + 1) + ": too few fields");
      auto year = detail::parse_year(row[col_year]);
      if (!year)
        throw DataError("row " + std::to_string(r + 1) +
                        ": year does not parse as integer: '" + row[col_year] + "'");
      add_entity(row[col_entity]);
      year_set.insert(*year);
      for (std::size_t c : var_cols) {
        std::string raw = c < row.size() ? row[c] : std::string();
        bool blank = raw.empty();
        auto v = detail::parse_double(raw);
        if (!v && !blank) ++local.unparseable_cells;
        cells.push_back({row[col_entity], *year, header[c], v, blank});
      }
      ++local.rows_read;
    }
  }

  if (entities.empty() || year_set.empty())
    throw DataError("no data rows in " + path);

  PanelDataset data;
  data.entities = entities;
  for (int y = *year_set.begin(); y <= *year_set.rbegin(); ++y)
    data.years.push_back(y);
  data.variables = variables;
  data.allocate();

  std::unordered_map<std::string, std::size_t> emap, vmap;
  for (std::size_t i = 0; i < entities.size(); ++i) emap[entities[i]] = i;
  for (std::size_t k = 0; k < variables.size(); ++k) vmap[variables[k]] = k;

  std::unordered_set<std::string> filled;
  for (const auto& c : cells) {
    std::size_t i = emap[c.entity];
    auto t = static_cast<std::size_t>(c.year - data.years.front());
    std::size_t k = vmap[c.variable];
    std::string key = c.entity + "\x1f" + std::to_string(c.year) + "\x1f" + c.variable;
    if (!filled.insert(key).second)
      throw DataError("duplicate (entity, year) observation: " + c.entity +
                      ", " + std::to_string(c.year) + ", " + c.variable);
    if (c.value) data.set(i, t, k, *c.value);
  }

  data.validate();
  if (stats) *stats = local;
  return data;
}

// Canonical long layout; missing cells serialize as empty value fields.
inline void save_panel(const PanelDataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  csv::write_row(out, {"entity", "year", "variable", "value"});
  for (std::size_t i = 0; i < data.n_entities(); ++i)
    for (std::size_t t = 0; t < data.n_years(); ++t)
      for (std::size_t k = 0; k < data.n_vars(); ++k) {
        std::string v =
            data.has(i, t, k) ? csv::format_double(data.value(i, t, k)) : "";
        csv::write_row(out, {data.entities[i], std::to_string(data.years[t]),
                             data.variables[k], v});
      }
}

// Two-column CSV: entity,label.
inline std::map<std::string, std::string> load_groups(const std::string& path) {
  auto rows = csv::read_file(path);
  if (rows.empty()) throw DataError("empty group file: " + path);
  std::size_t ce = detail::require_column(rows[0], "entity");
  std::size_t cl = detail::require_column(rows[0], "label");
  std::map<std::string, std::string> groups;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() <= std::max(ce, cl))
      throw DataError("group file row " + std::to_string(r + 1) + ": too few fields");
    groups[rows[r][ce]] = rows[r][cl];
  }
  return groups;
}

inline PanelDataset subset_entities(const PanelDataset& data,
                                    const std::vector<std::size_t>& keep,
                                    const std::vector<std::string>* renames = nullptr) {
  PanelDataset out;
  out.years = data.years;
  out.variables = data.variables;
  for (std::size_t j = 0; j < keep.size(); ++j)
    out.entities.push_back(renames ? (*renames)[j] : data.entities[keep[j]]);
  out.allocate();
  for (std::size_t j = 0; j < keep.size(); ++j) {
    std::size_t i = keep[j];
    for (std::size_t t = 0; t < data.n_years(); ++t)
      for (std::size_t k = 0; k < data.n_vars(); ++k)
        if (data.has(i, t, k)) out.set(j, t, k, data.value(i, t, k));
    auto it = data.groups.find(data.entities[i]);
    if (it != data.groups.end()) out.groups[out.entities[j]] = it->second;
  }
  out.validate();
  return out;
}

inline PanelDataset subset_variables(const PanelDataset& data,
                                     const std::vector<std::string>& vars) {
  PanelDataset out;
  out.entities = data.entities;
  out.years = data.years;
  out.variables = vars;
  out.groups = data.groups;
  out.allocate();
  for (std::size_t k = 0; k < vars.size(); ++k) {
    std::size_t src = data.var_index(vars[k]);
    for (std::size_t i = 0; i < data.n_entities(); ++i)
      for (std::size_t t = 0; t < data.n_years(); ++t)
        if (data.has(i, t, src)) out.set(i, t, k, data.value(i, t, src));
  }
  out.validate();
  return out;
}

inline PanelDataset subset_years(const PanelDataset& data, int from, int to) {
  if (from > to) throw ConfigError("year range empty");
  PanelDataset out;
  out.entities = data.entities;
  out.variables = data.variables;
  out.groups = data.groups;
  std::vector<std::size_t> tidx;
  for (std::size_t t = 0; t < data.n_years(); ++t)
    if (data.years[t] >= from && data.years[t] <= to) {
      out.years.push_back(data.years[t]);
      tidx.push_back(t);
    }
  if (out.years.empty()) throw DataError("no years in requested range");
  out.allocate();
  for (std::size_t i = 0; i < data.n_entities(); ++i)
    for (std::size_t t = 0; t < tidx.size(); ++t)
      for (std::size_t k = 0; k < data.n_vars(); ++k)
        if (data.has(i, tidx[t], k)) out.set(i, t, k, data.value(i, tidx[t], k));
  out.validate();
  return out;
}

struct CleanStats {
  std::vector<std::string> dropped_entities;
  std::size_t interpolated_cells = 0;
  std::size_t edge_missing_cells = 0;
};

// Drops entities whose missing fraction exceeds the threshold, then fills
// interior gaps by per-entity per-variable linear interpolation. Leading and
// trailing gaps stay missing.
inline PanelDataset clean_panel(const PanelDataset& data,
                                double max_missing_fraction,
                                CleanStats* stats = nullptr) {
  if (max_missing_fraction < 0.0 || max_missing_fraction > 1.0)
    throw ConfigError("max_missing_fraction must be in [0,1]");
  CleanStats local;
  std::vector<std::size_t> keep;
  const double cells_per_entity =
      static_cast<double>(data.n_years() * data.n_vars());
  for (std::size_t i = 0; i < data.n_entities(); ++i) {
    std::size_t missing = 0;
    for (std::size_t t = 0; t < data.n_years(); ++t)
      for (std::size_t k = 0; k < data.n_vars(); ++k)
        missing += !data.has(i, t, k);
    if (static_cast<double>(missing) / cells_per_entity <= max_missing_fraction)
      keep.push_back(i);
    else
      local.dropped_entities.push_back(data.entities[i]);
  }
  if (keep.empty()) throw DataError("clean_panel dropped every entity");

  PanelDataset out = subset_entities(data, keep);
  for (std::size_t i = 0; i < out.n_entities(); ++i) {
    for (std::size_t k = 0; k < out.n_vars(); ++k) {
      std::vector<std::size_t> obs;
      for (std::size_t t = 0; t < out.n_years(); ++t)
        if (out.has(i, t, k)) obs.push_back(t);
      if (obs.empty()) continue;
      for (std::size_t j = 0; j + 1 < obs.size(); ++j) {
        std::size_t a = obs[j], b = obs[j + 1];
        double va = out.value(i, a, k), vb = out.value(i, b, k);
        for (std::size_t t = a + 1; t < b; ++t) {
          double w = static_cast<double>(t - a) / static_cast<double>(b - a);
          out.set(i, t, k, va + w * (vb - va));
          ++local.interpolated_cells;
        }
      }
      local.edge_missing_cells += obs.front() + (out.n_years() - 1 - obs.back());
    }
  }
  if (stats) *stats = local;
  return out;
}

// One sub-panel per group label having at least min_entities members;
// smaller groups are skipped (reported via skipped, when given).
inline std::map<std::string, PanelDataset> split_by_group(
    const PanelDataset& data, std::size_t min_entities,
    std::vector<std::string>* skipped = nullptr) {
  if (data.groups.empty()) throw DataError("split_by_group: no group map present");
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < data.n_entities(); ++i) {
    auto it = data.groups.find(data.entities[i]);
    if (it != data.groups.end()) members[it->second].push_back(i);
  }
  std::map<std::string, PanelDataset> out;
  for (const auto& [label, idx] : members) {
    if (idx.size() >= min_entities)
      out.emplace(label, subset_entities(data, idx));
    else if (skipped)
      skipped->push_back(label);
  }
  if (out.empty()) throw DataError("no group meets the minimum entity count");
  return out;
}

}  // namespace causalpanel
