#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <random>

#include "causalpanel/panel.hpp"
#include "helpers.hpp"

using namespace causalpanel;

namespace {

const std::string kDir = testutil::make_temp_dir("panel");

std::string path_of(const std::string& name) { return kDir + "/" + name; }

}  // namespace

TEST_CASE("long format load fills every cell", "[panel]") {
  std::string p = path_of("long.csv");
  std::string body = "entity,year,variable,value\n";
  double val = 1.0;
  for (const std::string& e : {"AUT", "BEL"})
    for (int y : {2000, 2001, 2002})
      for (const std::string& v : {"gdp", "edu"}) {
        body += e + "," + std::to_string(y) + "," + v + "," +
                std::to_string(val) + "\n";
        val += 0.5;
      }
  testutil::write_file(p, body);

  LoadStats stats;
  PanelDataset d = load_panel(p, PanelFormat::Auto, &stats);
  CHECK(d.n_entities() == 2);
  CHECK(d.n_years() == 3);
  CHECK(d.n_vars() == 2);
  CHECK(d.missing_count() == 0);
  CHECK(stats.rows_read == 12);
  CHECK(stats.unparseable_cells == 0);
  CHECK(d.value(0, 0, 0) == Catch::Approx(1.0));
  CHECK(d.value(1, 2, 1) == Catch::Approx(6.5));
}

TEST_CASE("wide format load and header case-insensitivity", "[panel]") {
  std::string p = path_of("wide.csv");
  testutil::write_file(p,
                       "Entity,YEAR,gdp,edu\n"
                       "AUT,2000,1.5,2.5\n"
                       "AUT,2001,1.6,2.6\n"
                       "BEL,2000,9.5,,\n");
  LoadStats stats;
  PanelDataset d = load_panel(p, PanelFormat::Auto, &stats);
  CHECK(d.n_entities() == 2);
  CHECK(d.n_years() == 2);
  CHECK(d.n_vars() == 2);
  CHECK(d.value(0, 1, 0) == Catch::Approx(1.6));
  CHECK(!d.has(1, 0, 1));      // blank cell
  CHECK(!d.has(1, 1, 0));      // no 2001 row for BEL
  CHECK(stats.unparseable_cells == 0);
}

TEST_CASE("gap years inside the range become missing rows", "[panel]") {
  std::string p = path_of("gap.csv");
  testutil::write_file(p,
                       "entity,year,variable,value\n"
                       "AUT,2000,gdp,1\n"
                       "AUT,2003,gdp,4\n");
  PanelDataset d = load_panel(p);
  REQUIRE(d.n_years() == 4);  // 2000..2003 contiguous
  CHECK(d.has(0, 0, 0));
  CHECK(!d.has(0, 1, 0));
  CHECK(!d.has(0, 2, 0));
  CHECK(d.has(0, 3, 0));
}

TEST_CASE("duplicate observation is rejected", "[panel]") {
  std::string p = path_of("dup.csv");
  testutil::write_file(p,
                       "entity,year,variable,value\n"
                       "AUT,2000,gdp,1\n"
                       "AUT,2000,gdp,2\n");
  CHECK_THROWS_MATCHES(load_panel(p), DataError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("duplicate")));
}

TEST_CASE("missing mandatory column is named in the error", "[panel]") {
  std::string p = path_of("nocol.csv");
  testutil::write_file(p, "country,year,variable,value\nAUT,2000,gdp,1\n");
  CHECK_THROWS_MATCHES(load_panel(p), DataError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("entity")));
}

TEST_CASE("unparseable numeric cells count as missing", "[panel]") {
  std::string p = path_of("bad.csv");
  testutil::write_file(p,
                       "entity,year,variable,value\n"
                       "AUT,2000,gdp,n/a\n"
                       "AUT,2001,gdp,2.5\n");
  LoadStats stats;
  PanelDataset d = load_panel(p, PanelFormat::Auto, &stats);
  CHECK(stats.unparseable_cells == 1);
  CHECK(!d.has(0, 0, 0));
  CHECK(d.has(0, 1, 0));
}

TEST_CASE("missing file raises DataError with the path", "[panel]") {
  CHECK_THROWS_MATCHES(load_panel(path_of("does_not_exist.csv")), DataError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("does_not_exist")));
}

TEST_CASE("save/load round trip is exact including missing cells", "[panel]") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> noise(0.0, 3.0);
  std::bernoulli_distribution drop(0.15);
  PanelDataset d = testutil::white_noise_panel(7, 11, 3, 5);
  for (std::size_t i = 0; i < d.n_entities(); ++i)
    for (std::size_t t = 0; t < d.n_years(); ++t)
      for (std::size_t k = 0; k < d.n_vars(); ++k) {
        if (drop(rng)) d.clear_cell(i, t, k);
        else d.set(i, t, k, noise(rng));
      }

  std::string p = path_of("roundtrip.csv");
  save_panel(d, p);
  PanelDataset back = load_panel(p);
  REQUIRE(back.entities == d.entities);
  REQUIRE(back.years == d.years);
  REQUIRE(back.variables == d.variables);
  for (std::size_t i = 0; i < d.n_entities(); ++i)
    for (std::size_t t = 0; t < d.n_years(); ++t)
      for (std::size_t k = 0; k < d.n_vars(); ++k) {
        REQUIRE(back.has(i, t, k) == d.has(i, t, k));
        if (d.has(i, t, k))
          REQUIRE(back.value(i, t, k) == d.value(i, t, k));  // bit-exact
      }
}

TEST_CASE("quoted fields with commas survive the round trip", "[panel]") {
  PanelDataset d;
  d.entities = {"Congo, Dem. Rep.", "Plain"};
  d.years = {2000, 2001};
  d.variables = {"say \"hi\""};
  d.allocate();
  d.set(0, 0, 0, 1.0);
  d.set(0, 1, 0, 2.0);
  d.set(1, 0, 0, 3.0);
  d.set(1, 1, 0, 4.0);
  std::string p = path_of("quoted.csv");
  save_panel(d, p);
  PanelDataset back = load_panel(p);
  CHECK(back.entities == d.entities);
  CHECK(back.variables == d.variables);
  CHECK(back.value(0, 1, 0) == 2.0);
}

TEST_CASE("clean drops entities over the missing threshold", "[panel]") {
  PanelDataset d = testutil::white_noise_panel(3, 10, 2, 7);
  // entity 1: 50% missing
  for (std::size_t t = 0; t < 10; ++t)
    if (t % 2 == 0) {
      d.clear_cell(1, t, 0);
      d.clear_cell(1, t, 1);
    }
  CleanStats stats;
  PanelDataset out = clean_panel(d, 0.4, &stats);
  CHECK(out.n_entities() == 2);
  REQUIRE(stats.dropped_entities.size() == 1);
  CHECK(stats.dropped_entities[0] == "E1");

  // threshold 1.0 keeps everyone
  CHECK(clean_panel(d, 1.0).n_entities() == 3);
  CHECK_THROWS_AS(clean_panel(d, -0.1), ConfigError);
}

TEST_CASE("clean interpolates interior gaps, leaves edges missing", "[panel]") {
  PanelDataset d;
  d.entities = {"A"};
  d.years = {2000, 2001, 2002, 2003, 2004};
  d.variables = {"x"};
  d.allocate();
  d.set(0, 1, 0, 1.0);
  d.set(0, 3, 0, 5.0);  // edge years 2000 and 2004 missing, 2002 interior gap
  CleanStats stats;
  PanelDataset out = clean_panel(d, 1.0, &stats);
  CHECK(out.value(0, 2, 0) == Catch::Approx(3.0));
  CHECK(!out.has(0, 0, 0));
  CHECK(!out.has(0, 4, 0));
  CHECK(stats.interpolated_cells == 1);
  CHECK(stats.edge_missing_cells == 2);

  // idempotence: cleaning again changes nothing
  PanelDataset again = clean_panel(out, 1.0);
  CHECK(again.values == out.values);
  CHECK(again.present == out.present);
}

TEST_CASE("clean with everything missing over threshold errors", "[panel]") {
  PanelDataset d = testutil::white_noise_panel(2, 5, 1, 3);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t t = 0; t < 5; ++t) d.clear_cell(i, t, 0);
  CHECK_THROWS_AS(clean_panel(d, 0.5), DataError);
}

TEST_CASE("group split partitions and enforces the size floor", "[panel]") {
  PanelDataset d = testutil::white_noise_panel(8, 5, 2, 11);
  for (std::size_t i = 0; i < 5; ++i) d.groups["E" + std::to_string(i)] = "High";
  for (std::size_t i = 5; i < 8; ++i) d.groups["E" + std::to_string(i)] = "Low";

  std::vector<std::string> skipped;
  auto both = split_by_group(d, 1, &skipped);
  REQUIRE(both.size() == 2);
  CHECK(both.at("High").n_entities() == 5);
  CHECK(both.at("Low").n_entities() == 3);
  CHECK(skipped.empty());
  // disjoint & union
  std::set<std::string> all;
  for (const auto& [label, sub] : both)
    for (const auto& e : sub.entities) CHECK(all.insert(e).second);
  CHECK(all.size() == 8);

  auto only = split_by_group(d, 4, &skipped);
  CHECK(only.size() == 1);
  REQUIRE(skipped.size() == 1);
  CHECK(skipped[0] == "Low");

  PanelDataset nogroups = testutil::white_noise_panel(3, 5, 2, 1);
  CHECK_THROWS_AS(split_by_group(nogroups, 1), DataError);
}

TEST_CASE("group file loads entity labels", "[panel]") {
  std::string p = path_of("groups.csv");
  testutil::write_file(p, "entity,label\nAUT,HighIncome\nTCD,LowIncome\n");
  auto g = load_groups(p);
  CHECK(g.at("AUT") == "HighIncome");
  CHECK(g.at("TCD") == "LowIncome");
  CHECK(parse_income_group("HighIncome").has_value());
  CHECK(!parse_income_group("Middle").has_value());
}

TEST_CASE("subset_years and subset_variables keep alignment", "[panel]") {
  PanelDataset d = testutil::white_noise_panel(3, 6, 3, 21);
  PanelDataset y = subset_years(d, 2002, 2004);
  REQUIRE(y.n_years() == 3);
  CHECK(y.value(2, 0, 1) == d.value(2, 2, 1));
  CHECK_THROWS_AS(subset_years(d, 2010, 2011), DataError);
  CHECK_THROWS_AS(subset_years(d, 2004, 2002), ConfigError);

  PanelDataset v = subset_variables(d, {"V3", "V1"});
  REQUIRE(v.variables == std::vector<std::string>{"V3", "V1"});
  CHECK(v.value(1, 3, 0) == d.value(1, 3, 2));
  CHECK(v.value(1, 3, 1) == d.value(1, 3, 0));
  CHECK_THROWS_AS(subset_variables(d, {"nope"}), DataError);
}

TEST_CASE("validate rejects malformed index sets", "[panel]") {
  PanelDataset d = testutil::white_noise_panel(2, 3, 1, 2);
  d.years = {2000, 2002, 2003};
  CHECK_THROWS_AS(d.validate(), DataError);
  d.years = {2000, 2001, 2002};
  d.entities = {"A", "A"};
  CHECK_THROWS_AS(d.validate(), DataError);
}
