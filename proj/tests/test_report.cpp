#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "ictd/report.hpp"

using namespace ictd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ictd_test_report";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("format_double reads back to the same bits") {
  for (double x : {0.1, 1.0 / 3.0, 5e-324, -0.0, 1e300, 2.5}) {
    const double y = std::strtod(format_double(x).c_str(), nullptr);
    CHECK(std::memcmp(&x, &y, sizeof x) == 0);
  }
  CHECK(format_double(2.5) == "2.5");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("csv write and read round trip") {
  CsvTable t{{"a", "b"}, {{"1", "x"}, {"2.5", "y"}}};
  CHECK(to_csv(t) == "a,b\n1,x\n2.5,y\n");
  const fs::path p = scratch("round.csv");
  write_csv(p.string(), t);
  const CsvTable back = read_csv(p.string());
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(csv_matches_schema(p.string(), {"a", "b"}));
  CHECK_FALSE(csv_matches_schema(p.string(), {"a", "c"}));
  CHECK_FALSE(csv_matches_schema(scratch("missing.csv").string(), {"a", "b"}));
}

TEST_CASE("csv rejects fields that would need quoting and ragged files") {
  CHECK_THROWS(to_csv(CsvTable{{"a"}, {{"1,2"}}}));
  CHECK_THROWS(to_csv(CsvTable{{"a\""}, {}}));
  CHECK_THROWS(to_csv(CsvTable{{"a", "b"}, {{"1"}}}));
  const fs::path p = scratch("ragged.csv");
  {
    std::ofstream f(p);
    f << "a,b\n1\n";
  }
  CHECK_THROWS_AS(read_csv(p.string()), std::runtime_error);
}

TEST_CASE("tables follow their headers") {
  EquivalenceConfig cfg;
  cfg.layers = 3;
  cfg.seeds = 2;
  const CsvTable eq = equivalence_table(verify_equivalence(cfg));
  CHECK(eq.header == equivalence_header());
  CHECK(eq.rows.size() == 6);
  for (const auto& row : eq.rows) CHECK(row.size() == eq.header.size());
  CHECK(eq.rows.front()[0] == "td0");
  CHECK(eq.rows.front()[2] == "1");

  MetricRecord r;
  r.task_index = 4;
  r.vd = std::numeric_limits<double>::quiet_NaN();
  const CsvTable m = metrics_table({r, r});
  CHECK(m.header == metrics_header());
  CHECK(m.rows.size() == 2);
  CHECK(m.rows[0][0] == "4");

  DemoResult dr;
  dr.rows = {{1, 0.5, 0.1}, {2, 0.25, 0.05}};
  const CsvTable d = demo_table(dr);
  CHECK(d.header == demo_header());
  CHECK(d.rows[1] == std::vector<std::string>{"2", "0.25", "0.050000000000000003"});
}
