#include "ictd/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ictd {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i].find_first_of(",\"\n") != std::string::npos) {
        throw std::runtime_error("csv field needs quoting: " + fields[i]);
      }
      if (i) out += ',';
      out += fields[i];
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw std::runtime_error("csv row width differs from header");
    line(row);
  }
  return out;
}

void write_csv(const std::string& path, const CsvTable& table) {
  const std::string text = to_csv(table);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (first) {
      table.header = std::move(fields);
      first = false;
      continue;
    }
    if (fields.size() != table.header.size()) throw std::runtime_error(path + ": ragged row");
    table.rows.push_back(std::move(fields));
  }
  if (first) throw std::runtime_error(path + ": missing header");
  return table;
}

std::vector<std::string> metrics_header() {
  return {"task_index", "update_index", "msve", "p_bottom_right", "p_avg_abs_others", "q_trace_left",
          "q_trace_right", "q_avg_abs_others", "vd", "iws", "ss"};
}

std::vector<std::string> equivalence_header() { return {"kind", "seed", "layer", "abs_diff", "log10_diff"}; }

std::vector<std::string> invariant_set_header() { return {"group", "coordinate", "mean", "std_error", "z_score"}; }

std::vector<std::string> demo_header() { return {"context", "mean_msve", "std_error"}; }

CsvTable metrics_table(const std::vector<MetricRecord>& records) {
  CsvTable t{metrics_header(), {}};
  for (const MetricRecord& r : records) {
    t.rows.push_back({std::to_string(r.task_index), std::to_string(r.update_index), format_double(r.msve),
                      format_double(r.p_bottom_right), format_double(r.p_avg_abs_others),
                      format_double(r.q_trace_left), format_double(r.q_trace_right),
                      format_double(r.q_avg_abs_others), format_double(r.vd), format_double(r.iws),
                      format_double(r.ss)});
  }
  return t;
}

CsvTable equivalence_table(const EquivalenceReport& report) {
  CsvTable t{equivalence_header(), {}};
  const std::string kind = to_string(report.config.kind);
  for (std::size_t s = 0; s < report.abs_diff.size(); ++s) {
    for (std::size_t l = 1; l < report.abs_diff[s].size(); ++l) {
      const double diff = report.abs_diff[s][l];
      t.rows.push_back({kind, std::to_string(s), std::to_string(l), format_double(diff), format_double(std::log10(diff))});
    }
  }
  return t;
}

CsvTable invariant_set_table(const InvariantSetReport& report) {
  CsvTable t{invariant_set_header(), {}};
  auto add = [&](const char* group, const std::vector<CoordinateStat>& stats) {
    for (const CoordinateStat& c : stats) {
      const double z = c.std_error > 0.0 ? c.mean / c.std_error : 0.0;
      t.rows.push_back({group, c.name, format_double(c.mean), format_double(c.std_error), format_double(z)});
    }
  };
  add("off_pattern", report.off_pattern);
  add("on_pattern", report.on_pattern);
  return t;
}

CsvTable demo_table(const DemoResult& result) {
  CsvTable t{demo_header(), {}};
  for (const DemoRow& r : result.rows) {
    t.rows.push_back({std::to_string(r.context), format_double(r.mean_msve), format_double(r.std_error)});
  }
  return t;
}

bool csv_matches_schema(const std::string& path, const std::vector<std::string>& expected) {
  try {
    return read_csv(path).header == expected;
  } catch (const std::runtime_error&) {
    return false;
  }
}

}  // namespace ictd
