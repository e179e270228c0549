// CSV tables for every artifact the command-line tool writes, and a reader
// used to self-check emitted files against their schemas.

#pragma once

#include <string>
#include <vector>

#include "ictd/metrics.hpp"
#include "ictd/verify.hpp"

namespace ictd {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// printf("%.17g"), which reads back to the same double.
std::string format_double(double x);

/// Comma-separated with a header row and '\n' line ends. Fields never contain
/// commas or quotes, so no quoting is done; write_csv throws if one does.
void write_csv(const std::string& path, const CsvTable& table);
std::string to_csv(const CsvTable& table);
/// Throws std::runtime_error on ragged rows or a missing header.
CsvTable read_csv(const std::string& path);

std::vector<std::string> metrics_header();
std::vector<std::string> equivalence_header();
std::vector<std::string> invariant_set_header();
std::vector<std::string> demo_header();

CsvTable metrics_table(const std::vector<MetricRecord>& records);
/// One row per seed and layer 1..L.
CsvTable equivalence_table(const EquivalenceReport& report);
CsvTable invariant_set_table(const InvariantSetReport& report);
CsvTable demo_table(const DemoResult& result);

/// True when the file parses and its header equals `expected`.
bool csv_matches_schema(const std::string& path, const std::vector<std::string>& expected);

}  // namespace ictd
