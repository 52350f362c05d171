#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace itokit {

// Writes numeric tables with %.17g formatting so files round-trip doubles
// exactly and byte-identical reruns produce byte-identical files.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::span<const std::string> columns);

  void row(std::span<const double> values);
  void close();

 private:
  std::ofstream out_;
  std::size_t n_columns_;
};

std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column_index(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

// FNV-1a hash of a file's bytes; used by determinism checks.
std::uint64_t hash_file(const std::filesystem::path& path);

}  // namespace itokit
