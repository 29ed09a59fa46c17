#ifndef NISME_CSV_HPP
#define NISME_CSV_HPP

#include <filesystem>
#include <string>
#include <vector>

namespace nisme {

// Numeric table with a header row. All run artifacts go through this type so
// that metrics recomputed from disk agree bit-for-bit with the in-memory run.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 when absent
  std::vector<int> columns_with_prefix(const std::string& prefix) const;
};

// Doubles at 17 significant digits (round-trip exact), comma separators,
// LF line endings, UTF-8.
std::string format_double(double value);
void write_csv(const std::filesystem::path& path, const Table& table);
Table read_csv(const std::filesystem::path& path);

}  // namespace nisme

#endif  // NISME_CSV_HPP
