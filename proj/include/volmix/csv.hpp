#ifndef VOLMIX_CSV_HPP
#define VOLMIX_CSV_HPP

#include <string>
#include <vector>

// Minimal CSV support for the toolkit's own artifacts: comma-separated,
// UTF-8, one header row, '.' decimal separator, no quoting and no
// thousands separators.

namespace volmix {

// Shortest round-trip decimal form via std::to_chars; deterministic across
// runs and platforms, which keeps repeated exports byte-identical.
std::string format_double(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or -1.
  int column_index(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

} // namespace volmix

#endif
