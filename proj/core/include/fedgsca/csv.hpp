#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fedgsca::csv {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
std::string format_optional(const std::optional<double>& v);

std::vector<std::string> split_line(std::string_view line, char sep = ',');

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws std::out_of_range if absent.
  std::size_t column(std::string_view name) const;
};

/// Reads a header line plus rows. Throws std::runtime_error if the file
/// cannot be opened or a row has the wrong number of fields.
Table read_table(const std::filesystem::path& path);

}  // namespace fedgsca::csv
