#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace copulahmm::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line;  // 1-based source line of each row

  std::ptrdiff_t column(std::string_view name) const;
};

std::vector<std::string> split_line(std::string_view line);
Table read(const std::filesystem::path& path);
std::string quote(std::string_view field);

}  // namespace copulahmm::csv
