#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace homwave {

/// Minimal CSV writer with fixed number formatting, so that identical inputs
/// give byte-identical files.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);

  static std::string number(double v);
  static std::string integer(long v);

 private:
  std::ofstream out_;
  std::size_t columns_;
};

}  // namespace homwave
