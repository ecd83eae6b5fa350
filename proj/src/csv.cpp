#include "homwave/csv.hpp"

#include <cmath>
#include <cstdio>

#include "homwave/error.hpp"

namespace homwave {

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path), columns_(header.size()) {
  if (!out_) throw InvalidArgument("cannot write " + path);
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw InvalidArgument("csv row has the wrong number of cells");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

std::string CsvWriter::number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12e", v == 0.0 ? 0.0 : v);
  return buf;
}

std::string CsvWriter::integer(long v) { return std::to_string(v); }

}  // namespace homwave
