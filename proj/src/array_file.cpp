#include "homwave/array_file.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "homwave/error.hpp"

namespace homwave {

ArrayData read_array_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open array file " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "homwave-array" || version != 1) throw InvalidArgument(path + ": not a homwave-array v1 file");
  ArrayData a;
  std::string key;
  in >> key >> a.dim;
  if (key != "dim" || (a.dim != 1 && a.dim != 2)) throw InvalidArgument(path + ": bad 'dim' line");
  in >> key;
  if (key != "resolution") throw InvalidArgument(path + ": expected 'resolution'");
  in >> a.resolution[0];
  a.resolution[1] = 1;
  if (a.dim == 2) in >> a.resolution[1];
  in >> key >> a.components;
  if (key != "components" || a.components < 1) throw InvalidArgument(path + ": bad 'components' line");
  if (!in || a.resolution[0] < 1 || a.resolution[1] < 1) throw InvalidArgument(path + ": bad header");
  const std::size_t n = static_cast<std::size_t>(a.resolution[0]) * a.resolution[1] * a.components;
  a.values.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!(in >> a.values[i])) throw InvalidArgument(path + ": expected " + std::to_string(n) + " values, got " + std::to_string(i));
  double extra;
  if (in >> extra) throw InvalidArgument(path + ": trailing values after the declared count");
  return a;
}

void write_array_file(const std::string& path, const ArrayData& data) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write array file " + path);
  out << "homwave-array 1\n";
  out << "dim " << data.dim << "\n";
  out << "resolution " << data.resolution[0];
  if (data.dim == 2) out << ' ' << data.resolution[1];
  out << "\ncomponents " << data.components << "\n";
  out << std::setprecision(17);
  const std::size_t per_line = static_cast<std::size_t>(data.components);
  for (std::size_t i = 0; i < data.values.size(); ++i) {
    out << data.values[i];
    out << ((i + 1) % per_line == 0 ? '\n' : ' ');
  }
}

}  // namespace homwave
