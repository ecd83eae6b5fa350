#pragma once

#include <array>
#include <string>
#include <vector>

namespace homwave {

/// Text array file:
///
///     homwave-array 1
///     dim <d>
///     resolution <n1> [<n2>]
///     components <c>
///     <values...>
///
/// Values are listed node by node (axis 0 fastest), `c` entries per node; for
/// tensors the entries are row-major by (i,j).
struct ArrayData {
  int dim = 1;
  std::array<int, 2> resolution{0, 1};
  int components = 1;
  std::vector<double> values;
};

ArrayData read_array_file(const std::string& path);
void write_array_file(const std::string& path, const ArrayData& data);

}  // namespace homwave
