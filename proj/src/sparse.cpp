#include "homwave/sparse.hpp"

#include <algorithm>

#include "homwave/error.hpp"

namespace homwave {

CsrMatrix CsrMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries) {
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  CsrMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.row_ptr_.assign(rows + 1, 0);
  m.col_.reserve(entries.size());
  m.values_.reserve(entries.size());
  int last_row = -1;
  int last_col = -1;
  for (const auto& t : entries) {
    if (t.row < 0 || t.col < 0 || static_cast<std::size_t>(t.row) >= rows ||
        static_cast<std::size_t>(t.col) >= cols)
      throw InvalidArgument("triplet index out of range");
    if (t.row == last_row && t.col == last_col) {
      m.values_.back() += t.value;
      continue;
    }
    m.col_.push_back(t.col);
    m.values_.push_back(t.value);
    ++m.row_ptr_[t.row + 1];
    last_row = t.row;
    last_col = t.col;
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

std::vector<double> CsrMatrix::apply(std::span<const double> x) const {
  std::vector<double> y(rows_);
  apply(x, y);
  return y;
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(std::min(rows_, cols_), 0.0);
  for (std::size_t r = 0; r < d.size(); ++r)
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      if (static_cast<std::size_t>(col_[k]) == r) d[r] = values_[k];
  return d;
}

CsrMatrix CsrMatrix::extract(std::span<const int> row_map, std::size_t new_rows, std::span<const int> col_map,
                             std::size_t new_cols) const {
  std::vector<Triplet> t;
  t.reserve(values_.size());
  for (std::size_t r = 0; r < rows_; ++r) {
    const int nr = row_map[r];
    if (nr < 0) continue;
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const int nc = col_map[col_[k]];
      if (nc >= 0) t.push_back({nr, nc, values_[k]});
    }
  }
  return from_triplets(new_rows, new_cols, std::move(t));
}

Eigen::SparseMatrix<double> CsrMatrix::to_eigen() const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(values_.size());
  for (std::size_t r = 0; r < rows_; ++r)
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      t.emplace_back(static_cast<int>(r), col_[k], values_[k]);
  Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

}  // namespace homwave
