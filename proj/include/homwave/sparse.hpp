#pragma once

#include <Eigen/SparseCore>
#include <cstddef>
#include <span>
#include <vector>

#include "homwave/kernels.hpp"

namespace homwave {

struct Triplet {
  int row;
  int col;
  double value;
};

/// Square-or-rectangular CSR matrix with sorted, duplicate-free rows.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  /// Duplicates are summed.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nonzeros() const { return values_.size(); }

  kernels::CsrView view() const { return {rows_, row_ptr_, col_, values_}; }
  void apply(std::span<const double> x, std::span<double> y) const { kernels::spmv(view(), x, y); }
  std::vector<double> apply(std::span<const double> x) const;
  std::vector<double> diagonal() const;

  /// Rows/cols picked through index maps (`-1` drops the index).
  CsrMatrix extract(std::span<const int> row_map, std::size_t new_rows, std::span<const int> col_map,
                    std::size_t new_cols) const;

  Eigen::SparseMatrix<double> to_eigen() const;

  std::span<const int> row_ptr() const { return row_ptr_; }
  std::span<const int> col_index() const { return col_; }
  std::span<const double> values() const { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_;
  std::vector<double> values_;
};

}  // namespace homwave
