#pragma once

#include <Eigen/Core>
#include <vector>

namespace rcito {

// Compressed-sparse-row matrix with a fixed pattern; values are rewritten in
// place between evaluations so no allocation happens inside solver loops.
struct CsrMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr;    // size rows + 1
  std::vector<int> col_idx;    // size nnz, column-sorted within each row
  std::vector<double> values;  // size nnz

  static CsrMatrix from_pattern(int cols,
                                const std::vector<std::vector<int>>& row_cols) {
    CsrMatrix m;
    m.rows = static_cast<int>(row_cols.size());
    m.cols = cols;
    m.row_ptr.resize(row_cols.size() + 1);
    m.row_ptr[0] = 0;
    for (std::size_t r = 0; r < row_cols.size(); ++r) {
      m.row_ptr[r + 1] = m.row_ptr[r] + static_cast<int>(row_cols[r].size());
    }
    m.col_idx.reserve(m.row_ptr.back());
    for (const auto& cols_r : row_cols) {
      m.col_idx.insert(m.col_idx.end(), cols_r.begin(), cols_r.end());
    }
    m.values.assign(m.col_idx.size(), 0.0);
    return m;
  }

  int nnz() const { return static_cast<int>(col_idx.size()); }

  // out = A x
  void multiply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    out.resize(rows);
    for (int r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
        acc += values[k] * x[col_idx[k]];
      }
      out[r] = acc;
    }
  }

  // out = A^T w, accumulated in row order so the result is deterministic.
  void transpose_multiply(const Eigen::VectorXd& w, Eigen::VectorXd& out) const {
    out.setZero(cols);
    for (int r = 0; r < rows; ++r) {
      const double wr = w[r];
      if (wr == 0.0) continue;
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
        out[col_idx[k]] += values[k] * wr;
      }
    }
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
        d(r, col_idx[k]) = values[k];
      }
    }
    return d;
  }
};

}  // namespace rcito
