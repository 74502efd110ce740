#pragma once

// Block matrices whose nonzero blocks lie within a cyclic band:
// block (l, k) may be nonzero only if the cyclic distance of l and k is at
// most `bandwidth`. This is the shape of periodic spline Galerkin Jacobians.

#include <vector>

#include <Eigen/Dense>

#include "mrwave/spline.hpp"

namespace mrwave {

class CyclicBlockBandedMatrix {
 public:
  CyclicBlockBandedMatrix() = default;
  CyclicBlockBandedMatrix(int blocks, int block_size, int bandwidth);

  int blocks() const { return blocks_; }
  int block_size() const { return block_size_; }
  int bandwidth() const { return bandwidth_; }
  /// Stored blocks per block row.
  int width() const { return width_; }
  int scalar_size() const { return blocks_ * block_size_; }

  bool in_band(int row, long col) const;
  /// Block (row, col); `col` is wrapped cyclically.
  Eigen::Map<Eigen::MatrixXd> block(int row, long col);
  Eigen::Map<const Eigen::MatrixXd> block(int row, long col) const;
  /// Block at stored position `slot` of `row`; its column is column_of(row, slot).
  Eigen::Map<Eigen::MatrixXd> slot(int row, int slot);
  Eigen::Map<const Eigen::MatrixXd> slot(int row, int slot) const;
  int column_of(int row, int slot) const;

  void set_zero();
  Eigen::MatrixXd to_dense() const;
  /// y = A x for x flattened block-row-major (length blocks * block_size), any column count.
  Eigen::MatrixXd multiply(const Eigen::MatrixXd& x) const;

 private:
  int slot_of(int row, long col) const;
  int blocks_ = 0;
  int block_size_ = 0;
  int bandwidth_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Direct factorization: row/column equilibration, banded LU with partial
/// pivoting on the leading part, dense Schur complement on the cyclic border.
class CyclicBandedLU {
 public:
  /// Throws SingularMatrixError naming the offending block row.
  explicit CyclicBandedLU(const CyclicBlockBandedMatrix& a);

  /// rhs is (blocks*block_size) x k, block-row-major rows.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  /// rhs given as N x n coefficient matrix.
  Coeffs solve(const Coeffs& rhs) const;

  bool dense_mode() const { return dense_; }

 private:
  struct BandLU {
    int size = 0;
    int kl = 0;
    int ku = 0;
    int stride = 0;
    std::vector<double> band;
    std::vector<int> pivots;
    double& at(int i, int c) { return band[static_cast<std::size_t>(i) * stride + (c - i + kl)]; }
    double at(int i, int c) const {
      return band[static_cast<std::size_t>(i) * stride + (c - i + kl)];
    }
    void factor(int block_size);
    void solve_in_place(Eigen::Ref<Eigen::MatrixXd> b) const;
  };

  int n_blocks_ = 0;
  int block_size_ = 0;
  bool dense_ = false;
  Eigen::VectorXd row_scale_;
  Eigen::VectorXd col_scale_;
  Eigen::PartialPivLU<Eigen::MatrixXd> dense_lu_;
  BandLU interior_;
  Eigen::MatrixXd a12_;
  Eigen::MatrixXd a21_;
  Eigen::MatrixXd x12_;  // A11^{-1} A12
  Eigen::PartialPivLU<Eigen::MatrixXd> schur_lu_;
};

}  // namespace mrwave
