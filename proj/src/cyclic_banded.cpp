#include "mrwave/cyclic_banded.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mrwave/errors.hpp"

namespace mrwave {

namespace {

// Pivot floor after equilibration (all entries are then bounded by one).
constexpr double kPivotTol = 1e-13;

void check_dense_pivots(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu, int block_size,
                        int block_offset) {
  const Eigen::MatrixXd& f = lu.matrixLU();
  const double scale = f.diagonal().cwiseAbs().maxCoeff();
  for (int i = 0; i < f.rows(); ++i) {
    const double d = std::abs(f(i, i));
    if (!(d > kPivotTol * std::max(scale, 1e-300)) || !std::isfinite(d)) {
      throw SingularMatrixError("numerically singular pivot", block_offset + i / block_size);
    }
  }
}

}  // namespace

CyclicBlockBandedMatrix::CyclicBlockBandedMatrix(int blocks, int block_size, int bandwidth)
    : blocks_(blocks), block_size_(block_size), bandwidth_(bandwidth) {
  if (blocks <= 0 || block_size <= 0 || bandwidth < 0) {
    throw std::invalid_argument("invalid cyclic banded matrix shape");
  }
  width_ = std::min(2 * bandwidth + 1, blocks);
  data_.assign(static_cast<std::size_t>(blocks_) * width_ * block_size_ * block_size_, 0.0);
}

int CyclicBlockBandedMatrix::slot_of(int row, long col) const {
  return static_cast<int>(wrap_index(col - row + bandwidth_, blocks_));
}

bool CyclicBlockBandedMatrix::in_band(int row, long col) const {
  return slot_of(row, col) < width_;
}

int CyclicBlockBandedMatrix::column_of(int row, int slot) const {
  return static_cast<int>(wrap_index(row + slot - bandwidth_, blocks_));
}

Eigen::Map<Eigen::MatrixXd> CyclicBlockBandedMatrix::slot(int row, int s) {
  const std::size_t bs = static_cast<std::size_t>(block_size_) * block_size_;
  return {data_.data() + (static_cast<std::size_t>(row) * width_ + s) * bs, block_size_,
          block_size_};
}

Eigen::Map<const Eigen::MatrixXd> CyclicBlockBandedMatrix::slot(int row, int s) const {
  const std::size_t bs = static_cast<std::size_t>(block_size_) * block_size_;
  return {data_.data() + (static_cast<std::size_t>(row) * width_ + s) * bs, block_size_,
          block_size_};
}

Eigen::Map<Eigen::MatrixXd> CyclicBlockBandedMatrix::block(int row, long col) {
  const int s = slot_of(row, col);
  if (s >= width_) throw std::out_of_range("block outside the cyclic band");
  return slot(row, s);
}

Eigen::Map<const Eigen::MatrixXd> CyclicBlockBandedMatrix::block(int row, long col) const {
  const int s = slot_of(row, col);
  if (s >= width_) throw std::out_of_range("block outside the cyclic band");
  return slot(row, s);
}

void CyclicBlockBandedMatrix::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

Eigen::MatrixXd CyclicBlockBandedMatrix::to_dense() const {
  const int n = block_size_;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(scalar_size(), scalar_size());
  for (int l = 0; l < blocks_; ++l) {
    for (int s = 0; s < width_; ++s) {
      d.block(l * n, column_of(l, s) * n, n, n) += slot(l, s);
    }
  }
  return d;
}

Eigen::MatrixXd CyclicBlockBandedMatrix::multiply(const Eigen::MatrixXd& x) const {
  const int n = block_size_;
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(scalar_size(), x.cols());
  for (int l = 0; l < blocks_; ++l) {
    for (int s = 0; s < width_; ++s) {
      y.middleRows(l * n, n) += slot(l, s) * x.middleRows(column_of(l, s) * n, n);
    }
  }
  return y;
}

void CyclicBandedLU::BandLU::factor(int block_size) {
  for (int j = 0; j < size; ++j) {
    const int km = std::min(kl, size - 1 - j);
    int p = j;
    double best = std::abs(at(j, j));
    for (int i = 1; i <= km; ++i) {
      const double v = std::abs(at(j + i, j));
      if (v > best) {
        best = v;
        p = j + i;
      }
    }
    if (!(best > kPivotTol)) {
      throw SingularMatrixError("numerically singular pivot", j / block_size);
    }
    pivots[j] = p;
    const int ju = std::min(j + kl + ku, size - 1);
    if (p != j) {
      for (int c = j; c <= ju; ++c) std::swap(at(j, c), at(p, c));
    }
    const double piv = at(j, j);
    for (int i = 1; i <= km; ++i) {
      double& l = at(j + i, j);
      if (l == 0.0) continue;
      l /= piv;
      for (int c = j + 1; c <= ju; ++c) at(j + i, c) -= l * at(j, c);
    }
  }
}

void CyclicBandedLU::BandLU::solve_in_place(Eigen::Ref<Eigen::MatrixXd> b) const {
  for (int j = 0; j < size; ++j) {
    const int p = pivots[j];
    if (p != j) b.row(j).swap(b.row(p));
    const int km = std::min(kl, size - 1 - j);
    for (int i = 1; i <= km; ++i) {
      const double l = at(j + i, j);
      if (l != 0.0) b.row(j + i) -= l * b.row(j);
    }
  }
  for (int j = size - 1; j >= 0; --j) {
    const int ju = std::min(j + kl + ku, size - 1);
    for (int c = j + 1; c <= ju; ++c) {
      const double u = at(j, c);
      if (u != 0.0) b.row(j) -= u * b.row(c);
    }
    b.row(j) /= at(j, j);
  }
}

CyclicBandedLU::CyclicBandedLU(const CyclicBlockBandedMatrix& a)
    : n_blocks_(a.blocks()), block_size_(a.block_size()) {
  const int n = block_size_;
  const int nb = n_blocks_;
  const int bw = a.bandwidth();
  const int m = a.scalar_size();

  // Equilibrate rows, then columns.
  row_scale_ = Eigen::VectorXd::Zero(m);
  col_scale_ = Eigen::VectorXd::Zero(m);
  for (int l = 0; l < nb; ++l) {
    for (int s = 0; s < a.width(); ++s) {
      row_scale_.segment(l * n, n) =
          row_scale_.segment(l * n, n).cwiseMax(a.slot(l, s).cwiseAbs().rowwise().maxCoeff());
    }
  }
  for (int i = 0; i < m; ++i) {
    if (!(row_scale_(i) > 0.0) || !std::isfinite(row_scale_(i))) {
      throw SingularMatrixError("zero or non-finite matrix row", i / n);
    }
    row_scale_(i) = 1.0 / row_scale_(i);
  }
  for (int l = 0; l < nb; ++l) {
    for (int s = 0; s < a.width(); ++s) {
      const int k = a.column_of(l, s);
      const Eigen::MatrixXd scaled = row_scale_.segment(l * n, n).asDiagonal() * a.slot(l, s);
      col_scale_.segment(k * n, n) =
          col_scale_.segment(k * n, n).cwiseMax(scaled.cwiseAbs().colwise().maxCoeff().transpose());
    }
  }
  for (int i = 0; i < m; ++i) {
    if (!(col_scale_(i) > 0.0)) throw SingularMatrixError("zero matrix column", i / n);
    col_scale_(i) = 1.0 / col_scale_(i);
  }
  auto scaled_block = [&](int l, int s) {
    const int k = a.column_of(l, s);
    return Eigen::MatrixXd(row_scale_.segment(l * n, n).asDiagonal() * a.slot(l, s) *
                           col_scale_.segment(k * n, n).asDiagonal());
  };

  const int border = bw;
  dense_ = nb < 3 * bw + 2 || m <= 48;
  if (dense_) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
    for (int l = 0; l < nb; ++l) {
      for (int s = 0; s < a.width(); ++s) {
        d.block(l * n, a.column_of(l, s) * n, n, n) += scaled_block(l, s);
      }
    }
    dense_lu_.compute(d);
    check_dense_pivots(dense_lu_, n, 0);
    return;
  }

  const int nb1 = nb - border;
  const int m1 = nb1 * n;
  const int m2 = border * n;
  interior_.size = m1;
  interior_.kl = (bw + 1) * n - 1;
  interior_.ku = interior_.kl;
  interior_.stride = 2 * interior_.kl + interior_.ku + 1;
  interior_.band.assign(static_cast<std::size_t>(m1) * interior_.stride, 0.0);
  interior_.pivots.assign(static_cast<std::size_t>(m1), 0);
  a12_ = Eigen::MatrixXd::Zero(m1, m2);
  a21_ = Eigen::MatrixXd::Zero(m2, m1);
  Eigen::MatrixXd a22 = Eigen::MatrixXd::Zero(m2, m2);

  for (int l = 0; l < nb; ++l) {
    for (int s = 0; s < a.width(); ++s) {
      const int k = a.column_of(l, s);
      const Eigen::MatrixXd blk = scaled_block(l, s);
      if (l < nb1 && k < nb1) {
        for (int c = 0; c < n; ++c) {
          for (int r = 0; r < n; ++r) interior_.at(l * n + r, k * n + c) += blk(r, c);
        }
      } else if (l < nb1) {
        a12_.block(l * n, (k - nb1) * n, n, n) += blk;
      } else if (k < nb1) {
        a21_.block((l - nb1) * n, k * n, n, n) += blk;
      } else {
        a22.block((l - nb1) * n, (k - nb1) * n, n, n) += blk;
      }
    }
  }
  interior_.factor(n);
  x12_ = a12_;
  interior_.solve_in_place(x12_);
  schur_lu_.compute(a22 - a21_ * x12_);
  check_dense_pivots(schur_lu_, n, nb1);
}

Eigen::MatrixXd CyclicBandedLU::solve(const Eigen::MatrixXd& rhs) const {
  const int m = n_blocks_ * block_size_;
  if (rhs.rows() != m) throw std::invalid_argument("rhs size mismatch");
  Eigen::MatrixXd b = row_scale_.asDiagonal() * rhs;
  Eigen::MatrixXd y;
  if (dense_) {
    y = dense_lu_.solve(b);
  } else {
    const int m1 = interior_.size;
    const int m2 = m - m1;
    Eigen::MatrixXd t1 = b.topRows(m1);
    interior_.solve_in_place(t1);
    Eigen::MatrixXd x2 = schur_lu_.solve(b.bottomRows(m2) - a21_ * t1);
    y.resize(m, rhs.cols());
    y.topRows(m1) = t1 - x12_ * x2;
    y.bottomRows(m2) = x2;
  }
  return col_scale_.asDiagonal() * y;
}

Coeffs CyclicBandedLU::solve(const Coeffs& rhs) const {
  const Eigen::Map<const Eigen::VectorXd> flat(rhs.data(), rhs.size());
  Eigen::MatrixXd x = solve(Eigen::MatrixXd(flat));
  Coeffs out(rhs.rows(), rhs.cols());
  Eigen::Map<Eigen::VectorXd>(out.data(), out.size()) = x.col(0);
  return out;
}

}  // namespace mrwave
