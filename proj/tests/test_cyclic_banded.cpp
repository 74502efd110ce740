#include <doctest.h>

#include <random>

#include "mrwave/cyclic_banded.hpp"
#include "mrwave/errors.hpp"

using namespace mrwave;

namespace {

CyclicBlockBandedMatrix random_system(std::mt19937& rng, int N, int n, int bw) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CyclicBlockBandedMatrix a(N, n, bw);
  for (int l = 0; l < N; ++l) {
    for (int s = 0; s < a.width(); ++s) {
      auto b = a.slot(l, s);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) b(i, j) = u(rng);
    }
    a.block(l, l) += Eigen::MatrixXd::Identity(n, n) * (2.0 * n * (2 * bw + 1));
  }
  return a;
}

}  // namespace

TEST_CASE("solve matches a dense LU") {
  std::mt19937 rng(11);
  for (int N : {16, 20, 64, 100}) {
    for (int n : {1, 3}) {
      for (int bw : {1, 3}) {
        const CyclicBlockBandedMatrix a = random_system(rng, N, n, bw);
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Random(N * n, 2);
        const Eigen::MatrixXd x = CyclicBandedLU(a).solve(rhs);
        const Eigen::MatrixXd ref = a.to_dense().fullPivLu().solve(rhs);
        CHECK((x - ref).norm() <= 1e-10 * ref.norm());
      }
    }
  }
}

TEST_CASE("banded and dense paths agree on large systems") {
  std::mt19937 rng(12);
  const CyclicBlockBandedMatrix a = random_system(rng, 200, 2, 3);
  const CyclicBandedLU lu(a);
  CHECK_FALSE(lu.dense_mode());
  const Eigen::MatrixXd rhs = Eigen::MatrixXd::Random(400, 1);
  const Eigen::MatrixXd x = lu.solve(rhs);
  CHECK((a.multiply(x) - rhs).norm() <= 1e-12 * rhs.norm());
}

TEST_CASE("coefficient-matrix right-hand sides") {
  std::mt19937 rng(13);
  const CyclicBlockBandedMatrix a = random_system(rng, 60, 3, 2);
  Coeffs rhs = Coeffs::Random(60, 3);
  const Coeffs x = CyclicBandedLU(a).solve(rhs);
  const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(rhs.data(), rhs.size());
  CHECK((a.multiply(flat) - r).norm() <= 1e-12 * r.norm());
}

TEST_CASE("identity blocks return the right-hand side") {
  CyclicBlockBandedMatrix a(50, 2, 3);
  for (int l = 0; l < 50; ++l) a.block(l, l) = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd rhs = Eigen::MatrixXd::Random(100, 3);
  CHECK((CyclicBandedLU(a).solve(rhs) - rhs).norm() <= 1e-15 * rhs.norm());
}

TEST_CASE("wrapped corner blocks are stored") {
  CyclicBlockBandedMatrix a(10, 1, 2);
  CHECK(a.in_band(0, 9));
  CHECK(a.in_band(0, -2));
  CHECK_FALSE(a.in_band(0, 5));
  CHECK_THROWS_AS(a.block(0, 5), std::out_of_range);
  a.block(0, -1)(0, 0) = 4.0;
  CHECK(a.to_dense()(0, 9) == 4.0);
}

TEST_CASE("singular systems raise instead of returning garbage") {
  std::mt19937 rng(14);
  for (int N : {16, 100}) {
    CyclicBlockBandedMatrix a = random_system(rng, N, 2, 2);
    for (int s = 0; s < a.width(); ++s) a.slot(7, s).row(1).setZero();
    CHECK_THROWS_AS(CyclicBandedLU{a}, SingularMatrixError);
    try {
      CyclicBandedLU lu(a);
    } catch (const SingularMatrixError& e) {
      CHECK(e.block() == 7);
    }
  }
  // Rank deficient without a zero row: two equal block rows.
  CyclicBlockBandedMatrix b(8, 1, 1);
  for (int l = 0; l < 8; ++l) {
    b.block(l, l)(0, 0) = 2.0;
    b.block(l, l + 1)(0, 0) = -1.0;
    b.block(l, l - 1)(0, 0) = -1.0;
  }
  CHECK_THROWS_AS(CyclicBandedLU{b}, SingularMatrixError);
}
