#include "cpr/numerics.hpp"
#include "cpr/rng.hpp"

#include "catch_amalgamated.hpp"

#include <cmath>

using namespace cpr;

namespace {

// Independent fixed-length power series oracle.
double j0_series(double x, int terms) {
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= terms; ++k) {
    term *= -0.25 * x * x / (static_cast<double>(k) * k);
    sum += term;
  }
  return sum;
}

CMatrix random_cmatrix(int rows, int cols, RngStream& rng) {
  CMatrix a(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      a(i, j) = rng.cnormal(1.0);
    }
  }
  return a;
}

}  // namespace

TEST_CASE("bessel_j0 reference values") {
  CHECK(bessel_j0(0.0) == 1.0);
  CHECK(std::fabs(bessel_j0(2.404825557695773)) < 1e-7);  // first zero
  CHECK(bessel_j0(1.0) == Catch::Approx(0.7651976866).margin(1e-9));
  CHECK_THROWS_AS(bessel_j0(std::nan("")), std::domain_error);
  CHECK_THROWS_AS(bessel_j0(INFINITY), std::domain_error);
}

TEST_CASE("bessel_j0 matches the series oracle and stays bounded") {
  for (int i = 0; i <= 400; ++i) {
    const double x = -8.0 + 16.0 * i / 400.0;
    CHECK(std::fabs(bessel_j0(x) - j0_series(x, 50)) < 1e-9);
  }
  for (int i = 0; i <= 1000; ++i) {
    const double x = -100.0 + 200.0 * i / 1000.0;
    CHECK(std::fabs(bessel_j0(x)) <= 1.0 + 1e-12);
    // cross check against libstdc++ on the asymptotic branch
    CHECK(std::fabs(bessel_j0(x) - std::cyl_bessel_j(0.0, std::fabs(x))) < 1e-7);
  }
}

TEST_CASE("hermitian_sqrt diagonal and identity cases") {
  CHECK((hermitian_sqrt(CMatrix::Identity(4, 4)) - CMatrix::Identity(4, 4)).norm() < 1e-12);
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 9.0;
  const CMatrix s = hermitian_sqrt(d);
  CHECK(std::abs(s(0, 0) - Complex(2.0, 0.0)) < 1e-12);
  CHECK(std::abs(s(1, 1) - Complex(3.0, 0.0)) < 1e-12);
  CHECK(std::abs(s(0, 1)) < 1e-12);
}

TEST_CASE("hermitian_sqrt reconstructs random PSD matrices") {
  RngStream rng(11, 0);
  for (int i = 0; i < 20; ++i) {
    const CMatrix b = random_cmatrix(8, 8, rng);
    const CMatrix r = b * b.adjoint();
    const CMatrix s = hermitian_sqrt(r);
    CHECK((s * s.adjoint() - r).norm() / r.norm() < 1e-9);
    CHECK((s - s.adjoint()).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, s.cwiseAbs().maxCoeff()));
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(s);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
  }
}

TEST_CASE("hermitian_sqrt rejects bad input") {
  RngStream rng(12, 0);
  const CMatrix a = random_cmatrix(3, 3, rng);
  CHECK_THROWS_AS(hermitian_sqrt(a + CMatrix::Identity(3, 3) * 10.0), std::domain_error);
  CMatrix indef = CMatrix::Identity(2, 2);
  indef(1, 1) = -1.0;
  CHECK_THROWS_AS(hermitian_sqrt(indef), NotPsdError);
}

TEST_CASE("pseudo_inverse basic cases") {
  CHECK((pseudo_inverse(CMatrix::Identity(3, 3)) - CMatrix::Identity(3, 3)).norm() < 1e-12);
  CMatrix col(2, 1);
  col(0, 0) = 1.0;
  col(1, 0) = 1.0;
  const CMatrix pinv = pseudo_inverse(col);
  CHECK(pinv.rows() == 1);
  CHECK(pinv.cols() == 2);
  CHECK(std::abs(pinv(0, 0) - Complex(0.5, 0.0)) < 1e-12);
  CHECK(std::abs(pinv(0, 1) - Complex(0.5, 0.0)) < 1e-12);
}

TEST_CASE("pseudo_inverse inverts full-column-rank matrices from the left") {
  RngStream rng(13, 0);
  const CMatrix a = random_cmatrix(6, 3, rng);
  CHECK((pseudo_inverse(a) * a - CMatrix::Identity(3, 3)).norm() < 1e-8);
}

TEST_CASE("pseudo_inverse satisfies the Moore-Penrose conditions") {
  RngStream rng(14, 0);
  for (int i = 0; i < 60; ++i) {
    const int rows = 1 + static_cast<int>(rng.next_u64() % 32);
    const int cols = 1 + static_cast<int>(rng.next_u64() % 32);
    CMatrix a;
    if (i % 3 == 0 && std::min(rows, cols) > 1) {
      const int r = 1 + static_cast<int>(rng.next_u64() %
                                         static_cast<unsigned>(std::min(rows, cols) - 1));
      a = random_cmatrix(rows, r, rng) * random_cmatrix(r, cols, rng);
    } else {
      a = random_cmatrix(rows, cols, rng);
    }
    const CMatrix p = pseudo_inverse(a);
    CHECK((a * p * a - a).norm() <= 1e-8 * a.norm());
    CHECK((p * a * p - p).norm() <= 1e-8 * std::max(p.norm(), 1e-30));
    CHECK((a * p - (a * p).adjoint()).norm() <= 1e-8 * std::max(1.0, (a * p).norm()));
    CHECK((p * a - (p * a).adjoint()).norm() <= 1e-8 * std::max(1.0, (p * a).norm()));
  }
}

TEST_CASE("complex_gaussian statistics") {
  RngStream rng(21, 0);
  const int n = 100000;
  const CVector v = complex_gaussian(n, 1.0, rng);
  CHECK(std::abs(v.mean()) < 0.02);
  const double var = v.squaredNorm() / n;
  CHECK(var > 0.98);
  CHECK(var < 1.02);

  double var4 = 0.0;
  for (int i = 0; i < n; ++i) {
    var4 += std::norm(rng.cnormal(4.0));
  }
  var4 /= n;
  CHECK(var4 > 4.0 * 0.95);
  CHECK(var4 < 4.0 * 1.05);

  CHECK_THROWS_AS(complex_gaussian(4, 0.0, rng), std::domain_error);
  CHECK_THROWS_AS(complex_gaussian(4, -1.0, rng), std::domain_error);
}

TEST_CASE("rng streams are deterministic and distinct") {
  RngStream a(42, 7);
  RngStream b(42, 7);
  RngStream c(42, 8);
  const CVector va = complex_gaussian(64, 1.0, a);
  const CVector vb = complex_gaussian(64, 1.0, b);
  const CVector vc = complex_gaussian(64, 1.0, c);
  CHECK((va - vb).norm() == 0.0);
  CHECK((va - vc).norm() > 0.0);
}
