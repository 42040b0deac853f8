#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

namespace cpr {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr double kTwoPi = 6.283185307179586476925287;

struct RankError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotPsdError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoProgressError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 0-th order Bessel function of the first kind. Power series below |x| = 8,
/// rational asymptotic fit beyond.
inline double bessel_j0(double x) {
  if (!std::isfinite(x)) {
    throw std::domain_error("bessel_j0: non-finite argument");
  }
  const double ax = std::fabs(x);
  if (ax < 8.0) {
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k <= 64; ++k) {
      term *= -q / (static_cast<double>(k) * static_cast<double>(k));
      sum += term;
      if (std::fabs(term) < 1e-18 * std::fabs(sum)) {
        break;
      }
    }
    return sum;
  }
  const double z = 8.0 / ax;
  const double y = z * z;
  const double p0 =
      1.0 + y * (-0.1098628627e-2 +
                 y * (0.2734510407e-4 +
                      y * (-0.2073370639e-5 + y * 0.2093887211e-6)));
  const double q0 =
      -0.1562499995e-1 +
      y * (0.1430488765e-3 +
           y * (-0.6911147651e-5 +
                y * (0.7621095161e-6 - y * 0.934935152e-7)));
  const double xx = ax - 0.78539816339744831;
  return std::sqrt(0.63661977236758134 / ax) *
         (std::cos(xx) * p0 - z * std::sin(xx) * q0);
}

/// Hermitian square root S of a Hermitian PSD matrix, S * S^H = R.
/// Numerically tiny negative eigenvalues are clipped to zero.
inline CMatrix hermitian_sqrt(const CMatrix& r) {
  if (r.rows() != r.cols() || r.rows() < 1) {
    throw std::domain_error("hermitian_sqrt: matrix must be square");
  }
  const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
  if ((r - r.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::domain_error("hermitian_sqrt: matrix is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(CMatrix(0.5 * (r + r.adjoint())));
  RVector vals = eig.eigenvalues();
  const double lmax = std::max(vals.maxCoeff(), 0.0);
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals(i) < -1e-10 * std::max(1.0, lmax)) {
      throw NotPsdError("hermitian_sqrt: negative eigenvalue");
    }
    vals(i) = std::sqrt(std::max(vals(i), 0.0));
  }
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().adjoint();
}

/// Moore-Penrose pseudo-inverse. Singular values below
/// max(rows, cols) * eps * sigma_max are treated as zero.
inline CMatrix pseudo_inverse(const CMatrix& a) {
  if (a.rows() < 1 || a.cols() < 1) {
    throw std::domain_error("pseudo_inverse: empty matrix");
  }
  Eigen::BDCSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVector& sv = svd.singularValues();
  const double tau = static_cast<double>(std::max(a.rows(), a.cols())) *
                     std::numeric_limits<double>::epsilon() *
                     (sv.size() > 0 ? sv(0) : 0.0);
  RVector inv = RVector::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tau) {
      inv(i) = 1.0 / sv(i);
    }
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

inline CMatrix select_rows(const CMatrix& a, const std::vector<int>& idx) {
  CMatrix out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= a.rows()) {
      throw std::domain_error("select_rows: index out of range");
    }
    out.row(static_cast<Eigen::Index>(i)) = a.row(idx[i]);
  }
  return out;
}

}  // namespace cpr
