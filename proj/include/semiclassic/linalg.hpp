#pragma once

#include <Eigen/Dense>
#include <complex>

#include "semiclassic/defaults.hpp"
#include "semiclassic/errors.hpp"

namespace semiclassic {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr Complex kI = Complex(0.0, 1.0);

template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& a) {
  return a.cwiseAbs().maxCoeff();
}

// Ambient symplectic data: J0 in the [[0,-I],[I,0]] block convention and the
// Gram matrix W of the form, omega(x, y) = x^T W y with W = J0^T.
inline Mat ambient_j0(int two_n) {
  if (two_n <= 0 || two_n % 2 != 0) {
    throw DimensionError("ambient_j0 needs a positive even dimension, got " +
                         std::to_string(two_n));
  }
  const int n = two_n / 2;
  Mat j = Mat::Zero(two_n, two_n);
  j.topRightCorner(n, n) = -Mat::Identity(n, n);
  j.bottomLeftCorner(n, n) = Mat::Identity(n, n);
  return j;
}

inline Mat omega_gram(int two_n) { return ambient_j0(two_n).transpose(); }

// omega extended complex-bilinearly (no conjugation).
template <typename VA, typename VB>
Complex omega_bilinear(const Mat& gram, const VA& x, const VB& y) {
  return (x.transpose() * gram.template cast<Complex>() * y)(0, 0);
}

inline double omega_real(const Mat& gram, const Vec& x, const Vec& y) {
  return x.dot(gram * y);
}

inline void require_square_even(const Mat& m, const char* who) {
  if (m.rows() != m.cols() || m.rows() == 0 || m.rows() % 2 != 0) {
    throw DimensionError(std::string(who) + " needs a square even-dimensional matrix, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

// True iff M^T J0 M = J0 within tol (max norm).
inline bool check_symplectic(const Mat& m, double tol = defaults::tol_symp) {
  require_square_even(m, "check_symplectic");
  const Mat j0 = ambient_j0(static_cast<int>(m.rows()));
  return max_abs(m.transpose() * j0 * m - j0) <= tol;
}

// Mode operator of D = -1/2 J (d/dt + E) on the Fourier mode e^{2 pi i m t}.
inline CMat mode_operator(const Mat& j, const CMat& e, int m) {
  const int d = static_cast<int>(e.rows());
  return -0.5 * j.cast<Complex>() *
         (e + Complex(0.0, 2.0 * kPi * m) * CMat::Identity(d, d));
}

// Square root and inverse square root of a symmetric positive definite S,
// used to turn metric-self-adjoint operators into plainly Hermitian ones.
struct MetricSqrt {
  Mat half;
  Mat inv_half;
};

inline MetricSqrt metric_sqrt(const Mat& s) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (s + s.transpose()));
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
    throw ConfigError("metric matrix is not positive definite");
  }
  const Vec root = es.eigenvalues().cwiseSqrt();
  MetricSqrt out;
  out.half = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  out.inv_half = es.eigenvectors() * root.cwiseInverse().asDiagonal() *
                 es.eigenvectors().transpose();
  return out;
}

// Eigenvalues of a (near-)Hermitian complex matrix, ascending.
inline Vec hermitian_eigenvalues(const CMat& h) {
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (h + h.adjoint()));
  if (es.info() != Eigen::Success) {
    throw MatchingError("Hermitian eigenvalue solve failed");
  }
  return es.eigenvalues();
}

}  // namespace semiclassic
