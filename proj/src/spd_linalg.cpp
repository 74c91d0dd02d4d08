#include "mixot/spd_linalg.hpp"

#include "mixot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mixot {
namespace {

constexpr double kSymmetryTolerance = 1e-12;
constexpr double kEigenFloor = 1e-14;

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Square root of an already-symmetric matrix, no validation.
Matrix sqrt_symmetric(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  Vector lambda = eig.eigenvalues();
  const double lmax = std::max(lambda.cwiseAbs().maxCoeff(), 0.0);
  const double floor = static_cast<double>(m.rows()) * kEigenFloor * lmax;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    lambda(i) = lambda(i) > floor ? std::sqrt(lambda(i)) : 0.0;
  }
  return symmetrized(eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose());
}

// Lexicographic order on (mean, scatter) used to make two-argument formulas
// exactly symmetric.
bool lex_less(const Vector& m0, const Matrix& s0, const Vector& m1, const Matrix& s1) {
  for (Eigen::Index i = 0; i < m0.size(); ++i) {
    if (m0(i) != m1(i)) return m0(i) < m1(i);
  }
  for (Eigen::Index i = 0; i < s0.size(); ++i) {
    if (s0.data()[i] != s1.data()[i]) return s0.data()[i] < s1.data()[i];
  }
  return false;
}

void require_same_dims(const Vector& m0, const SpdMatrix& s0, const Vector& m1,
                       const SpdMatrix& s1) {
  if (m0.size() != s0.dim() || m1.size() != s1.dim() || m0.size() != m1.size()) {
    throw InvalidInput("dimension mismatch: means " + std::to_string(m0.size()) + "/" +
                       std::to_string(m1.size()) + ", scatters " + std::to_string(s0.dim()) +
                       "/" + std::to_string(s1.dim()));
  }
}

}  // namespace

double symmetry_defect(const Matrix& m) {
  const double norm = m.norm();
  if (norm == 0.0) return 0.0;
  return (m - m.transpose()).norm() / norm;
}

SpdMatrix::SpdMatrix(const Matrix& m, bool degenerate) : degenerate_(degenerate) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    throw InvalidInput("SPD matrix must be square and non-empty, got " +
                       std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  if (!m.allFinite()) throw InvalidInput("SPD matrix has non-finite entries");
  if (symmetry_defect(m) > kSymmetryTolerance) {
    throw InvalidInput("matrix is not symmetric (relative defect " +
                       std::to_string(symmetry_defect(m)) + ")");
  }
  m_ = symmetrized(m);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m_, Eigen::EigenvaluesOnly);
  const Vector& lambda = eig.eigenvalues();
  const double lmax = lambda.maxCoeff();
  const double floor = static_cast<double>(m_.rows()) * kEigenFloor * std::max(lmax, 0.0);
  if (lmax <= 0.0 && !degenerate) throw InvalidInput("matrix is not positive definite");
  if (degenerate) {
    if (lambda.minCoeff() < -floor) {
      throw InvalidInput("matrix has a negative eigenvalue " + std::to_string(lambda.minCoeff()));
    }
  } else if (lambda.minCoeff() <= floor) {
    throw InvalidInput("matrix is not strictly positive definite (min eigenvalue " +
                       std::to_string(lambda.minCoeff()) + ")");
  }
}

SpdMatrix SpdMatrix::identity(Eigen::Index dim) { return SpdMatrix(Matrix::Identity(dim, dim)); }

SpdMatrix SpdMatrix::diagonal(const Vector& diag) { return SpdMatrix(Matrix(diag.asDiagonal())); }

Matrix sqrt_psd(const Matrix& m) {
  if (m.rows() != m.cols()) throw InvalidInput("square root of a non-square matrix");
  if (symmetry_defect(m) > kSymmetryTolerance) {
    throw InvalidInput("square root of a non-symmetric matrix");
  }
  return sqrt_symmetric(symmetrized(m));
}

SpdMatrix sqrt_spd(const SpdMatrix& m) {
  return SpdMatrix(sqrt_symmetric(m.matrix()), m.degenerate());
}

Matrix inv_sqrt_spd(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(m));
  const Vector& lambda = eig.eigenvalues();
  const double floor = static_cast<double>(m.rows()) * kEigenFloor * lambda.cwiseAbs().maxCoeff();
  if (lambda.minCoeff() <= floor) {
    throw SingularSource("matrix is singular (min eigenvalue " +
                         std::to_string(lambda.minCoeff()) + ")");
  }
  const Vector inv_root = lambda.cwiseSqrt().cwiseInverse();
  return symmetrized(eig.eigenvectors() * inv_root.asDiagonal() * eig.eigenvectors().transpose());
}

double bures_squared_from_roots(const Matrix& root_a, const Matrix& root_b) {
  if (root_a == root_b) return 0.0;
  const Matrix cross = root_b * root_a;
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix polar = svd.matrixU() * svd.matrixV().transpose();
  return (root_a - root_b * polar).squaredNorm();
}

double gaussian_w2_squared(const Vector& m0, const SpdMatrix& s0, const Vector& m1,
                           const SpdMatrix& s1) {
  require_same_dims(m0, s0, m1, s1);
  if (lex_less(m1, s1.matrix(), m0, s0.matrix())) {
    return gaussian_w2_squared(m1, s1, m0, s0);
  }
  const double location = (m0 - m1).squaredNorm();
  if (s0 == s1) return location;
  return location + bures_squared_from_roots(sqrt_symmetric(s0.matrix()),
                                             sqrt_symmetric(s1.matrix()));
}

double gaussian_w2_squared_trace_form(const Vector& m0, const SpdMatrix& s0, const Vector& m1,
                                      const SpdMatrix& s1) {
  require_same_dims(m0, s0, m1, s1);
  const Matrix r0 = sqrt_symmetric(s0.matrix());
  const Matrix inner = symmetrized(r0 * s1.matrix() * r0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(inner, Eigen::EigenvaluesOnly);
  const double cross = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value =
      (m0 - m1).squaredNorm() + s0.matrix().trace() + s1.matrix().trace() - 2.0 * cross;
  return value < 0.0 ? 0.0 : value;
}

AffineMap affine_ot_map(const Vector& m0, const SpdMatrix& s0, const Vector& m1,
                        const SpdMatrix& s1) {
  require_same_dims(m0, s0, m1, s1);
  const Matrix r0 = sqrt_symmetric(s0.matrix());
  const Matrix r0_inv = inv_sqrt_spd(s0.matrix());
  const Matrix middle = sqrt_symmetric(symmetrized(r0 * s1.matrix() * r0));
  AffineMap map;
  map.linear = symmetrized(r0_inv * middle * r0_inv);
  map.offset = m1 - map.linear * m0;
  return map;
}

std::vector<double> validated_simplex(std::span<const double> weights) {
  if (weights.empty()) throw InvalidInput("empty weight vector");
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw InvalidInput("weights must be finite and nonnegative, got " + std::to_string(w));
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidInput("weights must sum to 1 within 1e-9, got " + std::to_string(total));
  }
  std::vector<double> out(weights.begin(), weights.end());
  for (double& w : out) w /= total;
  return out;
}

double barycenter_residual(const Matrix& s, std::span<const double> weights,
                           std::span<const SpdMatrix> covs) {
  const Matrix root = sqrt_symmetric(s);
  Matrix mapped = Matrix::Zero(s.rows(), s.cols());
  for (std::size_t q = 0; q < covs.size(); ++q) {
    if (weights[q] == 0.0) continue;
    mapped += weights[q] * sqrt_symmetric(symmetrized(root * covs[q].matrix() * root));
  }
  return (s - mapped).norm() / s.norm();
}

CovarianceBarycenter barycenter_covariance_detailed(std::span<const double> weights,
                                                    std::span<const SpdMatrix> covs) {
  if (covs.empty() || covs.size() != weights.size()) {
    throw InvalidInput("barycenter needs one weight per covariance");
  }
  const std::vector<double> t = validated_simplex(weights);
  const Eigen::Index dim = covs.front().dim();
  for (const auto& c : covs) {
    if (c.dim() != dim) throw InvalidInput("covariances of different dimensions");
    if (c.degenerate()) throw InvalidInput("barycenter requires strictly positive covariances");
  }

  std::vector<std::size_t> active;
  for (std::size_t q = 0; q < t.size(); ++q) {
    if (t[q] > 0.0) active.push_back(q);
  }
  if (active.size() == 1) return {covs[active.front()], 0, 0.0};
  if (std::all_of(active.begin(), active.end(),
                  [&](std::size_t q) { return covs[q] == covs[active.front()]; })) {
    return {covs[active.front()], 0, 0.0};
  }

  Matrix s = Matrix::Zero(dim, dim);
  for (std::size_t q : active) s += t[q] * covs[q].matrix();

  double residual = 0.0;
  for (int iter = 0;; ++iter) {
    const Matrix root = sqrt_symmetric(s);
    Matrix mapped = Matrix::Zero(dim, dim);
    for (std::size_t q : active) {
      mapped += t[q] * sqrt_symmetric(symmetrized(root * covs[q].matrix() * root));
    }
    residual = (s - mapped).norm() / s.norm();
    if (residual <= kBarycenterTolerance) return {SpdMatrix(s), iter, residual};
    if (iter == kBarycenterMaxIterations) {
      throw ConvergenceError("barycenter covariance fixed point did not converge", residual, iter);
    }
    const Matrix root_inv = inv_sqrt_spd(s);
    s = symmetrized(root_inv * mapped * mapped * root_inv);
  }
}

SpdMatrix barycenter_covariance(std::span<const double> weights, std::span<const SpdMatrix> covs) {
  return barycenter_covariance_detailed(weights, covs).covariance;
}

}  // namespace mixot
