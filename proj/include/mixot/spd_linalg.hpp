#pragma once

// Symmetric positive (semi)definite matrix kernel: square roots, the Bures /
// Gaussian W2 formula, affine optimal transport maps and the barycenter
// covariance fixed point.

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace mixot {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Symmetric matrix with nonnegative spectrum.
///
/// Construction validates symmetry (relative Frobenius 1e-12) and positivity:
/// every eigenvalue must exceed dim * 1e-14 * lambda_max unless the matrix is
/// explicitly flagged degenerate, in which case eigenvalues down to
/// -dim * 1e-14 * lambda_max are tolerated. The stored matrix is exactly
/// symmetric.
class SpdMatrix {
 public:
  SpdMatrix() = default;
  explicit SpdMatrix(const Matrix& m, bool degenerate = false);

  static SpdMatrix identity(Eigen::Index dim);
  static SpdMatrix diagonal(const Vector& diag);

  const Matrix& matrix() const noexcept { return m_; }
  Eigen::Index dim() const noexcept { return m_.rows(); }
  bool degenerate() const noexcept { return degenerate_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  friend bool operator==(const SpdMatrix& a, const SpdMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
  }

 private:
  Matrix m_;
  bool degenerate_ = false;
};

/// Relative symmetry defect ||M - M^T||_F / ||M||_F.
double symmetry_defect(const Matrix& m);

/// Principal square root by symmetric eigendecomposition. Eigenvalues below
/// dim * 1e-14 * lambda_max are clamped to zero. Throws InvalidInput on a
/// non-symmetric argument.
Matrix sqrt_psd(const Matrix& m);
SpdMatrix sqrt_spd(const SpdMatrix& m);

/// Inverse principal square root; throws SingularSource if m is singular.
Matrix inv_sqrt_spd(const Matrix& m);

/// Squared Bures distance between two PSD matrices given their square roots.
///
/// Evaluated as ||A^{1/2} - B^{1/2} U||_F^2 with U the orthogonal polar factor
/// of B^{1/2} A^{1/2}; equal to Tr(A + B - 2 (A^{1/2} B A^{1/2})^{1/2}) but
/// without cancellation when A is close to B.
double bures_squared_from_roots(const Matrix& root_a, const Matrix& root_b);

/// ||m0 - m1||^2 + Tr(S0 + S1 - 2 (S0^{1/2} S1 S0^{1/2})^{1/2}).
///
/// Bit-for-bit symmetric under argument swap; exactly zero for identical
/// arguments.
double gaussian_w2_squared(const Vector& m0, const SpdMatrix& s0, const Vector& m1,
                           const SpdMatrix& s1);

/// Same quantity through the trace formula. Kept as an independent route for
/// cross-checking the polar form above.
double gaussian_w2_squared_trace_form(const Vector& m0, const SpdMatrix& s0, const Vector& m1,
                                      const SpdMatrix& s1);

/// x -> linear * x + offset.
struct AffineMap {
  Matrix linear;
  Vector offset;

  Vector operator()(const Vector& x) const { return linear * x + offset; }
};

/// Optimal map between two location-scatter measures with moments (m0, S0)
/// and (m1, S1): T(x) = m1 + A (x - m0) with
/// A = S0^{-1/2} (S0^{1/2} S1 S0^{1/2})^{1/2} S0^{-1/2}.
/// Throws SingularSource when S0 is degenerate.
AffineMap affine_ot_map(const Vector& m0, const SpdMatrix& s0, const Vector& m1,
                        const SpdMatrix& s1);

struct CovarianceBarycenter {
  SpdMatrix covariance;
  int iterations = 0;
  /// ||S - sum_q t_q (S^{1/2} S_q S^{1/2})^{1/2}||_F / ||S||_F at exit.
  double relative_residual = 0.0;
};

inline constexpr int kBarycenterMaxIterations = 200;
inline constexpr double kBarycenterTolerance = 1e-8;

/// Solves S = sum_q t_q (S^{1/2} S_q S^{1/2})^{1/2} by the fixed-point
/// iteration S <- S^{-1/2} (sum_q t_q (S^{1/2} S_q S^{1/2})^{1/2})^2 S^{-1/2},
/// started at the weighted arithmetic mean. Throws ConvergenceError after
/// kBarycenterMaxIterations.
CovarianceBarycenter barycenter_covariance_detailed(std::span<const double> weights,
                                                    std::span<const SpdMatrix> covs);

SpdMatrix barycenter_covariance(std::span<const double> weights, std::span<const SpdMatrix> covs);

/// Fixed-point residual of a candidate barycenter, relative to ||S||_F.
double barycenter_residual(const Matrix& s, std::span<const double> weights,
                           std::span<const SpdMatrix> covs);

/// Validates a weight vector: entries >= 0 and sum 1 within 1e-9.
/// Returns the exactly renormalized copy.
std::vector<double> validated_simplex(std::span<const double> weights);

}  // namespace mixot
