#pragma once

// Location-scatter atoms: push-forwards of a standardized generator density by
// x -> m + Sigma^{1/2} x. Every atom has mean `mean` and covariance `scatter`,
// so the W2 distance and barycenters between atoms of one family only read
// the first two moments.

#include "mixot/spd_linalg.hpp"

#include <compare>
#include <span>
#include <string>
#include <vector>

namespace mixot {

enum class GeneratorKind { Gaussian, SlaterElliptical, WignerElliptical, Gamma1D };

std::string to_string(GeneratorKind kind);

/// Generator density of a location-scatter family.
///
/// Elliptical kinds use a radial profile h with density proportional to
/// h((x-m)^T Sigma^{-1} (x-m)):
///  - Gaussian:  h(x) = exp(-x/2), no parameters;
///  - Slater:    h(x) = exp(-alpha |x|^{1/2}), params = {alpha}, alpha = sqrt(d+1) by default;
///  - Wigner:    h(x) = sqrt(1 - alpha x) on x <= 1/alpha, params = {alpha}, alpha = 1/(d+3).
/// Gamma1D uses params = {shape, rate} and is standardized to zero mean, unit
/// variance before the location-scatter transform, for any (shape, rate).
struct GeneratorProfile {
  GeneratorKind kind = GeneratorKind::Gaussian;
  std::vector<double> params;
  std::size_t dim = 1;

  static GeneratorProfile gaussian(std::size_t dim);
  static GeneratorProfile slater(std::size_t dim);
  static GeneratorProfile wigner(std::size_t dim);
  static GeneratorProfile gamma1d(double shape, double rate);

  /// Builds and validates a profile. Elliptical profiles must satisfy the
  /// covariance moment condition within 1e-8, Gamma1D requires dim == 1.
  /// Throws InvalidInput otherwise.
  static GeneratorProfile make(GeneratorKind kind, std::vector<double> params, std::size_t dim);

  bool elliptical() const noexcept { return kind != GeneratorKind::Gamma1D; }

  /// Radial profile h(x), x >= 0. Elliptical kinds only.
  double radial(double x) const;

  friend bool operator==(const GeneratorProfile&, const GeneratorProfile&) = default;
};

/// |ratio - d| with ratio = int r^{d+1} h(r^2) dr / int r^{d-1} h(r^2) dr,
/// computed by adaptive quadrature. Zero iff the elliptical density with
/// scatter Sigma has covariance Sigma. Throws UnsupportedProfile for Gamma1D.
double check_h_condition(const GeneratorProfile& profile);

/// Radius factor k such that the standardized generator puts at most `tail`
/// mass outside the ball (1D: interval) of radius k, in units of standard
/// deviation. Used for automatic grid bounds.
double generator_tail_radius(const GeneratorProfile& profile, double tail);

/// Left and right support edges of the standardized generator in units of
/// standard deviation (infinite when unbounded). 1D marginal view.
std::pair<double, double> generator_support(const GeneratorProfile& profile);

class Atom {
 public:
  Atom(GeneratorProfile generator, Vector mean, SpdMatrix scatter);

  static Atom gaussian(Vector mean, SpdMatrix scatter);
  /// 1D convenience: atom of `profile` with scalar mean and variance.
  static Atom scalar(const GeneratorProfile& profile, double mean, double variance);

  const GeneratorProfile& generator() const noexcept { return generator_; }
  const Vector& mean() const noexcept { return mean_; }
  const SpdMatrix& scatter() const noexcept { return scatter_; }
  /// Principal square root of the scatter, computed at construction.
  const Matrix& scatter_root() const noexcept { return root_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean_.size()); }

  /// Probability density at x. Throws InvalidInput on dimension mismatch.
  double density(const Vector& x) const;

 private:
  GeneratorProfile generator_;
  Vector mean_;
  SpdMatrix scatter_;
  Matrix root_;
  Matrix whitening_;  // inverse lower Cholesky factor of the scatter
  double log_normalizer_ = 0.0;
};

double atom_density(const Atom& a, const Vector& x);

/// Throws FamilyMismatch unless both atoms share kind, parameters and dimension.
void require_same_family(const Atom& a0, const Atom& a1);

/// W2 distance between two atoms of the same family.
double atom_w2(const Atom& a0, const Atom& a1);
double atom_w2_squared(const Atom& a0, const Atom& a1);

/// Optimal map from a0 to a1 (requires a strictly positive a0 scatter).
AffineMap atom_ot_map(const Atom& a0, const Atom& a1);

/// W2 barycenter of atoms of one family: mean sum_q t_q m_q, scatter from the
/// covariance fixed point. Zero-weight atoms are ignored; a single remaining
/// atom is returned unchanged.
Atom atom_barycenter(std::span<const double> weights, std::span<const Atom> atoms);

/// Constant-speed W2 geodesic; t = 0 and t = 1 return the endpoints exactly.
Atom atom_geodesic(const Atom& a0, const Atom& a1, double t);

/// Lexicographic order on (mean, scatter) entries; the family is not compared.
std::weak_ordering compare_parameters(const Atom& a, const Atom& b);

/// Equality of (mean, scatter) within an absolute parameter tolerance.
bool same_parameters(const Atom& a, const Atom& b, double tol = 1e-12);

}  // namespace mixot
