#pragma once

// Random instance generators shared by the unit tests, the validation suites
// and the acceptance run.

#include "mixot/atoms.hpp"
#include "mixot/mixtures.hpp"

#include <random>
#include <vector>

namespace mixot::sampling {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vector random_vector(Rng& rng, Eigen::Index d, double scale) {
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = uniform(rng, -scale, scale);
  return v;
}

/// Q diag(lambda) Q^T with eigenvalues in [lo, hi] and a random orthogonal Q.
inline SpdMatrix random_spd(Rng& rng, Eigen::Index d, double lo = 0.2, double hi = 3.0) {
  std::normal_distribution<double> normal;
  Matrix g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Vector lambda(d);
  for (Eigen::Index i = 0; i < d; ++i) lambda(i) = uniform(rng, lo, hi);
  Matrix s = q * lambda.asDiagonal() * q.transpose();
  return SpdMatrix(0.5 * (s + s.transpose()));
}

inline std::vector<double> random_simplex(Rng& rng, std::size_t k) {
  std::vector<double> w(k);
  double total = 0.0;
  for (double& x : w) {
    x = uniform(rng, 0.05, 1.0);
    total += x;
  }
  for (double& x : w) x /= total;
  return w;
}

inline GeneratorProfile profile_for(GeneratorKind kind, std::size_t dim) {
  switch (kind) {
    case GeneratorKind::Gaussian: return GeneratorProfile::gaussian(dim);
    case GeneratorKind::SlaterElliptical: return GeneratorProfile::slater(dim);
    case GeneratorKind::WignerElliptical: return GeneratorProfile::wigner(dim);
    case GeneratorKind::Gamma1D: return GeneratorProfile::gamma1d(3.0, 9.0);
  }
  return GeneratorProfile::gaussian(dim);
}

inline Atom random_atom(Rng& rng, const GeneratorProfile& profile, double mean_scale = 4.0) {
  const auto d = static_cast<Eigen::Index>(profile.dim);
  return Atom(profile, random_vector(rng, d, mean_scale), random_spd(rng, d));
}

inline Mixture random_mixture(Rng& rng, const GeneratorProfile& profile, std::size_t k,
                              double mean_scale = 4.0) {
  Mixture mu;
  mu.weights = random_simplex(rng, k);
  for (std::size_t i = 0; i < k; ++i) mu.atoms.push_back(random_atom(rng, profile, mean_scale));
  return mu;
}

inline const std::vector<GeneratorKind>& all_kinds() {
  static const std::vector<GeneratorKind> kinds{GeneratorKind::Gaussian,
                                                GeneratorKind::SlaterElliptical,
                                                GeneratorKind::WignerElliptical,
                                                GeneratorKind::Gamma1D};
  return kinds;
}

}  // namespace mixot::sampling
