#include "mixot/mixtures.hpp"

#include <cmath>
#include <string>

namespace mixot {

AtomBarycenter<Atom> AtomOps<Atom>::barycenter(std::span<const double> weights,
                                               std::span<const Atom> atoms) {
  AtomBarycenter<Atom> out{atom_barycenter(weights, atoms), 0.0};
  for (std::size_t q = 0; q < atoms.size(); ++q) {
    if (weights[q] > 0.0) out.cost += weights[q] * atom_w2_squared(atoms[q], out.atom);
  }
  return out;
}

MixtureDistance mixture_distance_from_atom_distances(std::span<const double> lambda0,
                                                     std::span<const double> lambda1,
                                                     const Matrix& atom_distances, double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw InvalidInput("mixture metric requires finite p > 1");
  if (static_cast<std::size_t>(atom_distances.rows()) != lambda0.size() ||
      static_cast<std::size_t>(atom_distances.cols()) != lambda1.size()) {
    throw InvalidInput("atom distance matrix is " + std::to_string(atom_distances.rows()) + " x " +
                       std::to_string(atom_distances.cols()) + ", expected " +
                       std::to_string(lambda0.size()) + " x " + std::to_string(lambda1.size()));
  }
  Matrix cost(atom_distances.rows(), atom_distances.cols());
  for (Eigen::Index j = 0; j < cost.rows(); ++j) {
    for (Eigen::Index k = 0; k < cost.cols(); ++k) {
      const double d = atom_distances(j, k);
      if (!(d >= 0.0) || !std::isfinite(d)) {
        throw InvalidInput("atom distances must be finite and nonnegative");
      }
      cost(j, k) = std::pow(d, p);
    }
  }
  MixtureDistance out;
  out.plan = solve_transport(lambda0, lambda1, cost);
  out.value = std::pow(std::max(out.plan.value, 0.0), 1.0 / p);
  return out;
}

}  // namespace mixot
