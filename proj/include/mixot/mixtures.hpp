#pragma once

// Finite mixtures of atoms and the mixture transport metric: optimal
// transport between the weight vectors with atom-to-atom W2 costs.
//
// The algorithms are templates over the atom type. An atom type plugs in by
// specializing AtomOps (see AtomOps<Atom> below and AtomOps<SymmetrizedAtom>
// in symmetry.hpp).

#include "mixot/atoms.hpp"
#include "mixot/discrete_ot.hpp"
#include "mixot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <compare>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace mixot {

template <class A>
struct AtomBarycenter {
  A atom;
  /// sum_q t_q d(a_q, atom)^2, the multi-marginal cost of the tuple.
  double cost = 0.0;
};

/// Customization point. A specialization provides:
///   squared_distance(a, b), geodesic(a, b, t), barycenter(weights, atoms),
///   compare(a, b) -> std::weak_ordering, same(a, b), require_compatible(a, b),
///   density(a, x).
template <class A>
struct AtomOps;

template <>
struct AtomOps<Atom> {
  static double squared_distance(const Atom& a, const Atom& b) { return atom_w2_squared(a, b); }
  static Atom geodesic(const Atom& a, const Atom& b, double t) { return atom_geodesic(a, b, t); }
  static AtomBarycenter<Atom> barycenter(std::span<const double> weights,
                                         std::span<const Atom> atoms);
  static std::weak_ordering compare(const Atom& a, const Atom& b) {
    return compare_parameters(a, b);
  }
  static bool same(const Atom& a, const Atom& b) { return same_parameters(a, b, 1e-12); }
  static void require_compatible(const Atom& a, const Atom& b) { require_same_family(a, b); }
  static double density(const Atom& a, const Vector& x) { return a.density(x); }
};

template <class A>
struct BasicMixture {
  std::vector<double> weights;
  std::vector<A> atoms;

  std::size_t size() const noexcept { return atoms.size(); }
};

using Mixture = BasicMixture<Atom>;

struct MixtureDistance {
  double value = 0.0;
  /// Coupling between the components of the canonicalized inputs.
  DiscretePlan plan;
};

template <class A>
struct MultiBarycenter {
  BasicMixture<A> mixture;
  /// Multi-marginal plan over the components of the canonicalized inputs.
  DiscretePlan plan;
};

/// Normal form: zero weights dropped, equal atoms merged (weights summed),
/// components sorted by the atom ordering. Throws InvalidInput on an empty
/// mixture or weights off the simplex, FamilyMismatch on mixed families.
template <class A>
BasicMixture<A> canonicalize(const BasicMixture<A>& mu);

/// Lexicographic order on (size, weights, atoms) of canonical mixtures.
template <class A>
std::weak_ordering compare_mixtures(const BasicMixture<A>& a, const BasicMixture<A>& b);

/// Mixture metric with p = 2 and closed-form atom costs. Exactly symmetric.
template <class A>
MixtureDistance mixture_distance(const BasicMixture<A>& mu0, const BasicMixture<A>& mu1);

/// Generic-p form from a user supplied J x K matrix of atom distances:
/// (sum_jk w*_jk D_jk^p)^{1/p}, w* optimal for the cost D^p.
MixtureDistance mixture_distance_from_atom_distances(std::span<const double> lambda0,
                                                     std::span<const double> lambda1,
                                                     const Matrix& atom_distances, double p);

/// Dispatches on p: p = 2 uses the closed form, any other p > 1 requires the
/// atom distance matrix between the components as given.
template <class A>
MixtureDistance mixture_distance(const BasicMixture<A>& mu0, const BasicMixture<A>& mu1, double p,
                                 const Matrix* atom_distances = nullptr);

/// Point at time t on the mixture geodesic: sum_jk w*_jk geodesic(a0_j, a1_k, t).
template <class A>
BasicMixture<A> mixture_barycenter_pair(const BasicMixture<A>& mu0, const BasicMixture<A>& mu1,
                                        double t);

/// Multi-marginal barycenter with weights t over Q mixtures.
template <class A>
MultiBarycenter<A> mixture_barycenter_multi_detailed(std::span<const BasicMixture<A>> mus,
                                                     std::span<const double> weights);

template <class A>
BasicMixture<A> mixture_barycenter_multi(std::span<const BasicMixture<A>> mus,
                                         std::span<const double> weights) {
  return mixture_barycenter_multi_detailed(mus, weights).mixture;
}

template <class A>
double mixture_density(const BasicMixture<A>& mu, const Vector& x) {
  double total = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    total += mu.weights[k] * AtomOps<A>::density(mu.atoms[k], x);
  }
  return total;
}

// ---------------------------------------------------------------------------

namespace detail {

inline std::weak_ordering compare_doubles(double x, double y) {
  if (x < y) return std::weak_ordering::less;
  if (x > y) return std::weak_ordering::greater;
  return std::weak_ordering::equivalent;
}

inline DiscretePlan transposed(DiscretePlan plan) {
  std::swap(plan.shape[0], plan.shape[1]);
  for (auto& e : plan.entries) std::swap(e.index[0], e.index[1]);
  std::sort(plan.entries.begin(), plan.entries.end(),
            [](const auto& l, const auto& r) { return l.index < r.index; });
  if (plan.potentials.size() == 2) std::swap(plan.potentials[0], plan.potentials[1]);
  return plan;
}

template <class A>
void require_compatible(const BasicMixture<A>& mu0, const BasicMixture<A>& mu1) {
  AtomOps<A>::require_compatible(mu0.atoms.front(), mu1.atoms.front());
}

}  // namespace detail

template <class A>
BasicMixture<A> canonicalize(const BasicMixture<A>& mu) {
  if (mu.atoms.empty()) throw InvalidInput("empty mixture");
  if (mu.weights.size() != mu.atoms.size()) {
    throw InvalidInput("mixture has " + std::to_string(mu.weights.size()) + " weights for " +
                       std::to_string(mu.atoms.size()) + " atoms");
  }
  // Validated but not renormalized, so that canonicalize is bitwise
  // idempotent and splitting a component into exact halves is invisible.
  validated_simplex(mu.weights);
  const std::vector<double>& w = mu.weights;
  for (const auto& a : mu.atoms) AtomOps<A>::require_compatible(mu.atoms.front(), a);

  std::vector<double> merged_w;
  std::vector<A> merged_a;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] == 0.0) continue;
    auto it = std::find_if(merged_a.begin(), merged_a.end(),
                           [&](const A& other) { return AtomOps<A>::same(other, mu.atoms[k]); });
    if (it == merged_a.end()) {
      merged_a.push_back(mu.atoms[k]);
      merged_w.push_back(w[k]);
    } else {
      merged_w[static_cast<std::size_t>(it - merged_a.begin())] += w[k];
    }
  }
  std::vector<std::size_t> order(merged_a.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return AtomOps<A>::compare(merged_a[l], merged_a[r]) < 0;
  });
  BasicMixture<A> out;
  for (std::size_t k : order) {
    out.weights.push_back(merged_w[k]);
    out.atoms.push_back(merged_a[k]);
  }
  return out;
}

template <class A>
std::weak_ordering compare_mixtures(const BasicMixture<A>& a, const BasicMixture<A>& b) {
  if (a.size() != b.size()) return a.size() <=> b.size();
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (auto c = detail::compare_doubles(a.weights[k], b.weights[k]); c != 0) return c;
  }
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (auto c = AtomOps<A>::compare(a.atoms[k], b.atoms[k]); c != 0) return c;
  }
  return std::weak_ordering::equivalent;
}

namespace detail {

template <class A>
MixtureDistance oriented_distance(const BasicMixture<A>& c0, const BasicMixture<A>& c1) {
  Matrix cost(c0.size(), c1.size());
  for (std::size_t j = 0; j < c0.size(); ++j) {
    for (std::size_t k = 0; k < c1.size(); ++k) {
      cost(j, k) = AtomOps<A>::squared_distance(c0.atoms[j], c1.atoms[k]);
    }
  }
  MixtureDistance out;
  out.plan = solve_transport(c0.weights, c1.weights, cost);
  out.value = std::sqrt(std::max(out.plan.value, 0.0));
  return out;
}

}  // namespace detail

template <class A>
MixtureDistance mixture_distance(const BasicMixture<A>& mu0, const BasicMixture<A>& mu1) {
  const BasicMixture<A> c0 = canonicalize(mu0);
  const BasicMixture<A> c1 = canonicalize(mu1);
  detail::require_compatible(c0, c1);
  // Solve in a fixed orientation so that d(mu0, mu1) == d(mu1, mu0) bitwise.
  if (compare_mixtures(c1, c0) < 0) {
    MixtureDistance swapped = detail::oriented_distance(c1, c0);
    swapped.plan = detail::transposed(std::move(swapped.plan));
    return swapped;
  }
  return detail::oriented_distance(c0, c1);
}

template <class A>
MixtureDistance mixture_distance(const BasicMixture<A>& mu0, const BasicMixture<A>& mu1, double p,
                                 const Matrix* atom_distances) {
  if (!(p > 1.0)) throw InvalidInput("mixture metric requires p > 1");
  if (atom_distances != nullptr) {
    detail::require_compatible(mu0, mu1);
    return mixture_distance_from_atom_distances(mu0.weights, mu1.weights, *atom_distances, p);
  }
  if (p != 2.0) {
    throw InvalidInput("closed-form atom costs exist only for p = 2; supply an atom distance "
                       "matrix for p = " + std::to_string(p));
  }
  return mixture_distance(mu0, mu1);
}

template <class A>
BasicMixture<A> mixture_barycenter_pair(const BasicMixture<A>& mu0, const BasicMixture<A>& mu1,
                                        double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidInput("barycenter time must lie in [0, 1]");
  const BasicMixture<A> c0 = canonicalize(mu0);
  const BasicMixture<A> c1 = canonicalize(mu1);
  detail::require_compatible(c0, c1);
  if (t == 0.0) return c0;
  if (t == 1.0) return c1;
  const MixtureDistance d = mixture_distance(c0, c1);
  BasicMixture<A> path;
  double total = 0.0;
  for (const auto& e : d.plan.entries) {
    path.atoms.push_back(AtomOps<A>::geodesic(c0.atoms[e.index[0]], c1.atoms[e.index[1]], t));
    path.weights.push_back(e.weight);
    total += e.weight;
  }
  for (double& w : path.weights) w /= total;
  return canonicalize(path);
}

template <class A>
MultiBarycenter<A> mixture_barycenter_multi_detailed(std::span<const BasicMixture<A>> mus,
                                                     std::span<const double> weights) {
  if (mus.empty() || mus.size() != weights.size()) {
    throw InvalidInput("multi-marginal barycenter needs one weight per mixture");
  }
  const std::vector<double> t = validated_simplex(weights);
  std::vector<BasicMixture<A>> canon;
  CostTensor cost;
  std::size_t cells = 1;
  for (const auto& mu : mus) {
    canon.push_back(canonicalize(mu));
    detail::require_compatible(canon.front(), canon.back());
    cost.shape.push_back(canon.back().size());
    cells *= canon.back().size();
    if (cells > kMultiMarginalCapacity) {
      throw CapacityError("multi-marginal barycenter exceeds " +
                          std::to_string(kMultiMarginalCapacity) +
                          " component tuples; decompose it into pairwise problems");
    }
  }

  const std::size_t q_count = canon.size();
  std::vector<A> tuple_bary;
  tuple_bary.reserve(cells);
  cost.values.reserve(cells);
  std::vector<std::size_t> index(q_count, 0);
  std::vector<A> selected;
  for (std::size_t flat = 0; flat < cells; ++flat) {
    selected.clear();
    for (std::size_t q = 0; q < q_count; ++q) selected.push_back(canon[q].atoms[index[q]]);
    AtomBarycenter<A> bary = AtomOps<A>::barycenter(t, selected);
    cost.values.push_back(std::max(bary.cost, 0.0));
    tuple_bary.push_back(std::move(bary.atom));
    for (std::size_t q = q_count; q-- > 0;) {
      if (++index[q] < canon[q].size()) break;
      index[q] = 0;
    }
  }

  MultiBarycenter<A> out;
  if (q_count == 1) {
    out.mixture = canon.front();
    out.plan.shape = cost.shape;
    for (std::size_t k = 0; k < canon.front().size(); ++k) {
      out.plan.entries.push_back({{k}, canon.front().weights[k]});
    }
    return out;
  }
  std::vector<std::vector<double>> lambdas;
  for (const auto& mu : canon) lambdas.push_back(mu.weights);
  out.plan = solve_multimarginal(lambdas, cost);
  BasicMixture<A> bary;
  double total = 0.0;
  for (const auto& e : out.plan.entries) {
    std::size_t flat = 0;
    for (std::size_t q = 0; q < q_count; ++q) flat = flat * cost.shape[q] + e.index[q];
    bary.atoms.push_back(tuple_bary[flat]);
    bary.weights.push_back(e.weight);
    total += e.weight;
  }
  for (double& w : bary.weights) w /= total;
  out.mixture = canonicalize(bary);
  return out;
}

}  // namespace mixot
