#pragma once

// Group-invariant atoms. A finite or compact group of linear isometries acts
// on location-scatter atoms through their moments (m -> Q m, S -> Q S Q^T).
// A symmetrized atom is the Haar average of an orbit; it is stored through a
// canonical orbit member so that equal symmetrized atoms compare equal.
//
// Group actions are restricted to elliptical families, which are closed under
// every orthogonal push-forward.

#include "mixot/atoms.hpp"
#include "mixot/mixtures.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mixot {

enum class GroupKind { Parity, Permutation, SO2 };

std::string to_string(GroupKind kind);

/// Orthogonal matrix acting on R^dim. Finite groups number their elements,
/// SO(2) elements carry their angle.
struct GroupElement {
  std::size_t index = 0;
  double angle = 0.0;
  Matrix matrix;
};

class SymmetryGroup {
 public:
  /// {I, -I} on R^dim.
  static SymmetryGroup parity(std::size_t dim);
  /// Permutations of n coordinate blocks of size block_dim on R^{n block_dim}.
  static SymmetryGroup permutation(std::size_t n, std::size_t block_dim);
  /// Rotations of the plane.
  static SymmetryGroup so2();

  GroupKind kind() const noexcept { return kind_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t block_dim() const noexcept { return block_dim_; }
  /// Dimension of the space acted upon.
  std::size_t dim() const noexcept { return n_ * block_dim_; }
  bool finite() const noexcept { return kind_ != GroupKind::SO2; }

  /// Finite groups only; identity first. Throws UnsupportedGroup for SO(2).
  const std::vector<GroupElement>& elements() const;
  std::size_t order() const { return elements().size(); }
  /// Haar measure of a finite group: 1/|G| on each element.
  std::vector<double> haar_weights() const;

  GroupElement identity() const;
  GroupElement rotation(double angle) const;
  GroupElement inverse(const GroupElement& g) const;
  /// The element x -> g(h(x)).
  GroupElement compose(const GroupElement& g, const GroupElement& h) const;

  friend bool operator==(const SymmetryGroup& a, const SymmetryGroup& b) {
    return a.kind_ == b.kind_ && a.n_ == b.n_ && a.block_dim_ == b.block_dim_;
  }

 private:
  SymmetryGroup(GroupKind kind, std::size_t n, std::size_t block_dim);

  GroupKind kind_ = GroupKind::Parity;
  std::size_t n_ = 1;
  std::size_t block_dim_ = 1;
  std::shared_ptr<const std::vector<GroupElement>> elements_;
};

/// Push-forward of `a` by x -> g.matrix x. Throws UnsupportedProfile for
/// non-elliptical atoms and InvalidInput on dimension mismatch.
Atom act(const GroupElement& g, const Atom& a);

/// Distinct members of the orbit {g a : g in G} (parameter tolerance 1e-12).
/// Throws UnsupportedGroup for SO(2), whose orbits are continuous.
std::vector<Atom> group_orbit(const Atom& a, const SymmetryGroup& group);

class SymmetrizedAtom {
 public:
  SymmetrizedAtom(const Atom& a, SymmetryGroup group);

  /// Canonical orbit member: the smallest under compare_parameters for finite
  /// groups; for SO(2) the rotation putting the mean on the positive x axis,
  /// or, for a centred atom, the scatter's major axis on the x axis.
  const Atom& representative() const noexcept { return rep_; }
  const SymmetryGroup& group() const noexcept { return group_; }
  std::size_t dim() const noexcept { return rep_.dim(); }

  /// Density of the Haar average. SO(2) averages over 720 equispaced angles.
  double density(const Vector& x) const;

 private:
  Atom rep_;
  SymmetryGroup group_;
};

inline SymmetrizedAtom symmetrize(const Atom& a, const SymmetryGroup& group) {
  return SymmetrizedAtom(a, group);
}

/// Throws FamilyMismatch unless both share group and generator family.
void require_same_symmetry(const SymmetrizedAtom& a0, const SymmetrizedAtom& a1);

struct So2Alignment {
  double angle = 0.0;
  /// W2(a0, R(angle) a1).
  double value = 0.0;
};

/// min over theta of W2(a0, R(theta) a1): a 360-point scan refined by
/// golden-section search. Throws UnsupportedDimension unless d = 2.
So2Alignment so2_align(const Atom& a0, const Atom& a1);

struct SymDistance {
  double value = 0.0;
  /// Minimizer of W2(rep0, g rep1).
  GroupElement element;
};

/// Quotient distance min_g W2(a0, g a1). Exactly symmetric in its arguments.
SymDistance sym_distance(const SymmetrizedAtom& a0, const SymmetrizedAtom& a1);

/// Whether the two atoms lie on one orbit, up to a parameter tolerance.
bool same_symmetrized(const SymmetrizedAtom& a0, const SymmetrizedAtom& a1, double tol = 1e-12);

struct SymMultimarginal {
  /// (min over g_2..g_Q of sum_q t_q W2(g_q a_q, bar)^2)^{1/2}, g_1 = identity.
  double value = 0.0;
  std::vector<GroupElement> elements;
  /// Barycenter of the aligned representatives.
  Atom barycenter;
};

/// Finite groups enumerate G^{Q-1} (CapacityError beyond 10^6 tuples). SO(2)
/// alternates barycenter updates with per-atom alignment, a descent method
/// that is exact for Q = 2.
SymMultimarginal sym_multimarginal(std::span<const SymmetrizedAtom> atoms,
                                   std::span<const double> weights);

SymmetrizedAtom sym_barycenter(std::span<const SymmetrizedAtom> atoms,
                               std::span<const double> weights);

/// Align once, interpolate the representatives, symmetrize.
SymmetrizedAtom sym_geodesic(const SymmetrizedAtom& a0, const SymmetrizedAtom& a1, double t);

template <>
struct AtomOps<SymmetrizedAtom> {
  static double squared_distance(const SymmetrizedAtom& a, const SymmetrizedAtom& b) {
    const double d = sym_distance(a, b).value;
    return d * d;
  }
  static SymmetrizedAtom geodesic(const SymmetrizedAtom& a, const SymmetrizedAtom& b, double t) {
    return sym_geodesic(a, b, t);
  }
  static AtomBarycenter<SymmetrizedAtom> barycenter(std::span<const double> weights,
                                                    std::span<const SymmetrizedAtom> atoms);
  static std::weak_ordering compare(const SymmetrizedAtom& a, const SymmetrizedAtom& b) {
    return compare_parameters(a.representative(), b.representative());
  }
  static bool same(const SymmetrizedAtom& a, const SymmetrizedAtom& b) {
    return same_symmetrized(a, b, 1e-12);
  }
  static void require_compatible(const SymmetrizedAtom& a, const SymmetrizedAtom& b) {
    require_same_symmetry(a, b);
  }
  static double density(const SymmetrizedAtom& a, const Vector& x) { return a.density(x); }
};

using SymMixture = BasicMixture<SymmetrizedAtom>;

/// Symmetrizes every component of a plain mixture.
SymMixture symmetrize(const Mixture& mu, const SymmetryGroup& group);

// ---------------------------------------------------------------------------
// Squared Slater determinants of Gaussian orbitals.

/// |det(G_i(x_j))|^2 / Y for Gaussian orbitals G_i = N(m_i, S_i) on R^d and
/// x = (x_1, ..., x_n) in R^{n d}. Y = n! det(<G_i, G_j>) in closed form.
/// Exactly zero when two blocks of x coincide and exactly invariant under
/// block permutations of x. Throws DegenerateDeterminant on duplicate or
/// linearly dependent orbitals.
double slater_det_density(std::span<const Vector> means, std::span<const SpdMatrix> scatters,
                          const Vector& x);

/// One squared Slater determinant: n orbitals (m_i, S_i) on R^d.
struct SdAtom {
  std::vector<Vector> means;
  std::vector<SpdMatrix> scatters;

  std::size_t n() const noexcept { return means.size(); }
  std::size_t block_dim() const noexcept {
    return means.empty() ? 0 : static_cast<std::size_t>(means.front().size());
  }
  double density(const Vector& x) const { return slater_det_density(means, scatters, x); }
};

struct SdMixture {
  std::vector<double> weights;
  std::vector<SdAtom> atoms;
};

/// The symmetrized Gaussian on R^{n d} with stacked means and block-diagonal
/// scatter diag(S_1, ..., S_n) under block permutations.
SymmetrizedAtom sd_to_symmetrized(const SdAtom& a);
SymMixture sd_to_symmetrized(const SdMixture& mu);

/// Inverse map. Throws InvalidInput unless the scatter is block diagonal
/// within 1e-12 and the group is a block permutation group.
SdAtom sd_from_symmetrized(const SymmetrizedAtom& a);
SdMixture sd_from_symmetrized(const SymMixture& mu);

double sd_mixture_density(const SdMixture& mu, const Vector& x);

/// Mixture distance between the images under sd_to_symmetrized.
double sd_mixture_distance(const SdMixture& mu0, const SdMixture& mu1);

}  // namespace mixot
