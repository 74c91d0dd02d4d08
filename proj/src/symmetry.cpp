#include "mixot/symmetry.hpp"

#include "mixot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace mixot {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kScanPoints = 360;
constexpr int kDensityAngles = 720;
constexpr std::size_t kMaxPermutationBlocks = 8;
constexpr std::size_t kMaxTuples = 1'000'000;

Matrix rotation_matrix(double angle) {
  Matrix r(2, 2);
  const double c = std::cos(angle), s = std::sin(angle);
  r << c, -s, s, c;
  return r;
}

double wrap_angle(double angle) {
  double a = std::fmod(angle, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a;
}

std::size_t find_element(const std::vector<GroupElement>& elements, const Matrix& m) {
  for (const auto& e : elements) {
    if (e.matrix == m) return e.index;
  }
  throw InvalidInput("matrix is not an element of the group");
}

// Rotation that brings `a` to the SO(2) canonical pose.
double so2_canonical_angle(const Atom& a) {
  const Vector& m = a.mean();
  const double scale = 1.0 + std::sqrt(a.scatter().matrix().trace());
  if (m.norm() > 1e-12 * scale) return -std::atan2(m(1), m(0));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a.scatter().matrix());
  const Vector axis = eig.eigenvectors().col(1);
  return -std::atan2(axis(1), axis(0));
}

// Golden-section refinement of a scalar function on [lo, hi].
template <class F>
std::pair<double, double> golden_minimize(F f, double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > tol) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

SymDistance oriented_sym_distance(const SymmetrizedAtom& a0, const SymmetrizedAtom& a1) {
  const SymmetryGroup& group = a0.group();
  if (!group.finite()) {
    const So2Alignment al = so2_align(a0.representative(), a1.representative());
    return {al.value, group.rotation(al.angle)};
  }
  SymDistance best{0.0, group.identity()};
  bool first = true;
  for (const auto& g : group.elements()) {
    const double v = atom_w2(a0.representative(), act(g, a1.representative()));
    if (first || v < best.value) {
      best = {v, g};
      first = false;
    }
  }
  return best;
}

double barycentric_cost(std::span<const double> t, std::span<const Atom> atoms, const Atom& bary) {
  double cost = 0.0;
  for (std::size_t q = 0; q < atoms.size(); ++q) {
    if (t[q] > 0.0) cost += t[q] * atom_w2_squared(atoms[q], bary);
  }
  return cost;
}

}  // namespace

std::string to_string(GroupKind kind) {
  switch (kind) {
    case GroupKind::Parity: return "parity";
    case GroupKind::Permutation: return "permutation";
    case GroupKind::SO2: return "so2";
  }
  return "unknown";
}

SymmetryGroup::SymmetryGroup(GroupKind kind, std::size_t n, std::size_t block_dim)
    : kind_(kind), n_(n), block_dim_(block_dim) {
  if (n == 0 || block_dim == 0) throw InvalidInput("group dimensions must be positive");
  auto elements = std::make_shared<std::vector<GroupElement>>();
  const auto dim = static_cast<Eigen::Index>(n * block_dim);
  switch (kind) {
    case GroupKind::Parity:
      elements->push_back({0, 0.0, Matrix::Identity(dim, dim)});
      elements->push_back({1, 0.0, -Matrix::Identity(dim, dim)});
      break;
    case GroupKind::Permutation: {
      if (n > kMaxPermutationBlocks) {
        throw CapacityError("permutation groups are enumerated up to " +
                            std::to_string(kMaxPermutationBlocks) + " blocks");
      }
      std::vector<std::size_t> sigma(n);
      std::iota(sigma.begin(), sigma.end(), 0);
      do {
        Matrix p = Matrix::Zero(dim, dim);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t r = 0; r < block_dim; ++r) {
            p(static_cast<Eigen::Index>(i * block_dim + r),
              static_cast<Eigen::Index>(sigma[i] * block_dim + r)) = 1.0;
          }
        }
        elements->push_back({elements->size(), 0.0, std::move(p)});
      } while (std::next_permutation(sigma.begin(), sigma.end()));
      break;
    }
    case GroupKind::SO2:
      if (dim != 2) throw UnsupportedDimension("SO(2) acts on the plane only");
      break;
  }
  elements_ = std::move(elements);
}

SymmetryGroup SymmetryGroup::parity(std::size_t dim) { return {GroupKind::Parity, 1, dim}; }

SymmetryGroup SymmetryGroup::permutation(std::size_t n, std::size_t block_dim) {
  return {GroupKind::Permutation, n, block_dim};
}

SymmetryGroup SymmetryGroup::so2() { return {GroupKind::SO2, 1, 2}; }

const std::vector<GroupElement>& SymmetryGroup::elements() const {
  if (!finite()) {
    throw UnsupportedGroup("SO(2) is continuous; use so2_align instead of enumerating elements");
  }
  return *elements_;
}

std::vector<double> SymmetryGroup::haar_weights() const {
  const std::size_t k = order();
  return std::vector<double>(k, 1.0 / static_cast<double>(k));
}

GroupElement SymmetryGroup::identity() const {
  if (finite()) return elements().front();
  return rotation(0.0);
}

GroupElement SymmetryGroup::rotation(double angle) const {
  if (kind_ != GroupKind::SO2) throw InvalidInput("rotation elements belong to SO(2)");
  return {0, angle, rotation_matrix(angle)};
}

GroupElement SymmetryGroup::inverse(const GroupElement& g) const {
  if (!finite()) return rotation(wrap_angle(-g.angle));
  return elements()[find_element(elements(), g.matrix.transpose())];
}

GroupElement SymmetryGroup::compose(const GroupElement& g, const GroupElement& h) const {
  if (!finite()) return rotation(wrap_angle(g.angle + h.angle));
  return elements()[find_element(elements(), g.matrix * h.matrix)];
}

Atom act(const GroupElement& g, const Atom& a) {
  if (!a.generator().elliptical()) {
    throw UnsupportedProfile("group actions are defined for elliptical families only");
  }
  if (g.matrix.rows() != a.mean().size()) {
    throw InvalidInput("group element acts on R^" + std::to_string(g.matrix.rows()) +
                       ", atom lives in R^" + std::to_string(a.mean().size()));
  }
  const Matrix s = g.matrix * a.scatter().matrix() * g.matrix.transpose();
  return Atom(a.generator(), g.matrix * a.mean(), SpdMatrix(0.5 * (s + s.transpose())));
}

std::vector<Atom> group_orbit(const Atom& a, const SymmetryGroup& group) {
  std::vector<Atom> orbit;
  for (const auto& g : group.elements()) {
    Atom image = act(g, a);
    const bool seen = std::any_of(orbit.begin(), orbit.end(), [&](const Atom& b) {
      return same_parameters(b, image, 1e-12);
    });
    if (!seen) orbit.push_back(std::move(image));
  }
  return orbit;
}

SymmetrizedAtom::SymmetrizedAtom(const Atom& a, SymmetryGroup group)
    : rep_(a), group_(std::move(group)) {
  if (!a.generator().elliptical()) {
    throw UnsupportedProfile("symmetrized atoms require an elliptical family");
  }
  if (group_.dim() != a.dim()) {
    throw InvalidInput(to_string(group_.kind()) + " group acts on R^" +
                       std::to_string(group_.dim()) + ", atom lives in R^" +
                       std::to_string(a.dim()));
  }
  if (group_.finite()) {
    for (const auto& g : group_.elements()) {
      Atom image = act(g, a);
      if (compare_parameters(image, rep_) < 0) rep_ = std::move(image);
    }
    return;
  }
  const Atom rotated = act(group_.rotation(so2_canonical_angle(a)), a);
  const Vector& m = a.mean();
  const double scale = 1.0 + std::sqrt(a.scatter().matrix().trace());
  if (m.norm() > 1e-12 * scale) {
    Vector mean(2);
    mean << m.norm(), 0.0;
    rep_ = Atom(a.generator(), mean, rotated.scatter());
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a.scatter().matrix());
    Vector diag(2);
    diag << eig.eigenvalues()(1), eig.eigenvalues()(0);
    rep_ = Atom(a.generator(), Vector::Zero(2), SpdMatrix::diagonal(diag));
  }
}

double SymmetrizedAtom::density(const Vector& x) const {
  if (x.size() != rep_.mean().size()) {
    throw InvalidInput("density point has dimension " + std::to_string(x.size()) +
                       ", atom lives in R^" + std::to_string(rep_.dim()));
  }
  // (g a)(x) = a(g^T x) for orthogonal g.
  double total = 0.0;
  if (group_.finite()) {
    const auto& elements = group_.elements();
    for (const auto& g : elements) total += rep_.density(g.matrix.transpose() * x);
    return total / static_cast<double>(elements.size());
  }
  for (int k = 0; k < kDensityAngles; ++k) {
    total += rep_.density(rotation_matrix(-kTwoPi * k / kDensityAngles) * x);
  }
  return total / kDensityAngles;
}

void require_same_symmetry(const SymmetrizedAtom& a0, const SymmetrizedAtom& a1) {
  if (!(a0.group() == a1.group())) {
    throw FamilyMismatch("symmetrized atoms under different groups (" +
                         to_string(a0.group().kind()) + " vs " + to_string(a1.group().kind()) +
                         ")");
  }
  require_same_family(a0.representative(), a1.representative());
}

So2Alignment so2_align(const Atom& a0, const Atom& a1) {
  if (a0.dim() != 2 || a1.dim() != 2) {
    throw UnsupportedDimension("SO(2) alignment needs two-dimensional atoms");
  }
  require_same_family(a0, a1);
  auto f = [&](double angle) {
    const Matrix r = rotation_matrix(angle);
    const Matrix s = r * a1.scatter().matrix() * r.transpose();
    return atom_w2(a0, Atom(a1.generator(), r * a1.mean(), SpdMatrix(0.5 * (s + s.transpose()))));
  };
  const double step = kTwoPi / kScanPoints;
  int best_k = 0;
  double best = f(0.0);
  for (int k = 1; k < kScanPoints; ++k) {
    const double v = f(k * step);
    if (v < best) {
      best = v;
      best_k = k;
    }
  }
  if (best == 0.0) return {best_k * step, 0.0};
  const auto [angle, value] =
      golden_minimize(f, (best_k - 1) * step, (best_k + 1) * step, 1e-11);
  if (value < best) return {wrap_angle(angle), value};
  return {best_k * step, best};
}

SymDistance sym_distance(const SymmetrizedAtom& a0, const SymmetrizedAtom& a1) {
  require_same_symmetry(a0, a1);
  // Fixed orientation makes the result bitwise symmetric.
  if (compare_parameters(a1.representative(), a0.representative()) < 0) {
    SymDistance swapped = oriented_sym_distance(a1, a0);
    swapped.element = a0.group().inverse(swapped.element);
    return swapped;
  }
  return oriented_sym_distance(a0, a1);
}

bool same_symmetrized(const SymmetrizedAtom& a0, const SymmetrizedAtom& a1, double tol) {
  if (!(a0.group() == a1.group()) || !(a0.representative().generator() ==
                                       a1.representative().generator())) {
    return false;
  }
  if (same_parameters(a0.representative(), a1.representative(), tol)) return true;
  if (a0.group().finite()) {
    return std::any_of(a0.group().elements().begin(), a0.group().elements().end(),
                       [&](const GroupElement& g) {
                         return same_parameters(a0.representative(),
                                                act(g, a1.representative()), tol);
                       });
  }
  const So2Alignment al = so2_align(a0.representative(), a1.representative());
  return same_parameters(a0.representative(),
                         act(a0.group().rotation(al.angle), a1.representative()), tol);
}

SymMultimarginal sym_multimarginal(std::span<const SymmetrizedAtom> atoms,
                                   std::span<const double> weights) {
  if (atoms.empty() || atoms.size() != weights.size()) {
    throw InvalidInput("symmetric multi-marginal problem needs one weight per atom");
  }
  const std::vector<double> t = validated_simplex(weights);
  for (const auto& a : atoms) require_same_symmetry(atoms.front(), a);
  const SymmetryGroup& group = atoms.front().group();
  const std::size_t q_count = atoms.size();

  SymMultimarginal out{0.0, std::vector<GroupElement>(q_count, group.identity()),
                       atoms.front().representative()};
  std::vector<Atom> aligned;
  for (const auto& a : atoms) aligned.push_back(a.representative());

  if (group.finite()) {
    const auto& elements = group.elements();
    const std::size_t order = elements.size();
    // Atoms with zero weight do not enter the objective; keep them at identity.
    std::vector<std::size_t> free;
    for (std::size_t q = 1; q < q_count; ++q) {
      if (t[q] > 0.0) free.push_back(q);
    }
    double tuples = 1.0;
    for (std::size_t i = 0; i < free.size(); ++i) tuples *= static_cast<double>(order);
    if (tuples > static_cast<double>(kMaxTuples)) {
      throw CapacityError("symmetric multi-marginal problem has more than 10^6 group tuples");
    }
    std::vector<std::vector<Atom>> images(q_count);
    for (std::size_t q : free) {
      for (const auto& g : elements) images[q].push_back(act(g, atoms[q].representative()));
    }
    std::vector<std::size_t> index(free.size(), 0);
    bool first = true;
    while (true) {
      for (std::size_t i = 0; i < free.size(); ++i) aligned[free[i]] = images[free[i]][index[i]];
      const Atom bary = atom_barycenter(t, aligned);
      const double cost = barycentric_cost(t, aligned, bary);
      if (first || cost < out.value) {
        first = false;
        out.value = cost;
        out.barycenter = bary;
        for (std::size_t i = 0; i < free.size(); ++i) out.elements[free[i]] = elements[index[i]];
      }
      std::size_t i = 0;
      while (i < free.size() && ++index[i] == order) index[i++] = 0;
      if (i == free.size()) break;
    }
    out.value = std::sqrt(std::max(out.value, 0.0));
    return out;
  }

  // SO(2): block descent on sum_q t_q W2(bar, g_q a_q)^2 over (bar, g).
  std::vector<double> angles(q_count, 0.0);
  for (std::size_t q = 1; q < q_count; ++q) {
    angles[q] = so2_align(atoms.front().representative(), atoms[q].representative()).angle;
  }
  double best = -1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    for (std::size_t q = 0; q < q_count; ++q) {
      aligned[q] = act(group.rotation(angles[q] - angles[0]), atoms[q].representative());
    }
    const Atom bary = atom_barycenter(t, aligned);
    const double cost = barycentric_cost(t, aligned, bary);
    if (best >= 0.0 && cost >= best - 1e-14 * (1.0 + best)) {
      if (cost < best) best = cost;
      break;
    }
    best = cost;
    out.barycenter = bary;
    for (std::size_t q = 0; q < q_count; ++q) {
      out.elements[q] = group.rotation(wrap_angle(angles[q] - angles[0]));
    }
    if (q_count == 2) break;
    for (std::size_t q = 0; q < q_count; ++q) {
      angles[q] = so2_align(bary, atoms[q].representative()).angle;
    }
  }
  out.elements[0] = group.identity();
  out.value = std::sqrt(std::max(best, 0.0));
  return out;
}

SymmetrizedAtom sym_barycenter(std::span<const SymmetrizedAtom> atoms,
                               std::span<const double> weights) {
  if (atoms.size() == 1 && weights.size() == 1) {
    validated_simplex(weights);
    return atoms.front();
  }
  return SymmetrizedAtom(sym_multimarginal(atoms, weights).barycenter, atoms.front().group());
}

SymmetrizedAtom sym_geodesic(const SymmetrizedAtom& a0, const SymmetrizedAtom& a1, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidInput("geodesic time must lie in [0, 1]");
  require_same_symmetry(a0, a1);
  if (t == 0.0) return a0;
  if (t == 1.0) return a1;
  const SymDistance d = sym_distance(a0, a1);
  const Atom target = act(d.element, a1.representative());
  return SymmetrizedAtom(atom_geodesic(a0.representative(), target, t), a0.group());
}

AtomBarycenter<SymmetrizedAtom> AtomOps<SymmetrizedAtom>::barycenter(
    std::span<const double> weights, std::span<const SymmetrizedAtom> atoms) {
  const SymMultimarginal mm = sym_multimarginal(atoms, weights);
  return {SymmetrizedAtom(mm.barycenter, atoms.front().group()), mm.value * mm.value};
}

SymMixture symmetrize(const Mixture& mu, const SymmetryGroup& group) {
  SymMixture out;
  out.weights = mu.weights;
  for (const auto& a : mu.atoms) out.atoms.emplace_back(a, group);
  return out;
}

// ---------------------------------------------------------------------------

double slater_det_density(std::span<const Vector> means, std::span<const SpdMatrix> scatters,
                          const Vector& x) {
  const std::size_t n = means.size();
  if (n == 0 || scatters.size() != n) {
    throw InvalidInput("Slater determinant needs one scatter per orbital mean");
  }
  const Eigen::Index d = means.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    if (means[i].size() != d || scatters[i].dim() != d) {
      throw InvalidInput("orbitals of a Slater determinant must share one dimension");
    }
  }
  if (x.size() != static_cast<Eigen::Index>(n) * d) {
    throw InvalidInput("Slater determinant density evaluated at a point of dimension " +
                       std::to_string(x.size()) + ", expected " +
                       std::to_string(static_cast<Eigen::Index>(n) * d));
  }
  std::vector<Atom> orbitals;
  for (std::size_t i = 0; i < n; ++i) {
    orbitals.push_back(Atom::gaussian(means[i], scatters[i]));
    for (std::size_t j = 0; j < i; ++j) {
      if (same_parameters(orbitals[j], orbitals[i], 1e-12)) {
        throw DegenerateDeterminant("orbitals " + std::to_string(j) + " and " +
                                    std::to_string(i) + " coincide; the determinant vanishes");
      }
    }
  }

  // Gram matrix of the orbitals: <G_i, G_j> = N(m_i; m_j, S_i + S_j).
  Matrix gram(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const Atom overlap = Atom::gaussian(means[j], SpdMatrix(scatters[i].matrix() +
                                                              scatters[j].matrix()));
      gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
              overlap.density(means[i]);
    }
  }
  const double gram_det = gram.determinant();
  if (!(gram_det > 1e-14 * gram.diagonal().prod())) {
    throw DegenerateDeterminant("orbitals are numerically linearly dependent");
  }
  double factorial = 1.0;
  for (std::size_t k = 2; k <= n; ++k) factorial *= static_cast<double>(k);

  // The squared determinant is symmetric in the blocks: evaluate on sorted blocks.
  std::vector<Vector> blocks;
  for (std::size_t j = 0; j < n; ++j) {
    blocks.push_back(x.segment(static_cast<Eigen::Index>(j) * d, d));
  }
  auto less = [](const Vector& a, const Vector& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                        b.data() + b.size());
  };
  std::sort(blocks.begin(), blocks.end(), less);
  for (std::size_t j = 1; j < n; ++j) {
    if (blocks[j] == blocks[j - 1]) return 0.0;
  }
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          orbitals[i].density(blocks[j]);
    }
  }
  const double det = m.determinant();
  return det * det / (factorial * gram_det);
}

SymmetrizedAtom sd_to_symmetrized(const SdAtom& a) {
  const std::size_t n = a.n();
  if (n == 0 || a.scatters.size() != n) {
    throw InvalidInput("Slater determinant needs one scatter per orbital mean");
  }
  const auto d = static_cast<Eigen::Index>(a.block_dim());
  const auto total = static_cast<Eigen::Index>(n) * d;
  Vector mean(total);
  Matrix scatter = Matrix::Zero(total, total);
  for (std::size_t i = 0; i < n; ++i) {
    const auto off = static_cast<Eigen::Index>(i) * d;
    if (a.means[i].size() != d || a.scatters[i].dim() != d) {
      throw InvalidInput("orbitals of a Slater determinant must share one dimension");
    }
    mean.segment(off, d) = a.means[i];
    scatter.block(off, off, d, d) = a.scatters[i].matrix();
  }
  return SymmetrizedAtom(Atom::gaussian(mean, SpdMatrix(scatter)),
                         SymmetryGroup::permutation(n, a.block_dim()));
}

SymMixture sd_to_symmetrized(const SdMixture& mu) {
  SymMixture out;
  out.weights = mu.weights;
  for (const auto& a : mu.atoms) out.atoms.push_back(sd_to_symmetrized(a));
  return out;
}

SdAtom sd_from_symmetrized(const SymmetrizedAtom& a) {
  if (a.group().kind() != GroupKind::Permutation) {
    throw InvalidInput("only block-permutation symmetric atoms map to Slater determinants");
  }
  if (a.representative().generator().kind != GeneratorKind::Gaussian) {
    throw InvalidInput("Slater determinants are built from Gaussian orbitals");
  }
  const auto n = static_cast<Eigen::Index>(a.group().n());
  const auto d = static_cast<Eigen::Index>(a.group().block_dim());
  const Matrix& s = a.representative().scatter().matrix();
  const double tol = 1e-12 * s.cwiseAbs().maxCoeff();
  SdAtom out;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && s.block(i * d, j * d, d, d).cwiseAbs().maxCoeff() > tol) {
        throw InvalidInput("scatter is not block diagonal");
      }
    }
    out.means.push_back(a.representative().mean().segment(i * d, d));
    out.scatters.emplace_back(Matrix(s.block(i * d, i * d, d, d)));
  }
  return out;
}

SdMixture sd_from_symmetrized(const SymMixture& mu) {
  SdMixture out;
  out.weights = mu.weights;
  for (const auto& a : mu.atoms) out.atoms.push_back(sd_from_symmetrized(a));
  return out;
}

double sd_mixture_density(const SdMixture& mu, const Vector& x) {
  if (mu.weights.size() != mu.atoms.size()) {
    throw InvalidInput("mixture needs one weight per Slater determinant");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < mu.atoms.size(); ++k) {
    if (mu.weights[k] > 0.0) total += mu.weights[k] * mu.atoms[k].density(x);
  }
  return total;
}

double sd_mixture_distance(const SdMixture& mu0, const SdMixture& mu1) {
  return mixture_distance(sd_to_symmetrized(mu0), sd_to_symmetrized(mu1)).value;
}

}  // namespace mixot
