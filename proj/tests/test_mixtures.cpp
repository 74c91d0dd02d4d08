#include "mixot/errors.hpp"
#include "mixot/mixtures.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace mixot;
using mixot::testing::random_mixture;
using mixot::testing::Rng;
using mixot::testing::uniform;

namespace {

Atom gauss1(double m, double v) { return Atom::scalar(GeneratorProfile::gaussian(1), m, v); }

Mixture mix(std::vector<double> w, std::vector<Atom> a) { return Mixture{std::move(w), std::move(a)}; }

bool same_mixture(const Mixture& a, const Mixture& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (std::abs(a.weights[k] - b.weights[k]) > tol) return false;
    if (!same_parameters(a.atoms[k], b.atoms[k], tol)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("canonicalize") {
  const Atom a = gauss1(0.0, 1.0), b = gauss1(2.0, 1.0);
  CHECK(canonicalize(mix({0.5, 0.5, 0.0}, {a, b, gauss1(5.0, 1.0)})).size() == 2);

  const Mixture merged = canonicalize(mix({0.3, 0.5, 0.2}, {a, b, a}));
  REQUIRE(merged.size() == 2);
  CHECK(merged.weights[0] == doctest::Approx(0.5).epsilon(1e-15));

  const Mixture sorted = canonicalize(mix({0.7, 0.3}, {b, a}));
  CHECK(sorted.atoms[0].mean()(0) == 0.0);
  CHECK(sorted.weights[0] == 0.3);
  const Mixture again = canonicalize(sorted);
  CHECK(same_mixture(again, sorted, 0.0));

  CHECK_THROWS_AS(canonicalize(Mixture{}), InvalidInput);
  CHECK_THROWS_AS(canonicalize(mix({0.6, 0.6}, {a, b})), InvalidInput);
  CHECK_THROWS_AS(canonicalize(mix({0.5, 0.5}, {a, Atom::scalar(GeneratorProfile::slater(1), 0, 1)})),
                  FamilyMismatch);
}

TEST_CASE("mixture_distance closed instances") {
  const GeneratorProfile s = GeneratorProfile::slater(1);
  const Atom a0 = Atom::scalar(s, 0.0, 1.0), a1 = Atom::scalar(s, 3.0, 4.0);
  CHECK(mixture_distance(mix({1.0}, {a0}), mix({1.0}, {a1})).value == atom_w2(a0, a1));

  Rng rng(201);
  const Mixture mu = random_mixture(rng, GeneratorProfile::gaussian(2), 3);
  const MixtureDistance self = mixture_distance(mu, mu);
  CHECK(self.value == 0.0);
  for (const auto& e : self.plan.entries) CHECK(e.index[0] == e.index[1]);

  // Diagonal vertex costs 200, anti-diagonal 100.
  const Mixture m0 = mix({0.5, 0.5}, {gauss1(0, 1), gauss1(10, 1)});
  const Mixture m1 = mix({0.5, 0.5}, {gauss1(0, 1), gauss1(-10, 1)});
  const MixtureDistance d = mixture_distance(m0, m1);
  CHECK(d.value * d.value == doctest::Approx(100.0).epsilon(1e-13));
  // In input order the optimum is anti-diagonal: N(0) -> N(-10) and N(10) -> N(0).
  const Mixture c0 = canonicalize(m0), c1 = canonicalize(m1);
  REQUIRE(d.plan.nonzeros() == 2);
  for (const auto& e : d.plan.entries) {
    CHECK(e.weight == 0.5);
    CHECK(c0.atoms[e.index[0]].mean()(0) - c1.atoms[e.index[1]].mean()(0) == 10.0);
  }

  CHECK_THROWS_AS(mixture_distance(m0, mix({1.0}, {a0})), FamilyMismatch);
}

TEST_CASE("mixture_distance for general p") {
  const std::vector<double> l0{0.5, 0.5}, l1{1.0};
  Matrix d(2, 1);
  d << 1.0, 3.0;
  const MixtureDistance r = mixture_distance_from_atom_distances(l0, l1, d, 3.0);
  CHECK(r.value == doctest::Approx(std::cbrt(0.5 * 1.0 + 0.5 * 27.0)).epsilon(1e-14));

  const Mixture m = mix({1.0}, {gauss1(0, 1)});
  CHECK_THROWS_AS(mixture_distance(m, m, 3.0), InvalidInput);
  CHECK_THROWS_AS(mixture_distance(m, m, 1.0), InvalidInput);
  CHECK(mixture_distance(m, m, 2.0).value == 0.0);
}

TEST_CASE("mixture metric axioms on random triples") {
  Rng rng(203);
  for (GeneratorKind kind : mixot::testing::all_kinds()) {
    const std::size_t dim = kind == GeneratorKind::Gamma1D ? 1 : 2;
    const GeneratorProfile p = mixot::testing::profile_for(kind, dim);
    for (int trial = 0; trial < 100; ++trial) {
      const Mixture a = random_mixture(rng, p, 1 + trial % 3);
      const Mixture b = random_mixture(rng, p, 1 + (trial / 3) % 3);
      const Mixture c = random_mixture(rng, p, 1 + (trial / 9) % 3);
      const double ab = mixture_distance(a, b).value;
      const double bc = mixture_distance(b, c).value;
      const double ac = mixture_distance(a, c).value;
      CHECK(ab == mixture_distance(b, a).value);
      CHECK(ab > 0.0);
      CHECK(ac <= ab + bc + 1e-9);
    }
  }
}

TEST_CASE("composed plan witnesses the triangle inequality") {
  // w02_jl = sum_k w01_jk w12_kl / lambda1_k is feasible for (mu0, mu2); its
  // cost is bounded by (d01 + d12)^2 by Minkowski.
  Rng rng(205);
  const GeneratorProfile p = GeneratorProfile::gaussian(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Mixture m0 = canonicalize(random_mixture(rng, p, 3));
    const Mixture m1 = canonicalize(random_mixture(rng, p, 2));
    const Mixture m2 = canonicalize(random_mixture(rng, p, 3));
    const MixtureDistance d01 = mixture_distance(m0, m1), d12 = mixture_distance(m1, m2);
    const Matrix w01 = d01.plan.dense(), w12 = d12.plan.dense();
    double composed = 0.0;
    for (Eigen::Index j = 0; j < w01.rows(); ++j)
      for (Eigen::Index k = 0; k < w01.cols(); ++k)
        for (Eigen::Index l = 0; l < w12.cols(); ++l) {
          const double w = w01(j, k) * w12(k, l) / m1.weights[static_cast<std::size_t>(k)];
          composed += w * atom_w2_squared(m0.atoms[static_cast<std::size_t>(j)],
                                          m2.atoms[static_cast<std::size_t>(l)]);
        }
    const double d02 = mixture_distance(m0, m2).value;
    CHECK(d02 * d02 <= composed + 1e-9);
    CHECK(std::sqrt(composed) <= d01.value + d12.value + 1e-9);
  }
}

TEST_CASE("splitting a component leaves the distance unchanged") {
  Rng rng(207);
  const GeneratorProfile p = GeneratorProfile::wigner(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Mixture a = random_mixture(rng, p, 3), b = random_mixture(rng, p, 2);
    Mixture split = a;
    split.weights[1] *= 0.5;
    split.weights.push_back(split.weights[1]);
    split.atoms.push_back(split.atoms[1]);
    CHECK(mixture_distance(split, b).value == mixture_distance(a, b).value);
  }
}

TEST_CASE("mixture_barycenter_pair") {
  Rng rng(211);
  const GeneratorProfile p = GeneratorProfile::slater(2);
  const Mixture a = random_mixture(rng, p, 2), b = random_mixture(rng, p, 3);
  CHECK(same_mixture(mixture_barycenter_pair(a, b, 0.0), canonicalize(a), 0.0));
  CHECK(same_mixture(mixture_barycenter_pair(a, b, 1.0), canonicalize(b), 0.0));
  CHECK_THROWS_AS(mixture_barycenter_pair(a, b, -0.1), InvalidInput);

  const Atom x = mixot::testing::random_atom(rng, p), y = mixot::testing::random_atom(rng, p);
  const Mixture single = mixture_barycenter_pair(mix({1.0}, {x}), mix({1.0}, {y}), 0.3);
  REQUIRE(single.size() == 1);
  CHECK(same_parameters(single.atoms[0], atom_geodesic(x, y, 0.3), 1e-14));

  // Interior points carry at most J + K - 1 components.
  CHECK(mixture_barycenter_pair(a, b, 0.5).size() <= 4);
}

TEST_CASE("mixture geodesic has constant speed") {
  Rng rng(213);
  for (int trial = 0; trial < 40; ++trial) {
    const GeneratorProfile p = trial % 2 ? GeneratorProfile::gaussian(2) : GeneratorProfile::slater(1);
    const Mixture a = random_mixture(rng, p, 1 + trial % 3);
    const Mixture b = random_mixture(rng, p, 1 + (trial / 3) % 3);
    const double total = mixture_distance(a, b).value;
    const double s = uniform(rng, 0, 1), t = uniform(rng, 0, 1);
    const double part =
        mixture_distance(mixture_barycenter_pair(a, b, s), mixture_barycenter_pair(a, b, t)).value;
    CHECK(std::abs(part - std::abs(t - s) * total) <= 1e-7 * total);

    // Length of the path over a uniform partition matches the endpoint distance.
    for (int n = 1; n <= 8; ++n) {
      double length = 0.0;
      Mixture prev = canonicalize(a);
      for (int i = 1; i <= n; ++i) {
        const Mixture next = mixture_barycenter_pair(a, b, static_cast<double>(i) / n);
        length += mixture_distance(prev, next).value;
        prev = next;
      }
      CHECK(std::abs(length - total) <= 1e-7 * total);
    }
  }
}

TEST_CASE("mixture_barycenter_multi") {
  Rng rng(217);
  const GeneratorProfile p = GeneratorProfile::gaussian(2);
  const Mixture mu = random_mixture(rng, p, 3);
  const std::vector<Mixture> same{mu, mu, mu};
  const std::vector<double> t{0.2, 0.3, 0.5};
  CHECK(same_mixture(mixture_barycenter_multi<Atom>(same, t), canonicalize(mu), 1e-10));

  std::vector<Mixture> singles;
  std::vector<Atom> atoms;
  for (int q = 0; q < 3; ++q) {
    atoms.push_back(mixot::testing::random_atom(rng, p));
    singles.push_back(mix({1.0}, {atoms.back()}));
  }
  const Mixture bary = mixture_barycenter_multi<Atom>(singles, t);
  REQUIRE(bary.size() == 1);
  CHECK(same_parameters(bary.atoms[0], atom_barycenter(t, atoms), 1e-14));

  // Q = 2 reduces to the pair geodesic.
  const Mixture a = random_mixture(rng, p, 2), b = random_mixture(rng, p, 3);
  const std::vector<Mixture> pair{a, b};
  const std::vector<double> w{0.6, 0.4};
  const MultiBarycenter<Atom> multi = mixture_barycenter_multi_detailed<Atom>(pair, w);
  CHECK(multi.plan.value == doctest::Approx(0.6 * 0.4 * std::pow(mixture_distance(a, b).value, 2))
                                .epsilon(1e-9));
  CHECK(mixture_distance(multi.mixture, mixture_barycenter_pair(a, b, 0.4)).value <= 1e-6);

  std::vector<Mixture> random_set;
  std::size_t bound = 1;
  for (int q = 0; q < 4; ++q) {
    random_set.push_back(random_mixture(rng, p, 2 + static_cast<std::size_t>(q % 2)));
    bound += random_set.back().size() - 1;
  }
  const std::vector<double> t4{0.1, 0.2, 0.3, 0.4};
  const MultiBarycenter<Atom> r = mixture_barycenter_multi_detailed<Atom>(random_set, t4);
  CHECK(r.plan.nonzeros() <= bound);
  CHECK(r.mixture.size() <= bound);
}

TEST_CASE("mixture_density") {
  const Atom a = gauss1(0.3, 2.0);
  const Vector x = Vector::Constant(1, 0.7);
  CHECK(mixture_density(mix({1.0}, {a}), x) == a.density(x));

  const GeneratorProfile w = GeneratorProfile::wigner(1);
  const Atom left = Atom::scalar(w, -10.0, 1.0), right = Atom::scalar(w, 10.0, 1.0);
  const Vector y = Vector::Constant(1, 9.5);
  CHECK(mixture_density(mix({0.5, 0.5}, {left, right}), y) == 0.5 * right.density(y));
}
