#include "mixot/errors.hpp"
#include "mixot/grid_oracle.hpp"
#include "test_support.hpp"

#include <boost/math/distributions/normal.hpp>
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace mixot;

namespace {

Atom gauss1(double m, double v) { return Atom::scalar(GeneratorProfile::gaussian(1), m, v); }

Mixture single(const Atom& a) { return Mixture{{1.0}, {a}}; }

GridSpec line(double lo, double hi, std::size_t n = 200) { return GridSpec({{lo, hi}}, {n}); }

}  // namespace

TEST_CASE("grid construction") {
  const GridSpec g({{-1.0, 1.0}, {0.0, 4.0}}, {3, 5});
  CHECK(g.size() == 15);
  CHECK(g.spacing(0) == 1.0);
  CHECK(g.cell_volume() == 1.0);
  CHECK(g.diameter_squared() == 20.0);
  const Vector x = g.node(7);
  CHECK(x(0) == 0.0);
  CHECK(x(1) == 2.0);
  CHECK(g.coordinate(1, 4) == 4.0);
  CHECK_THROWS_AS(GridSpec({{1.0, 1.0}}, {10}), InvalidInput);
  CHECK_THROWS_AS(GridSpec({{0.0, 1.0}}, {1}), InvalidInput);
  CHECK_THROWS_AS(GridSpec({{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}, {2, 2, 2}), UnsupportedDimension);
}

TEST_CASE("automatic and symmetrized bounds") {
  const GridSpec g = auto_grid(Mixture{{0.5, 0.5}, {gauss1(-1.0, 1.0), gauss1(3.0, 4.0)}}, 200);
  CHECK(g.bounds()[0].first == doctest::Approx(-7.0));
  CHECK(g.bounds()[0].second == doctest::Approx(13.0));
  // Heavy tails widen the box beyond 5 standard deviations.
  const GridSpec slater =
      auto_grid(single(Atom::scalar(GeneratorProfile::slater(1), 0.0, 1.0)), 200);
  CHECK(slater.bounds()[0].second > 5.0);
  const GridSpec sym = symmetrized_grid(g, SymmetryGroup::parity(1));
  CHECK(sym.bounds()[0].first == -sym.bounds()[0].second);
  CHECK(sym.bounds()[0].second == doctest::Approx(13.0));
  const GridSpec box({{-1.0, 2.0}, {0.0, 5.0}}, {40, 50});
  const GridSpec swapped = symmetrized_grid(box, SymmetryGroup::permutation(2, 1));
  CHECK(swapped.bounds()[0] == swapped.bounds()[1]);
  CHECK(swapped.points()[0] == 50);
  CHECK_THROWS_AS(symmetrized_grid(box, SymmetryGroup::parity(1)), InvalidGrid);
}

TEST_CASE("rasterization") {
  const GridSpec g = line(0.0, 2.0, 11);
  const GridDensity uniform = rasterize([](const Vector&) { return 3.0; }, g);
  for (double v : uniform.values) CHECK(v == doctest::Approx(uniform.values[0]).epsilon(1e-15));

  const GridDensity n01 = rasterize(single(gauss1(0.0, 1.0)), line(-8.0, 8.0));
  double mass = 0.0, peak = 0.0;
  for (double v : n01.values) {
    mass += v;
    peak = std::max(peak, v);
  }
  CHECK(mass * n01.spec.cell_volume() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(peak - 1.0 / std::sqrt(2.0 * std::numbers::pi)) <= 1e-3);

  const GridSpec wide = line(-6.0, 6.0);
  const GridDensity wigner = rasterize(single(Atom::scalar(GeneratorProfile::wigner(1), 0.0, 1.0)), wide);
  const double radius = std::sqrt(1.0 / GeneratorProfile::wigner(1).params[0]);
  for (std::size_t i = 0; i < wide.size(); ++i) {
    if (std::abs(wide.node(i)(0)) > radius + 1e-12) CHECK(wigner.values[i] == 0.0);
  }

  CHECK_THROWS_AS(rasterize(single(Atom::scalar(GeneratorProfile::wigner(1), 0.0, 1.0)),
                            line(10.0, 12.0)),
                  EmptySupport);
  CHECK_THROWS_AS(rasterize([](const Vector&) { return -1.0; }, g), InvalidInput);
}

TEST_CASE("Sinkhorn transport cost") {
  const GridSpec g = line(-12.0, 16.0);
  const GridDensity p = rasterize(single(gauss1(0.0, 1.0)), g);
  const GridDensity q = rasterize(single(gauss1(3.0, 4.0)), g);

  const SinkhornResult self = sinkhorn_w2_squared(p, p);
  CHECK(self.converged);
  CHECK(self.value >= 0.0);
  CHECK(self.value <= entropic_bias(g, {}));

  const SinkhornResult r = sinkhorn_w2_squared(p, q);
  CHECK(r.converged);
  CHECK(r.violation <= 1e-8);
  CHECK(r.epsilon == doctest::Approx(1e-4 * 28.0 * 28.0));
  CHECK(std::abs(r.value - 10.0) <= 0.02 * 10.0);

  for (double shift : {1.5, 4.0}) {
    const GridDensity moved = rasterize(single(gauss1(shift, 1.0)), g);
    const double v = sinkhorn_w2_squared(p, moved).value;
    CHECK(std::abs(v - shift * shift) <= 0.02 * shift * shift);
  }

  SinkhornOptions capped;
  capped.max_iterations = 3;
  const SinkhornResult early = sinkhorn_w2_squared(p, q, capped);
  CHECK_FALSE(early.converged);
  CHECK(early.violation > 1e-8);
  CHECK(early.iterations == 3);

  CHECK_THROWS_AS(sinkhorn_w2_squared(p, rasterize(single(gauss1(0.0, 1.0)), line(-12.0, 16.0, 100))),
                  InvalidGrid);
}

TEST_CASE("Sinkhorn in two dimensions") {
  Vector m(2);
  m << 2.0, -1.0;
  Matrix s(2, 2);
  s << 1.5, 0.4, 0.4, 0.8;
  const Atom a = Atom::gaussian(Vector::Zero(2), SpdMatrix::identity(2));
  const Atom b = Atom::gaussian(m, SpdMatrix(s));
  const std::vector<Mixture> both{single(a), single(b)};
  const GridSpec g = auto_grid(both, 40);
  const SinkhornResult r = sinkhorn_w2_squared(rasterize(both[0], g), rasterize(both[1], g));
  CHECK(r.converged);
  const double exact = atom_w2_squared(a, b);
  CHECK(std::abs(r.value - exact) <= 0.02 * exact + entropic_bias(g, {}));
}

TEST_CASE("plan concentrates near the monotone map") {
  const GridSpec g = line(-10.0, 14.0);
  const double h = g.spacing(0);
  const GridDensity p = rasterize(single(gauss1(-1.0, 1.0)), g);
  const GridDensity q = rasterize(single(gauss1(4.0, 2.25)), g);
  const double band = plan_region_mass(p, q, [&](const Vector& x, const Vector& y) {
    return std::abs(y(0) - (4.0 + 1.5 * (x(0) + 1.0))) <= 5.0 * h;
  });
  CHECK(band >= 0.99);
}

TEST_CASE("plan region mass") {
  const Mixture sym{{0.5, 0.5}, {gauss1(-3.0, 1.0), gauss1(3.0, 1.0)}};
  const GridSpec g = symmetrized_grid(auto_grid(sym, 200), SymmetryGroup::parity(1));
  const GridDensity p = rasterize(sym, g);
  CHECK(plan_region_mass(p, p, [](const Vector&, const Vector&) { return true; }) ==
        doctest::Approx(1.0).epsilon(1e-8));
  CHECK(plan_region_mass(p, p, [](const Vector&, const Vector&) { return false; }) == 0.0);
  const double cross =
      plan_region_mass(p, p, [](const Vector& x, const Vector& y) { return x(0) * y(0) < 0.0; });
  CHECK(cross <= 1e-3);
}

TEST_CASE("Sinkhorn barycenters") {
  const GridSpec g = line(-12.0, 16.0);
  const std::vector<GridDensity> inputs{rasterize(single(gauss1(0.0, 1.0)), g),
                                        rasterize(single(gauss1(3.0, 4.0)), g)};
  const std::vector<double> degenerate{1.0, 0.0};
  CHECK(grid_l1_distance(sinkhorn_barycenter(inputs, degenerate).density, inputs[0]) <= 1e-6);

  const std::vector<GridDensity> same{inputs[1], inputs[1]};
  const std::vector<double> half{0.5, 0.5};
  const GridBarycenter twin = sinkhorn_barycenter(same, half);
  CHECK(twin.converged);
  CHECK(grid_l1_distance(twin.density, inputs[1]) <= 1e-6);

  const GridBarycenter mid = sinkhorn_barycenter(inputs, half);
  CHECK(mid.converged);
  const Atom closed = atom_barycenter(half, std::vector<Atom>{gauss1(0.0, 1.0), gauss1(3.0, 4.0)});
  CHECK(closed.scatter()(0, 0) == doctest::Approx(2.25));
  CHECK(grid_l1_distance(mid.density, rasterize(single(closed), g)) <= 0.05);
  double mass = 0.0;
  for (double v : mid.density.masses()) mass += v;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));

  // Plain iterated projections keep the entropic blur.
  SinkhornOptions plain;
  plain.debias = false;
  const GridBarycenter blurred = sinkhorn_barycenter(same, half, plain);
  CHECK(grid_l1_distance(blurred.density, inputs[1]) > 1e-4);
}

TEST_CASE("symmetry defect") {
  const SymmetryGroup parity = SymmetryGroup::parity(1);
  const GridSpec g = line(-9.0, 9.0, 201);
  const Mixture shifted = single(gauss1(2.0, 1.0));
  CHECK(symmetry_defect(rasterize(symmetrize(shifted, parity), g), parity) <= 1e-10);

  // L1(N(2,1), N(-2,1)) = 2 (1 - overlap), overlap = 2 Phi(-2).
  const double overlap = 2.0 * boost::math::cdf(boost::math::normal(), -2.0);
  CHECK(symmetry_defect(rasterize(shifted, g), parity) ==
        doctest::Approx(2.0 * (1.0 - overlap)).epsilon(1e-3));

  const std::vector<GridDensity> inputs{
      rasterize(symmetrize(Mixture{{0.3, 0.7}, {gauss1(-2.0, 0.5), gauss1(2.5, 0.7)}}, parity), g),
      rasterize(symmetrize(Mixture{{1.0}, {gauss1(1.0, 2.0)}}, parity), g)};
  const std::vector<double> t{0.4, 0.6};
  CHECK(symmetry_defect(sinkhorn_barycenter(inputs, t).density, parity) <= 5e-3);

  CHECK_THROWS_AS(symmetry_defect(rasterize(shifted, line(-5.0, 9.0)), parity), InvalidGrid);
  CHECK_THROWS_AS(symmetry_defect(rasterize(shifted, g), SymmetryGroup::parity(2)), InvalidGrid);

  // Block swap on a square grid.
  const GridSpec square({{-4.0, 4.0}, {-4.0, 4.0}}, {33, 33});
  Vector m(2);
  m << 1.0, -1.0;
  const Atom a = Atom::gaussian(m, SpdMatrix::identity(2));
  const SymmetryGroup swap = SymmetryGroup::permutation(2, 1);
  CHECK(symmetry_defect(rasterize(symmetrize(single(a), swap), square), swap) <= 1e-10);
  CHECK(symmetry_defect(rasterize(single(a), square), swap) > 0.1);
}

TEST_CASE("oracle sandwich on random mixtures") {
  testing::Rng rng(31);
  for (int trial = 0; trial < 3; ++trial) {
    const auto profile = testing::profile_for(GeneratorKind::Gaussian, 1);
    const std::vector<Mixture> mus{testing::random_mixture(rng, profile, 2, 3.0),
                                   testing::random_mixture(rng, profile, 2, 3.0)};
    const GridSpec g = auto_grid(mus, 200);
    const double grid = sinkhorn_w2_squared(rasterize(mus[0], g), rasterize(mus[1], g)).value;
    const double mixture = std::pow(mixture_distance(mus[0], mus[1]).value, 2);
    CHECK(grid <= 1.02 * mixture + entropic_bias(g, {}));
  }
}

TEST_CASE("CSV output and thread cap") {
  const GridDensity p = rasterize([](const Vector& x) { return 1.0 + x(0); }, line(0.0, 1.0, 3));
  std::ostringstream out;
  write_csv(out, p);
  CHECK(out.str().rfind("x,value\n0,", 0) == 0);
  CHECK(out.str().find("0.5,0.66666666666666663\n") != std::string::npos);

  const GridDensity q = rasterize([](const Vector&) { return 1.0; }, GridSpec({{0, 1}, {0, 1}}, {2, 2}));
  std::ostringstream out2;
  write_csv(out2, q);
  CHECK(out2.str() == "x,y,value\n0,0,0.25\n0,1,0.25\n1,0,0.25\n1,1,0.25\n");

  setenv("MIXOT_THREADS", "3", 1);
  CHECK(worker_threads() == 3);
  setenv("MIXOT_THREADS", "zero", 1);
  CHECK(worker_threads() >= 1);
  unsetenv("MIXOT_THREADS");
}
