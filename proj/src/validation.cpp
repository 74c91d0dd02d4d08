#include "mixot/validation.hpp"

#include "mixot/discrete_ot.hpp"
#include "mixot/errors.hpp"
#include "mixot/grid_oracle.hpp"
#include "mixot/mixtures.hpp"
#include "mixot/sampling.hpp"
#include "mixot/spd_linalg.hpp"
#include "mixot/symmetry.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace mixot {
namespace {

using sampling::Rng;
using sampling::uniform;

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Running maximum of a checked quantity.
struct Tracker {
  Tracker(std::string name_, double tolerance_) : name(std::move(name_)), tolerance(tolerance_) {}

  std::string name;
  double tolerance;
  double worst = 0.0;
  std::size_t trials = 0;
  std::size_t failures = 0;
  std::string detail;
  std::size_t capped = 0;
  double worst_violation = 0.0;

  void record(double value) {
    ++trials;
    if (std::isnan(value) || value > tolerance) ++failures;
    if (std::isnan(value) || value > worst) worst = value;
  }
  /// Sinkhorn runs stopped by the iteration cap still yield a plan whose
  /// value is checked; the count and the worst marginal violation are reported.
  void note_cap(const SinkhornResult& r) {
    if (r.converged) return;
    ++capped;
    worst_violation = std::max(worst_violation, r.violation);
  }
  void fail(const std::string& why) {
    ++trials;
    ++failures;
    if (detail.empty()) detail = why;
  }
  CheckResult result() const {
    std::string text = detail.empty() ? std::to_string(failures) + " of " + std::to_string(trials) +
                                            " trials failed"
                                      : detail;
    if (capped > 0) {
      std::ostringstream cap;
      cap << "; " << capped << " Sinkhorn runs stopped at the iteration cap with marginal violation <= "
          << worst_violation;
      text += cap.str();
    }
    return {name, failures == 0, worst, tolerance, trials, text};
  }
};

GeneratorProfile random_profile(Rng& rng, std::size_t dim, bool elliptical_only = false) {
  const auto& kinds = sampling::all_kinds();
  for (;;) {
    const GeneratorKind kind = kinds[pick(rng, 0, kinds.size() - 1)];
    if (kind == GeneratorKind::Gamma1D && (dim != 1 || elliptical_only)) continue;
    return sampling::profile_for(kind, dim);
  }
}

std::vector<double> canonical_weights(const Mixture& mu) { return canonicalize(mu).weights; }

// -- metric ----------------------------------------------------------------

SuiteReport metric_suite(std::uint64_t seed) {
  constexpr std::size_t kTriples = 1000;
  SuiteReport report{"metric", seed, {}};
  Rng rng(seed);
  for (GeneratorKind kind : sampling::all_kinds()) {
    const std::string label = to_string(kind);
    Tracker symmetry{label + " symmetry", 0.0};
    Tracker identity{label + " identity", 0.0};
    Tracker triangle{label + " triangle", 1e-9};
    for (std::size_t trial = 0; trial < kTriples; ++trial) {
      const std::size_t dim = kind == GeneratorKind::Gamma1D ? 1 : 1 + trial % 3;
      const GeneratorProfile profile = sampling::profile_for(kind, dim);
      const Mixture a = sampling::random_mixture(rng, profile, pick(rng, 1, 3));
      const Mixture b = sampling::random_mixture(rng, profile, pick(rng, 1, 3));
      const Mixture c = sampling::random_mixture(rng, profile, pick(rng, 1, 3));
      const double ab = mixture_distance(a, b).value, ba = mixture_distance(b, a).value;
      const double bc = mixture_distance(b, c).value, ac = mixture_distance(a, c).value;
      symmetry.record(std::abs(ab - ba));
      identity.record(mixture_distance(a, a).value);
      triangle.record(std::max({ac - ab - bc, ab - ac - bc, bc - ab - ac, 0.0}));
    }
    report.checks.push_back(symmetry.result());
    report.checks.push_back(identity.result());
    report.checks.push_back(triangle.result());
  }
  return report;
}

// -- geodesic --------------------------------------------------------------

SuiteReport geodesic_suite(std::uint64_t seed) {
  constexpr std::size_t kPairs = 100;
  SuiteReport report{"geodesic", seed, {}};
  Rng rng(seed);
  Tracker speed{"constant speed (relative deviation)", 1e-7};
  for (std::size_t trial = 0; trial < kPairs; ++trial) {
    const GeneratorProfile profile = random_profile(rng, pick(rng, 1, 3));
    const Mixture m0 = sampling::random_mixture(rng, profile, pick(rng, 1, 3));
    const Mixture m1 = sampling::random_mixture(rng, profile, pick(rng, 1, 3));
    const double s = uniform(rng, 0.0, 1.0), t = uniform(rng, 0.0, 1.0);
    const double full = mixture_distance(m0, m1).value;
    const double part =
        mixture_distance(mixture_barycenter_pair(m0, m1, s), mixture_barycenter_pair(m0, m1, t)).value;
    speed.record(std::abs(part - std::abs(t - s) * full) / full);
  }
  report.checks.push_back(speed.result());
  return report;
}

// -- sparsity --------------------------------------------------------------

SuiteReport sparsity_suite(std::uint64_t seed) {
  constexpr std::size_t kInstances = 100;
  SuiteReport report{"sparsity", seed, {}};
  Rng rng(seed);
  Tracker support{"nonzeros minus (sum K - Q + 1)", 0.0};
  Tracker marginals{"marginal error", 1e-10};
  support.worst = -std::numeric_limits<double>::infinity();
  for (std::size_t trial = 0; trial < kInstances; ++trial) {
    const std::size_t q = pick(rng, 3, 4);
    const GeneratorProfile profile = random_profile(rng, pick(rng, 1, 2));
    std::vector<Mixture> mus;
    for (std::size_t i = 0; i < q; ++i) {
      mus.push_back(sampling::random_mixture(rng, profile, pick(rng, 2, 3)));
    }
    const std::vector<double> t = sampling::random_simplex(rng, q);
    const auto bary = mixture_barycenter_multi_detailed<Atom>(mus, t);
    std::size_t bound = 1;
    double error = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      const std::vector<double> want = canonical_weights(mus[i]);
      const std::vector<double> got = bary.plan.marginal(i);
      bound += want.size() - 1;
      for (std::size_t k = 0; k < want.size(); ++k) error = std::max(error, std::abs(got[k] - want[k]));
    }
    support.record(static_cast<double>(bary.plan.nonzeros()) - static_cast<double>(bound));
    marginals.record(error);
  }
  report.checks.push_back(support.result());
  report.checks.push_back(marginals.result());
  return report;
}

// -- fixed point -----------------------------------------------------------

SuiteReport fixed_point_suite(std::uint64_t seed) {
  constexpr std::size_t kTuples = 100;
  SuiteReport report{"fixed_point", seed, {}};
  Rng rng(seed);
  Tracker residual{"relative residual", kBarycenterTolerance};
  Tracker iterations{"iterations", kBarycenterMaxIterations};
  for (std::size_t trial = 0; trial < kTuples; ++trial) {
    const auto d = static_cast<Eigen::Index>(pick(rng, 1, 5));
    const std::size_t q = pick(rng, 2, 5);
    std::vector<SpdMatrix> covs;
    for (std::size_t i = 0; i < q; ++i) covs.push_back(sampling::random_spd(rng, d));
    const std::vector<double> t = sampling::random_simplex(rng, q);
    try {
      const CovarianceBarycenter bary = barycenter_covariance_detailed(t, covs);
      // Recomputed independently of the iteration's own bookkeeping.
      residual.record(barycenter_residual(bary.covariance.matrix(), t, covs));
      iterations.record(bary.iterations);
    } catch (const ConvergenceError& e) {
      residual.fail(e.what());
      iterations.fail(e.what());
    }
  }
  report.checks.push_back(residual.result());
  report.checks.push_back(iterations.result());
  return report;
}

// -- solver ----------------------------------------------------------------

SuiteReport solver_suite(std::uint64_t seed) {
  constexpr std::size_t kInstances = 1000;
  SuiteReport report{"solver", seed, {}};
  Rng rng(seed);
  Tracker value{"value gap to vertex enumeration", 1e-10};
  Tracker support{"nonzeros minus (J + K - 1)", 0.0};
  support.worst = -std::numeric_limits<double>::infinity();
  for (std::size_t trial = 0; trial < kInstances; ++trial) {
    const std::size_t j = pick(rng, 1, 3), k = pick(rng, 1, 3);
    const std::vector<double> a = sampling::random_simplex(rng, j);
    const std::vector<double> b = sampling::random_simplex(rng, k);
    Matrix cost(j, k);
    for (Eigen::Index r = 0; r < cost.rows(); ++r)
      for (Eigen::Index c = 0; c < cost.cols(); ++c) cost(r, c) = uniform(rng, 0.0, 10.0);
    const DiscretePlan plan = solve_transport(a, b, cost);
    value.record(std::abs(plan.value - brute_force_transport(a, b, cost).value));
    support.record(static_cast<double>(plan.nonzeros()) - static_cast<double>(j + k - 1));
  }
  report.checks.push_back(value.result());
  report.checks.push_back(support.result());
  return report;
}

// -- symmetry --------------------------------------------------------------

/// Parity-symmetric 1D mixture with every atom at distance [2, 4] from the
/// origin and standard deviation in [0.3, 0.8], so that the two half-lines
/// carry well separated mass.
Mixture separated_half_line_mixture(Rng& rng, const GeneratorProfile& profile) {
  Mixture mu;
  const std::size_t k = pick(rng, 1, 2);
  mu.weights = sampling::random_simplex(rng, k);
  for (std::size_t i = 0; i < k; ++i) {
    const double sd = uniform(rng, 0.3, 0.8);
    mu.atoms.push_back(Atom::scalar(profile, uniform(rng, 2.0, 4.0), sd * sd));
  }
  return mu;
}

SuiteReport symmetry_suite(std::uint64_t seed) {
  constexpr std::size_t kGridInstances = 3;
  constexpr std::size_t kInvariancePairs = 200;
  SuiteReport report{"symmetry", seed, {}};
  Rng rng(seed);
  const SymmetryGroup parity = SymmetryGroup::parity(1);

  Tracker defect{"grid barycenter symmetry defect", 5e-3};
  Tracker leakage{"cross-region self-transport mass", 1e-3};
  for (std::size_t trial = 0; trial < kGridInstances; ++trial) {
    const GeneratorProfile profile = random_profile(rng, 1, true);
    const Mixture n0 = sampling::random_mixture(rng, profile, pick(rng, 1, 2));
    const Mixture n1 = sampling::random_mixture(rng, profile, pick(rng, 1, 2));
    const std::vector<Mixture> plain{n0, n1};
    const GridSpec spec = symmetrized_grid(auto_grid(plain, kDefaultGridPoints1D), parity);
    const std::vector<GridDensity> inputs{rasterize(symmetrize(n0, parity), spec),
                                          rasterize(symmetrize(n1, parity), spec)};
    const std::vector<double> half{0.5, 0.5};
    defect.record(symmetry_defect(sinkhorn_barycenter(inputs, half).density, parity));

    const Mixture m = separated_half_line_mixture(rng, profile);
    const GridSpec self_spec = symmetrized_grid(auto_grid(m, kDefaultGridPoints1D), parity);
    const GridDensity p = rasterize(symmetrize(m, parity), self_spec);
    leakage.record(plan_region_mass(p, p, [](const Vector& x, const Vector& y) {
      return (x(0) < 0.0 && y(0) > 0.0) || (x(0) > 0.0 && y(0) < 0.0);
    }));
  }
  report.checks.push_back(defect.result());
  report.checks.push_back(leakage.result());

  const std::vector<SymmetryGroup> finite{SymmetryGroup::parity(1), SymmetryGroup::parity(2),
                                          SymmetryGroup::permutation(2, 1),
                                          SymmetryGroup::permutation(3, 1),
                                          SymmetryGroup::permutation(2, 2)};
  Tracker exact{"finite-group quotient invariance", 0.0};
  for (const SymmetryGroup& group : finite) {
    const auto& elements = group.elements();
    for (std::size_t trial = 0; trial < kInvariancePairs; ++trial) {
      const GeneratorProfile profile = random_profile(rng, group.dim(), true);
      const Atom a0 = sampling::random_atom(rng, profile), a1 = sampling::random_atom(rng, profile);
      const double base = sym_distance(symmetrize(a0, group), symmetrize(a1, group)).value;
      const GroupElement& g = elements[pick(rng, 0, elements.size() - 1)];
      const GroupElement& h = elements[pick(rng, 0, elements.size() - 1)];
      const double moved =
          sym_distance(symmetrize(act(g, a0), group), symmetrize(act(h, a1), group)).value;
      exact.record(std::abs(moved - base));
    }
  }
  report.checks.push_back(exact.result());

  // Rotations are not exact in floating point; invariance holds to rounding.
  const SymmetryGroup so2 = SymmetryGroup::so2();
  Tracker rotated{"SO(2) quotient invariance (relative)", 1e-9};
  for (std::size_t trial = 0; trial < kInvariancePairs; ++trial) {
    const GeneratorProfile profile = random_profile(rng, 2, true);
    const Atom a0 = sampling::random_atom(rng, profile), a1 = sampling::random_atom(rng, profile);
    const double base = sym_distance(symmetrize(a0, so2), symmetrize(a1, so2)).value;
    const GroupElement g = so2.rotation(uniform(rng, 0.0, 2.0 * std::numbers::pi));
    const GroupElement h = so2.rotation(uniform(rng, 0.0, 2.0 * std::numbers::pi));
    const double moved = sym_distance(symmetrize(act(g, a0), so2), symmetrize(act(h, a1), so2)).value;
    rotated.record(std::abs(moved - base) / std::max(base, 1e-300));
  }
  report.checks.push_back(rotated.result());
  return report;
}

// -- Slater determinants ---------------------------------------------------

SdAtom random_sd_atom(Rng& rng, std::size_t n, std::size_t d) {
  SdAtom a;
  for (std::size_t i = 0; i < n; ++i) {
    a.means.push_back(sampling::random_vector(rng, static_cast<Eigen::Index>(d), 3.0));
    a.scatters.push_back(sampling::random_spd(rng, static_cast<Eigen::Index>(d), 0.3, 2.0));
  }
  return a;
}

SuiteReport sd_suite(std::uint64_t seed) {
  constexpr std::size_t kTrials = 200;
  SuiteReport report{"sd", seed, {}};
  Rng rng(seed);
  Tracker relabel{"distance between orbital relabelings", 0.0};
  Tracker coincidence{"density on coincidence hyperplanes", 0.0};
  for (std::size_t trial = 0; trial < kTrials; ++trial) {
    const std::size_t n = pick(rng, 2, 3), d = pick(rng, 1, 2), k = pick(rng, 1, 2);
    SdMixture mu;
    mu.weights = sampling::random_simplex(rng, k);
    for (std::size_t i = 0; i < k; ++i) mu.atoms.push_back(random_sd_atom(rng, n, d));

    SdMixture relabeled;
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      SdAtom a = mu.atoms[i];
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      SdAtom b;
      for (std::size_t p : perm) {
        b.means.push_back(a.means[p]);
        b.scatters.push_back(a.scatters[p]);
      }
      relabeled.weights.push_back(mu.weights[i]);
      relabeled.atoms.push_back(std::move(b));
    }
    relabel.record(sd_mixture_distance(mu, relabeled));

    const auto di = static_cast<Eigen::Index>(d);
    Vector x = sampling::random_vector(rng, static_cast<Eigen::Index>(n * d), 3.0);
    const std::size_t i = pick(rng, 0, n - 1);
    std::size_t j = pick(rng, 0, n - 2);
    if (j >= i) ++j;
    x.segment(static_cast<Eigen::Index>(j) * di, di) = x.segment(static_cast<Eigen::Index>(i) * di, di);
    coincidence.record(std::abs(sd_mixture_density(mu, x)));
  }
  report.checks.push_back(relabel.result());
  report.checks.push_back(coincidence.result());
  return report;
}

// -- grid oracle -----------------------------------------------------------

SuiteReport oracle_suite(std::uint64_t seed) {
  constexpr std::size_t kInstances = 20;
  constexpr double kRelative = 0.02;
  SuiteReport report{"oracle", seed, {}};
  Rng rng(seed);

  // The entropic offset is absolute, so the relative check needs pairs whose
  // transport cost is bounded away from zero: separation in [3, 6] and
  // standard deviations in [0.5, 2].
  Tracker closed_form{"1D atoms: relative gap to closed form", kRelative};
  for (std::size_t trial = 0; trial < kInstances; ++trial) {
    const GeneratorProfile profile = random_profile(rng, 1);
    const double m0 = uniform(rng, -2.0, 2.0);
    const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    const double m1 = m0 + sign * uniform(rng, 3.0, 6.0);
    const double s0 = uniform(rng, 0.5, 2.0), s1 = uniform(rng, 0.5, 2.0);
    Mixture a{{1.0}, {Atom::scalar(profile, m0, s0 * s0)}};
    Mixture b{{1.0}, {Atom::scalar(profile, m1, s1 * s1)}};
    const std::vector<Mixture> both{a, b};
    const GridSpec spec = auto_grid(both, kDefaultGridPoints1D);
    const SinkhornResult r = sinkhorn_w2_squared(rasterize(a, spec), rasterize(b, spec));
    const double exact = atom_w2_squared(a.atoms[0], b.atoms[0]);
    closed_form.record(std::abs(r.value - exact) / exact);
    closed_form.note_cap(r);
  }
  report.checks.push_back(closed_form.result());
  return report;
}

SuiteReport sandwich_suite(std::uint64_t seed) {
  constexpr std::size_t kInstances = 20;
  constexpr double kRelative = 0.02;
  SuiteReport report{"sandwich", seed, {}};
  Rng rng(seed);
  Tracker sandwich{"1D two-component mixtures: W2^2 - (1.02 delta^2 + bias)", 0.0};
  sandwich.worst = -std::numeric_limits<double>::infinity();
  for (std::size_t trial = 0; trial < kInstances; ++trial) {
    const GeneratorProfile profile = random_profile(rng, 1);
    const Mixture a = sampling::random_mixture(rng, profile, 2);
    const Mixture b = sampling::random_mixture(rng, profile, 2);
    const std::vector<Mixture> both{a, b};
    const GridSpec spec = auto_grid(both, kDefaultGridPoints1D);
    const SinkhornResult r = sinkhorn_w2_squared(rasterize(a, spec), rasterize(b, spec));
    const double delta = mixture_distance(a, b).value;
    sandwich.record(r.value - ((1.0 + kRelative) * delta * delta + entropic_bias(spec, {})));
    sandwich.note_cap(r);
  }
  report.checks.push_back(sandwich.result());
  return report;
}

}  // namespace

bool SuiteReport::passed() const noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"metric", "geodesic", "sparsity", "fixed_point",
                                              "solver", "symmetry", "sd",       "oracle",
                                              "sandwich"};
  return names;
}

SuiteReport run_suite(std::string_view name, std::uint64_t seed) {
  if (name == "metric") return metric_suite(seed);
  if (name == "geodesic") return geodesic_suite(seed);
  if (name == "sparsity") return sparsity_suite(seed);
  if (name == "fixed_point") return fixed_point_suite(seed);
  if (name == "solver") return solver_suite(seed);
  if (name == "symmetry") return symmetry_suite(seed);
  if (name == "sd") return sd_suite(seed);
  if (name == "oracle") return oracle_suite(seed);
  if (name == "sandwich") return sandwich_suite(seed);
  throw InvalidInput("unknown suite '" + std::string(name) + "'");
}

std::string suite_report_json(const std::vector<SuiteReport>& reports) {
  nlohmann::ordered_json suites = nlohmann::ordered_json::array();
  bool all = true;
  for (const SuiteReport& r : reports) {
    nlohmann::ordered_json checks = nlohmann::ordered_json::array();
    for (const CheckResult& c : r.checks) {
      checks.push_back({{"name", c.name},
                        {"passed", c.passed},
                        {"worst", c.worst},
                        {"tolerance", c.tolerance},
                        {"trials", c.trials},
                        {"detail", c.detail}});
    }
    all = all && r.passed();
    suites.push_back({{"suite", r.suite}, {"seed", r.seed}, {"passed", r.passed()}, {"checks", checks}});
  }
  return nlohmann::ordered_json{{"passed", all}, {"suites", suites}}.dump(2) + "\n";
}

}  // namespace mixot
