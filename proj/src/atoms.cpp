#include "mixot/atoms.hpp"

#include "mixot/errors.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace mixot {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double param(const GeneratorProfile& p, std::size_t i, const char* what) {
  if (p.params.size() <= i) {
    throw InvalidInput(to_string(p.kind) + " profile is missing parameter '" + what + "'");
  }
  return p.params[i];
}

// int_0^inf r^{power} h(r^2) dr by adaptive quadrature.
double radial_moment_quadrature(const GeneratorProfile& p, double power) {
  auto f = [&](double r) {
    const double h = p.radial(r * r);
    return h == 0.0 ? 0.0 : std::pow(r, power) * h;
  };
  if (p.kind == GeneratorKind::WignerElliptical) {
    boost::math::quadrature::tanh_sinh<double> integrator;
    const double edge = 1.0 / std::sqrt(param(p, 0, "alpha"));
    return integrator.integrate(f, 0.0, edge, 1e-13);
  }
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(f, 0.0, kInf, 1e-13);
}

// log of int_0^inf r^{d-1} h(r^2) dr in closed form.
double log_radial_mass(const GeneratorProfile& p) {
  const double d = static_cast<double>(p.dim);
  switch (p.kind) {
    case GeneratorKind::Gaussian:
      return (d / 2.0 - 1.0) * std::log(2.0) + std::lgamma(d / 2.0);
    case GeneratorKind::SlaterElliptical:
      return std::lgamma(d) - d * std::log(param(p, 0, "alpha"));
    case GeneratorKind::WignerElliptical: {
      const double alpha = param(p, 0, "alpha");
      return -d / 2.0 * std::log(alpha) - std::log(2.0) + std::lgamma(d / 2.0) +
             std::lgamma(1.5) - std::lgamma(d / 2.0 + 1.5);
    }
    case GeneratorKind::Gamma1D:
      break;
  }
  throw UnsupportedProfile("radial mass is only defined for elliptical profiles");
}

void require_positive_params(const GeneratorProfile& p, std::size_t count) {
  if (p.params.size() != count) {
    throw InvalidInput(to_string(p.kind) + " profile expects " + std::to_string(count) +
                       " parameter(s), got " + std::to_string(p.params.size()));
  }
  for (double v : p.params) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw InvalidInput(to_string(p.kind) + " profile parameters must be positive");
    }
  }
}

}  // namespace

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::Gaussian: return "gaussian";
    case GeneratorKind::SlaterElliptical: return "slater";
    case GeneratorKind::WignerElliptical: return "wigner";
    case GeneratorKind::Gamma1D: return "gamma";
  }
  return "unknown";
}

GeneratorProfile GeneratorProfile::gaussian(std::size_t dim) {
  return {GeneratorKind::Gaussian, {}, dim};
}

GeneratorProfile GeneratorProfile::slater(std::size_t dim) {
  return {GeneratorKind::SlaterElliptical, {std::sqrt(static_cast<double>(dim) + 1.0)}, dim};
}

GeneratorProfile GeneratorProfile::wigner(std::size_t dim) {
  return {GeneratorKind::WignerElliptical, {1.0 / (static_cast<double>(dim) + 3.0)}, dim};
}

GeneratorProfile GeneratorProfile::gamma1d(double shape, double rate) {
  return make(GeneratorKind::Gamma1D, {shape, rate}, 1);
}

GeneratorProfile GeneratorProfile::make(GeneratorKind kind, std::vector<double> params,
                                        std::size_t dim) {
  if (dim == 0) throw InvalidInput("profile dimension must be positive");
  GeneratorProfile p{kind, std::move(params), dim};
  switch (kind) {
    case GeneratorKind::Gaussian:
      require_positive_params(p, 0);
      return p;
    case GeneratorKind::SlaterElliptical:
    case GeneratorKind::WignerElliptical:
      require_positive_params(p, 1);
      if (const double defect = check_h_condition(p); defect > 1e-8) {
        throw InvalidInput(to_string(kind) + " profile with alpha = " +
                           std::to_string(p.params[0]) + " violates the covariance moment "
                           "condition (defect " + std::to_string(defect) + ")");
      }
      return p;
    case GeneratorKind::Gamma1D:
      if (dim != 1) throw InvalidInput("gamma profile is only defined in dimension 1");
      require_positive_params(p, 2);
      return p;
  }
  throw InvalidInput("unknown generator kind");
}

double GeneratorProfile::radial(double x) const {
  switch (kind) {
    case GeneratorKind::Gaussian:
      return std::exp(-x / 2.0);
    case GeneratorKind::SlaterElliptical:
      return std::exp(-params[0] * std::sqrt(std::abs(x)));
    case GeneratorKind::WignerElliptical: {
      const double inside = 1.0 - params[0] * x;
      return inside > 0.0 ? std::sqrt(inside) : 0.0;
    }
    case GeneratorKind::Gamma1D:
      break;
  }
  throw UnsupportedProfile("gamma profile has no radial form");
}

double check_h_condition(const GeneratorProfile& profile) {
  if (!profile.elliptical()) {
    throw UnsupportedProfile("moment condition only applies to elliptical profiles");
  }
  const double d = static_cast<double>(profile.dim);
  const double ratio =
      radial_moment_quadrature(profile, d + 1.0) / radial_moment_quadrature(profile, d - 1.0);
  return std::abs(ratio - d);
}

double generator_tail_radius(const GeneratorProfile& profile, double tail) {
  if (profile.kind == GeneratorKind::Gamma1D) {
    const double shape = profile.params[0];
    // Standardized Z = (G - shape) / sqrt(shape) with G ~ Gamma(shape, 1).
    const double upper = boost::math::gamma_q_inv(shape, tail);
    return std::max((upper - shape) / std::sqrt(shape), std::sqrt(shape));
  }
  if (profile.kind == GeneratorKind::WignerElliptical) {
    return 1.0 / std::sqrt(profile.params[0]);
  }
  const double d = static_cast<double>(profile.dim);
  const double total = std::exp(log_radial_mass(profile));
  auto outside = [&](double radius) {
    boost::math::quadrature::exp_sinh<double> integrator;
    auto f = [&](double r) {
      const double h = profile.radial(r * r);
      return h == 0.0 ? 0.0 : std::pow(r, d - 1.0) * h;
    };
    return integrator.integrate(f, radius, kInf) / total;
  };
  double lo = 0.0;
  double hi = 1.0;
  while (outside(hi) > tail) hi *= 2.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (outside(mid) > tail ? lo : hi) = mid;
  }
  return hi;
}

std::pair<double, double> generator_support(const GeneratorProfile& profile) {
  switch (profile.kind) {
    case GeneratorKind::Gamma1D:
      return {-std::sqrt(profile.params[0]), kInf};
    case GeneratorKind::WignerElliptical: {
      const double edge = 1.0 / std::sqrt(profile.params[0]);
      return {-edge, edge};
    }
    default:
      return {-kInf, kInf};
  }
}

Atom::Atom(GeneratorProfile generator, Vector mean, SpdMatrix scatter)
    : generator_(std::move(generator)), mean_(std::move(mean)), scatter_(std::move(scatter)) {
  if (generator_.dim != static_cast<std::size_t>(mean_.size()) ||
      scatter_.dim() != mean_.size()) {
    throw InvalidInput("atom dimension mismatch: profile " + std::to_string(generator_.dim) +
                       ", mean " + std::to_string(mean_.size()) + ", scatter " +
                       std::to_string(scatter_.dim()));
  }
  if (!mean_.allFinite()) throw InvalidInput("atom mean has non-finite entries");
  if (generator_.kind == GeneratorKind::Gamma1D && generator_.dim != 1) {
    throw InvalidInput("gamma atoms are one-dimensional");
  }
  root_ = sqrt_psd(scatter_.matrix());
  if (scatter_.degenerate()) {
    log_normalizer_ = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  Eigen::LLT<Matrix> chol(scatter_.matrix());
  const Matrix lower = chol.matrixL();
  whitening_ = lower.triangularView<Eigen::Lower>().solve(
      Matrix::Identity(mean_.size(), mean_.size()));
  const double half_logdet = lower.diagonal().array().log().sum();
  if (generator_.elliptical()) {
    const double d = static_cast<double>(generator_.dim);
    log_normalizer_ = std::log(2.0) + d / 2.0 * std::log(std::numbers::pi) - std::lgamma(d / 2.0) +
                      half_logdet + log_radial_mass(generator_);
  } else {
    log_normalizer_ = half_logdet;
  }
}

Atom Atom::gaussian(Vector mean, SpdMatrix scatter) {
  const auto dim = static_cast<std::size_t>(mean.size());
  return Atom(GeneratorProfile::gaussian(dim), std::move(mean), std::move(scatter));
}

Atom Atom::scalar(const GeneratorProfile& profile, double mean, double variance) {
  return Atom(profile, Vector::Constant(1, mean), SpdMatrix(Matrix::Constant(1, 1, variance)));
}

double Atom::density(const Vector& x) const {
  if (x.size() != mean_.size()) {
    throw InvalidInput("density evaluated at a point of dimension " + std::to_string(x.size()) +
                       ", atom has dimension " + std::to_string(mean_.size()));
  }
  if (scatter_.degenerate()) throw SingularSource("density of a degenerate atom");
  const Vector z = whitening_ * (x - mean_);
  if (generator_.elliptical()) {
    const double h = generator_.radial(z.squaredNorm());
    return h == 0.0 ? 0.0 : std::exp(std::log(h) - log_normalizer_);
  }
  // Standardized gamma: z = (y - shape/rate) * rate / sqrt(shape).
  const double shape = generator_.params[0];
  const double rate = generator_.params[1];
  const double scale = std::sqrt(shape) / rate;
  const double y = z(0) * scale + shape / rate;
  if (y < 0.0) return 0.0;
  if (y == 0.0) {
    if (shape > 1.0) return 0.0;
    if (shape < 1.0) return kInf;
  }
  const double log_gamma_pdf =
      shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(y) - rate * y;
  return std::exp(log_gamma_pdf + std::log(scale) - log_normalizer_);
}

double atom_density(const Atom& a, const Vector& x) { return a.density(x); }

void require_same_family(const Atom& a0, const Atom& a1) {
  if (!(a0.generator() == a1.generator())) {
    throw FamilyMismatch("atoms belong to different location-scatter families (" +
                         to_string(a0.generator().kind) + ", dim " +
                         std::to_string(a0.generator().dim) + " vs " +
                         to_string(a1.generator().kind) + ", dim " +
                         std::to_string(a1.generator().dim) + ")");
  }
}

double atom_w2_squared(const Atom& a0, const Atom& a1) {
  require_same_family(a0, a1);
  if (compare_parameters(a1, a0) < 0) return atom_w2_squared(a1, a0);
  const double location = (a0.mean() - a1.mean()).squaredNorm();
  if (a0.scatter() == a1.scatter()) return location;
  return location + bures_squared_from_roots(a0.scatter_root(), a1.scatter_root());
}

double atom_w2(const Atom& a0, const Atom& a1) { return std::sqrt(atom_w2_squared(a0, a1)); }

AffineMap atom_ot_map(const Atom& a0, const Atom& a1) {
  require_same_family(a0, a1);
  return affine_ot_map(a0.mean(), a0.scatter(), a1.mean(), a1.scatter());
}

Atom atom_barycenter(std::span<const double> weights, std::span<const Atom> atoms) {
  if (atoms.empty() || atoms.size() != weights.size()) {
    throw InvalidInput("atom barycenter needs one weight per atom");
  }
  const std::vector<double> t = validated_simplex(weights);
  for (const auto& a : atoms) require_same_family(atoms.front(), a);

  std::vector<double> active_weights;
  std::vector<SpdMatrix> scatters;
  Vector mean = Vector::Zero(atoms.front().mean().size());
  std::size_t last = 0;
  for (std::size_t q = 0; q < atoms.size(); ++q) {
    if (t[q] == 0.0) continue;
    last = q;
    active_weights.push_back(t[q]);
    scatters.push_back(atoms[q].scatter());
    mean += t[q] * atoms[q].mean();
  }
  if (active_weights.size() == 1) return atoms[last];
  const bool all_equal = std::all_of(atoms.begin(), atoms.end(), [&](const Atom& a) {
    return a.mean() == atoms[last].mean() && a.scatter() == atoms[last].scatter();
  });
  if (all_equal) return atoms[last];
  return Atom(atoms.front().generator(), std::move(mean),
              barycenter_covariance(active_weights, scatters));
}

Atom atom_geodesic(const Atom& a0, const Atom& a1, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidInput("geodesic time must lie in [0, 1]");
  require_same_family(a0, a1);
  if (t == 0.0) return a0;
  if (t == 1.0) return a1;
  const double weights[2] = {1.0 - t, t};
  const Atom ends[2] = {a0, a1};
  return atom_barycenter(weights, ends);
}

std::weak_ordering compare_parameters(const Atom& a, const Atom& b) {
  auto cmp = [](double x, double y) {
    if (x < y) return std::weak_ordering::less;
    if (x > y) return std::weak_ordering::greater;
    return std::weak_ordering::equivalent;
  };
  if (a.dim() != b.dim()) return a.dim() <=> b.dim();
  for (Eigen::Index i = 0; i < a.mean().size(); ++i) {
    if (auto c = cmp(a.mean()(i), b.mean()(i)); c != 0) return c;
  }
  const Matrix& sa = a.scatter().matrix();
  const Matrix& sb = b.scatter().matrix();
  for (Eigen::Index i = 0; i < sa.size(); ++i) {
    if (auto c = cmp(sa.data()[i], sb.data()[i]); c != 0) return c;
  }
  return std::weak_ordering::equivalent;
}

bool same_parameters(const Atom& a, const Atom& b, double tol) {
  if (a.dim() != b.dim()) return false;
  return (a.mean() - b.mean()).cwiseAbs().maxCoeff() <= tol &&
         (a.scatter().matrix() - b.scatter().matrix()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace mixot
