#include "mixot/grid_oracle.hpp"

#include "mixot/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mixot {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kCheckInterval = 10;
constexpr double kCutoff = -60.0;

void require_same_grid(const GridDensity& p, const GridDensity& q) {
  if (!(p.spec == q.spec)) throw InvalidGrid("densities live on different grids");
  if (p.values.size() != p.spec.size() || q.values.size() != q.spec.size()) {
    throw InvalidGrid("density value count does not match its grid");
  }
}

std::vector<double> log_masses(const GridDensity& p) {
  std::vector<double> out = p.masses();
  for (double& v : out) v = v > 0.0 ? std::log(v) : kNegInf;
  return out;
}

// Squared Euclidean cost over eps on a tensor grid, applied axis by axis.
class LogKernel {
 public:
  LogKernel(const GridSpec& spec, double eps) : spec_(spec) {
    for (std::size_t a = 0; a < spec.dim(); ++a) {
      const std::size_t n = spec.points()[a];
      Matrix m(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double d = spec.coordinate(a, i) - spec.coordinate(a, j);
          m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d * d / eps;
        }
      }
      axes_.push_back(std::move(m));
    }
  }

  // out(x) = log sum_y exp(h(y) - C(x, y) / eps).
  void apply(const std::vector<double>& h, std::vector<double>& out) const {
    if (spec_.dim() == 1) {
      pass(h, out, 0);
      return;
    }
    scratch_.resize(h.size());
    pass(h, scratch_, 1);
    pass(scratch_, out, 0);
  }

  // Cost over eps between two nodes given by row-major index.
  double cost(std::size_t x, std::size_t y) const {
    if (spec_.dim() == 1) {
      return axes_[0](static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
    }
    const std::size_t n1 = spec_.points()[1];
    return axes_[0](static_cast<Eigen::Index>(x / n1), static_cast<Eigen::Index>(y / n1)) +
           axes_[1](static_cast<Eigen::Index>(x % n1), static_cast<Eigen::Index>(y % n1));
  }

 private:
  // Log-sum-exp along one axis. Terms below exp(kCutoff) relative to the
  // largest are dropped: their total is below n * 1e-26 of the sum.
  void pass(const std::vector<double>& in, std::vector<double>& out, std::size_t axis) const {
    const Matrix& m = axes_[axis];
    const std::size_t n = spec_.points()[axis];
    std::size_t stride = 1;
    for (std::size_t a = axis + 1; a < spec_.dim(); ++a) stride *= spec_.points()[a];
    const std::size_t outer = in.size() / (n * stride);
    const auto total = static_cast<std::ptrdiff_t>(outer * stride * n);
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::ptrdiff_t flat = 0; flat < total; ++flat) {
      const auto f = static_cast<std::size_t>(flat);
      const std::size_t x = f % n;
      const std::size_t s = (f / n) % stride;
      const std::size_t o = f / (n * stride);
      const double* src = in.data() + o * n * stride + s;
      // Symmetric cost: column x holds c(x, .) contiguously.
      const double* cx = m.data() + x * n;
      double best = kNegInf;
      for (std::size_t y = 0; y < n; ++y) best = std::max(best, src[y * stride] - cx[y]);
      double value = kNegInf;
      if (best > kNegInf) {
        double sum = 0.0;
        for (std::size_t y = 0; y < n; ++y) {
          const double v = src[y * stride] - cx[y] - best;
          if (v > kCutoff) sum += std::exp(v);
        }
        value = best + std::log(sum);
      }
      out[o * n * stride + s + x * stride] = value;
    }
  }

  GridSpec spec_;
  std::vector<Matrix> axes_;
  mutable std::vector<double> scratch_;
};

double marginal_violation(const std::vector<double>& f, const std::vector<double>& kg,
                          const std::vector<double>& masses) {
  double total = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double r = f[i] > kNegInf ? std::exp(f[i] + kg[i]) : 0.0;
    total += std::abs(r - masses[i]);
  }
  return total;
}

struct Potentials {
  std::vector<double> f, g;
  double violation = 0.0;
  int iterations = 0;
  bool converged = false;
};

Potentials solve_potentials(const GridDensity& p, const GridDensity& q, const LogKernel& kernel,
                            const SinkhornOptions& options) {
  const std::vector<double> la = log_masses(p), lb = log_masses(q), a = p.masses();
  const std::size_t n = la.size();
  Potentials out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  std::vector<double> k(n);
  for (int it = 1; it <= options.max_iterations; ++it) {
    kernel.apply(out.g, k);
    for (std::size_t i = 0; i < n; ++i) out.f[i] = la[i] > kNegInf ? la[i] - k[i] : kNegInf;
    kernel.apply(out.f, k);
    for (std::size_t j = 0; j < n; ++j) out.g[j] = lb[j] > kNegInf ? lb[j] - k[j] : kNegInf;
    out.iterations = it;
    if (it % kCheckInterval == 0 || it == options.max_iterations) {
      kernel.apply(out.g, k);
      out.violation = marginal_violation(out.f, k, a);
      if (out.violation <= options.tolerance) {
        out.converged = true;
        break;
      }
    }
  }
  return out;
}

// Index of the node at `x`, or npos when `x` is not a node.
std::size_t node_index(const GridSpec& spec, const Vector& x) {
  std::size_t index = 0;
  for (std::size_t a = 0; a < spec.dim(); ++a) {
    const double k = (x(static_cast<Eigen::Index>(a)) - spec.bounds()[a].first) / spec.spacing(a);
    const double r = std::round(k);
    if (std::abs(k - r) > 1e-6 || r < 0.0 || r >= static_cast<double>(spec.points()[a])) {
      return std::string::npos;
    }
    index = index * spec.points()[a] + static_cast<std::size_t>(r);
  }
  return index;
}

double sd_of(const Atom& a, std::size_t axis) {
  return std::sqrt(a.scatter()(static_cast<Eigen::Index>(axis), static_cast<Eigen::Index>(axis)));
}

}  // namespace

GridSpec::GridSpec(std::vector<std::pair<double, double>> bounds, std::vector<std::size_t> points)
    : bounds_(std::move(bounds)), points_(std::move(points)) {
  if (bounds_.empty() || bounds_.size() > 2) {
    throw UnsupportedDimension("grids have one or two axes, got " + std::to_string(bounds_.size()));
  }
  if (points_.size() != bounds_.size()) {
    throw InvalidInput("grid needs one node count per axis");
  }
  for (std::size_t a = 0; a < bounds_.size(); ++a) {
    if (!(std::isfinite(bounds_[a].first) && std::isfinite(bounds_[a].second) &&
          bounds_[a].first < bounds_[a].second)) {
      throw InvalidInput("grid axis " + std::to_string(a) + " needs finite bounds low < high");
    }
    if (points_[a] < 2) {
      throw InvalidInput("grid axis " + std::to_string(a) + " needs at least 2 points");
    }
  }
}

std::size_t GridSpec::size() const noexcept {
  std::size_t n = 1;
  for (std::size_t k : points_) n *= k;
  return n;
}

double GridSpec::spacing(std::size_t axis) const {
  return (bounds_.at(axis).second - bounds_[axis].first) / static_cast<double>(points_[axis] - 1);
}

double GridSpec::coordinate(std::size_t axis, std::size_t k) const {
  if (k + 1 == points_.at(axis)) return bounds_[axis].second;
  return bounds_[axis].first + static_cast<double>(k) * spacing(axis);
}

Vector GridSpec::node(std::size_t index) const {
  Vector x(static_cast<Eigen::Index>(dim()));
  for (std::size_t a = dim(); a-- > 0;) {
    x(static_cast<Eigen::Index>(a)) = coordinate(a, index % points_[a]);
    index /= points_[a];
  }
  return x;
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (std::size_t a = 0; a < dim(); ++a) v *= spacing(a);
  return v;
}

double GridSpec::diameter_squared() const {
  double d = 0.0;
  for (const auto& [lo, hi] : bounds_) d += (hi - lo) * (hi - lo);
  return d;
}

GridSpec auto_grid(std::span<const Mixture> mixtures, std::size_t points_per_axis) {
  std::size_t dim = 0;
  std::vector<std::pair<double, double>> bounds;
  for (const auto& mu : mixtures) {
    for (const auto& atom : mu.atoms) {
      if (dim == 0) {
        dim = atom.dim();
        bounds.assign(dim, {std::numeric_limits<double>::infinity(),
                            -std::numeric_limits<double>::infinity()});
      } else if (atom.dim() != dim) {
        throw InvalidInput("mixtures on one grid must share a dimension");
      }
      const double k = std::max(kAutoBoundsSigmas,
                                generator_tail_radius(atom.generator(), kAutoBoundsTail));
      for (std::size_t a = 0; a < dim; ++a) {
        const double m = atom.mean()(static_cast<Eigen::Index>(a));
        bounds[a].first = std::min(bounds[a].first, m - k * sd_of(atom, a));
        bounds[a].second = std::max(bounds[a].second, m + k * sd_of(atom, a));
      }
    }
  }
  if (dim == 0) throw InvalidInput("automatic grid bounds need at least one atom");
  return GridSpec(std::move(bounds), std::vector<std::size_t>(dim, points_per_axis));
}

GridSpec auto_grid(const Mixture& mu, std::size_t points_per_axis) {
  return auto_grid(std::span<const Mixture>(&mu, 1), points_per_axis);
}

GridSpec symmetrized_grid(const GridSpec& spec, const SymmetryGroup& group) {
  if (group.dim() != spec.dim()) {
    throw InvalidGrid("group acts on R^" + std::to_string(group.dim()) + ", grid has " +
                      std::to_string(spec.dim()) + " axes");
  }
  auto bounds = spec.bounds();
  auto points = spec.points();
  switch (group.kind()) {
    case GroupKind::Parity:
      for (auto& [lo, hi] : bounds) {
        const double r = std::max(std::abs(lo), std::abs(hi));
        lo = -r;
        hi = r;
      }
      break;
    case GroupKind::Permutation: {
      // One axis per block coordinate; blocks are interchangeable.
      const std::size_t d = group.block_dim();
      for (std::size_t r = 0; r < d; ++r) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        std::size_t n = 0;
        for (std::size_t b = 0; b < group.n(); ++b) {
          lo = std::min(lo, bounds[b * d + r].first);
          hi = std::max(hi, bounds[b * d + r].second);
          n = std::max(n, points[b * d + r]);
        }
        for (std::size_t b = 0; b < group.n(); ++b) {
          bounds[b * d + r] = {lo, hi};
          points[b * d + r] = n;
        }
      }
      break;
    }
    case GroupKind::SO2:
      throw UnsupportedGroup("rotations do not map a tensor grid onto itself");
  }
  return GridSpec(std::move(bounds), std::move(points));
}

std::vector<double> GridDensity::masses() const {
  std::vector<double> out(values);
  const double vol = spec.cell_volume();
  for (double& v : out) v *= vol;
  return out;
}

GridDensity rasterize(const DensityFunction& density, const GridSpec& spec) {
  GridDensity out{spec, std::vector<double>(spec.size())};
  double total = 0.0;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double v = density(spec.node(i));
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidInput("density sample at node " + std::to_string(i) +
                         " is negative or not finite");
    }
    out.values[i] = v;
    total += v;
  }
  if (!(total > 0.0)) throw EmptySupport("every grid sample is zero; the grid misses the support");
  const double scale = 1.0 / (total * spec.cell_volume());
  for (double& v : out.values) v *= scale;
  return out;
}

GridDensity rasterize(const Mixture& mu, const GridSpec& spec) {
  return rasterize([&](const Vector& x) { return mixture_density(mu, x); }, spec);
}

GridDensity rasterize(const SymMixture& mu, const GridSpec& spec) {
  return rasterize([&](const Vector& x) { return mixture_density(mu, x); }, spec);
}

double grid_l1_distance(const GridDensity& p, const GridDensity& q) {
  require_same_grid(p, q);
  const double vol = p.spec.cell_volume();
  double total = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) total += std::abs(p.values[i] - q.values[i]);
  return total * vol;
}

double absolute_epsilon(const GridSpec& spec, const SinkhornOptions& options) {
  if (!(options.eps_rel > 0.0)) throw InvalidInput("regularization must be positive");
  return options.eps_rel * spec.diameter_squared();
}

double entropic_bias(const GridSpec& spec, const SinkhornOptions& options) {
  return absolute_epsilon(spec, options) * std::log(static_cast<double>(spec.size()));
}

SinkhornResult sinkhorn_w2_squared(const GridDensity& p, const GridDensity& q,
                                   const SinkhornOptions& options) {
  require_same_grid(p, q);
  const double eps = absolute_epsilon(p.spec, options);
  const LogKernel kernel(p.spec, eps);
  const Potentials pot = solve_potentials(p, q, kernel, options);
  const auto n = static_cast<std::ptrdiff_t>(pot.f.size());
  double value = 0.0;
#pragma omp parallel for reduction(+ : value) schedule(static) num_threads(worker_threads())
  for (std::ptrdiff_t x = 0; x < n; ++x) {
    if (pot.f[x] == kNegInf) continue;
    double row = 0.0;
    for (std::ptrdiff_t y = 0; y < n; ++y) {
      if (pot.g[y] == kNegInf) continue;
      const double c = kernel.cost(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
      row += std::exp(pot.f[x] + pot.g[y] - c) * c;
    }
    value += row;
  }
  return {value * eps, pot.violation, pot.iterations, pot.converged, eps};
}

GridBarycenter sinkhorn_barycenter(std::span<const GridDensity> densities,
                                   std::span<const double> weights,
                                   const SinkhornOptions& options) {
  if (densities.empty() || densities.size() != weights.size()) {
    throw InvalidInput("barycenter needs one weight per density");
  }
  const std::vector<double> t_all = validated_simplex(weights);
  for (const auto& d : densities) require_same_grid(densities.front(), d);

  std::vector<const GridDensity*> inputs;
  std::vector<double> t;
  for (std::size_t q = 0; q < densities.size(); ++q) {
    if (t_all[q] > 0.0) {
      inputs.push_back(&densities[q]);
      t.push_back(t_all[q]);
    }
  }
  if (inputs.size() == 1) return {*inputs.front(), 0.0, 0, true};

  const GridSpec& spec = densities.front().spec;
  const LogKernel kernel(spec, absolute_epsilon(spec, options));
  const std::size_t n = spec.size(), count = inputs.size();
  std::vector<std::vector<double>> la, a, lu(count, std::vector<double>(n)),
      lv(count, std::vector<double>(n, 0.0)), s(count, std::vector<double>(n));
  for (const auto* d : inputs) {
    la.push_back(log_masses(*d));
    a.push_back(d->masses());
  }
  std::vector<double> lb(n, 0.0), ld(n, 0.0), k(n);

  GridBarycenter out{GridDensity{spec, std::vector<double>(n)}};
  for (int it = 1; it <= options.max_iterations; ++it) {
    std::fill(lb.begin(), lb.end(), 0.0);
    for (std::size_t q = 0; q < count; ++q) {
      kernel.apply(lv[q], k);
      for (std::size_t i = 0; i < n; ++i) lu[q][i] = la[q][i] > kNegInf ? la[q][i] - k[i] : kNegInf;
      kernel.apply(lu[q], s[q]);
      for (std::size_t j = 0; j < n; ++j) lb[j] += t[q] * s[q][j];
    }
    if (options.debias) {
      for (std::size_t j = 0; j < n; ++j) lb[j] += ld[j];
    }
    for (std::size_t q = 0; q < count; ++q) {
      for (std::size_t j = 0; j < n; ++j) lv[q][j] = lb[j] - s[q][j];
    }
    if (options.debias) {
      // Fixed point d = sqrt(d b / K d) of the self-transport of b.
      kernel.apply(ld, k);
      for (std::size_t j = 0; j < n; ++j) ld[j] = 0.5 * (ld[j] + lb[j] - k[j]);
    }
    out.iterations = it;
    if (it % kCheckInterval == 0 || it == options.max_iterations) {
      out.violation = 0.0;
      for (std::size_t q = 0; q < count; ++q) {
        kernel.apply(lv[q], k);
        out.violation = std::max(out.violation, marginal_violation(lu[q], k, a[q]));
      }
      if (out.violation <= options.tolerance) {
        out.converged = true;
        break;
      }
    }
  }
  double total = 0.0;
  const double top = *std::max_element(lb.begin(), lb.end());
  for (std::size_t j = 0; j < n; ++j) {
    out.density.values[j] = std::exp(lb[j] - top);
    total += out.density.values[j];
  }
  const double scale = 1.0 / (total * spec.cell_volume());
  for (double& v : out.density.values) v *= scale;
  return out;
}

double plan_region_mass(const GridDensity& p, const GridDensity& q, const NodePairPredicate& region,
                        const SinkhornOptions& options) {
  require_same_grid(p, q);
  const LogKernel kernel(p.spec, absolute_epsilon(p.spec, options));
  const Potentials pot = solve_potentials(p, q, kernel, options);
  const auto n = static_cast<std::ptrdiff_t>(pot.f.size());
  std::vector<Vector> nodes;
  for (std::ptrdiff_t i = 0; i < n; ++i) nodes.push_back(p.spec.node(static_cast<std::size_t>(i)));
  double mass = 0.0;
#pragma omp parallel for reduction(+ : mass) schedule(static) num_threads(worker_threads())
  for (std::ptrdiff_t x = 0; x < n; ++x) {
    if (pot.f[x] == kNegInf) continue;
    double row = 0.0;
    for (std::ptrdiff_t y = 0; y < n; ++y) {
      if (pot.g[y] == kNegInf || !region(nodes[x], nodes[y])) continue;
      row += std::exp(pot.f[x] + pot.g[y] -
                      kernel.cost(static_cast<std::size_t>(x), static_cast<std::size_t>(y)));
    }
    mass += row;
  }
  return mass;
}

double symmetry_defect(const GridDensity& p, const SymmetryGroup& group) {
  if (group.dim() != p.spec.dim()) {
    throw InvalidGrid("group acts on R^" + std::to_string(group.dim()) + ", grid has " +
                      std::to_string(p.spec.dim()) + " axes");
  }
  if (!group.finite()) throw InvalidGrid("rotations do not map a tensor grid onto itself");
  const std::vector<double> m = p.masses();
  double worst = 0.0;
  for (const auto& g : group.elements()) {
    double total = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      // (g p)(x) = p(g^T x).
      const std::size_t j = node_index(p.spec, g.matrix.transpose() * p.spec.node(i));
      if (j == std::string::npos) {
        throw InvalidGrid("group element maps a grid node off the grid; use symmetrized_grid");
      }
      total += std::abs(m[i] - m[j]);
    }
    worst = std::max(worst, total);
  }
  return worst;
}

void write_csv(std::ostream& out, const GridDensity& p) {
  out << (p.spec.dim() == 1 ? "x,value\n" : "x,y,value\n");
  out << std::setprecision(17);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const Vector x = p.spec.node(i);
    for (Eigen::Index a = 0; a < x.size(); ++a) out << x(a) << ',';
    out << p.values[i] << '\n';
  }
}

int worker_threads() {
  if (const char* env = std::getenv("MIXOT_THREADS")) {
    int n = 0;
    const auto [end, ec] = std::from_chars(env, env + std::strlen(env), n);
    if (ec == std::errc() && *end == '\0' && n > 0) return n;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace mixot
