#pragma once

// Grid reference implementation: densities sampled on tensor grids in one or
// two dimensions and entropic optimal transport between them in the log
// domain. The squared Euclidean cost is separable across axes, so every
// kernel application is a sequence of one-dimensional log-sum-exp passes.

#include "mixot/mixtures.hpp"
#include "mixot/symmetry.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace mixot {

inline constexpr std::size_t kDefaultGridPoints1D = 200;
inline constexpr std::size_t kDefaultGridPoints2D = 50;
/// Auto-bounds cover mean +- 5 standard deviations, widened for heavy-tailed
/// families until the family's tail mass outside the box is below 1e-6.
inline constexpr double kAutoBoundsSigmas = 5.0;
inline constexpr double kAutoBoundsTail = 1e-6;

class GridSpec {
 public:
  /// One (low, high) interval and one node count per axis; 1 or 2 axes.
  GridSpec(std::vector<std::pair<double, double>> bounds, std::vector<std::size_t> points);

  std::size_t dim() const noexcept { return bounds_.size(); }
  const std::vector<std::pair<double, double>>& bounds() const noexcept { return bounds_; }
  const std::vector<std::size_t>& points() const noexcept { return points_; }
  /// Total node count.
  std::size_t size() const noexcept;
  double spacing(std::size_t axis) const;
  double coordinate(std::size_t axis, std::size_t k) const;
  /// Row-major node index -> coordinates (last axis fastest).
  Vector node(std::size_t index) const;
  /// Product of the axis spacings.
  double cell_volume() const;
  /// Squared length of the box diagonal.
  double diameter_squared() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  std::vector<std::pair<double, double>> bounds_;
  std::vector<std::size_t> points_;
};

/// Box covering every atom of every mixture (see kAutoBoundsSigmas).
GridSpec auto_grid(std::span<const Mixture> mixtures, std::size_t points_per_axis);
GridSpec auto_grid(const Mixture& mu, std::size_t points_per_axis);
/// Smallest enlargement of `spec` that every element of a finite `group`
/// maps onto itself: parity centres each axis, permutations equalize axes.
GridSpec symmetrized_grid(const GridSpec& spec, const SymmetryGroup& group);

struct GridDensity {
  GridSpec spec;
  /// Node values, row-major; sum(values) * cell_volume == 1.
  std::vector<double> values;

  /// Node masses values * cell_volume, summing to 1.
  std::vector<double> masses() const;
};

using DensityFunction = std::function<double(const Vector&)>;

/// Samples `density` at the nodes and renormalizes. Throws EmptySupport when
/// every sample is zero and InvalidInput on negative or non-finite samples.
GridDensity rasterize(const DensityFunction& density, const GridSpec& spec);
GridDensity rasterize(const Mixture& mu, const GridSpec& spec);
GridDensity rasterize(const SymMixture& mu, const GridSpec& spec);

/// L1 distance between the node-mass vectors of two densities on one grid.
double grid_l1_distance(const GridDensity& p, const GridDensity& q);

struct SinkhornOptions {
  /// Regularization relative to the squared grid diameter.
  double eps_rel = 1e-4;
  int max_iterations = 10000;
  /// L1 marginal violation at which the iteration stops.
  double tolerance = 1e-8;
  /// Barycenters only: remove the entropic blur by the self-transport
  /// correction, so that identical inputs are a fixed point.
  bool debias = true;
};

/// eps_rel * diameter^2.
double absolute_epsilon(const GridSpec& spec, const SinkhornOptions& options);
/// eps * log(n): bound on the entropic offset of the transport cost.
double entropic_bias(const GridSpec& spec, const SinkhornOptions& options);

struct SinkhornResult {
  /// <plan, cost>: the unregularized objective of the regularized plan.
  double value = 0.0;
  /// L1 violation of the source marginal after the last iteration.
  double violation = 0.0;
  int iterations = 0;
  bool converged = false;
  double epsilon = 0.0;
};

/// Throws InvalidGrid unless both densities share one grid. Non-convergence
/// is reported through `converged`, not thrown.
SinkhornResult sinkhorn_w2_squared(const GridDensity& p, const GridDensity& q,
                                   const SinkhornOptions& options = {});

struct GridBarycenter {
  GridDensity density;
  /// Largest L1 violation of an input marginal after the last iteration.
  double violation = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Log-domain iterative Bregman projections. A single input with positive
/// weight is returned unchanged.
GridBarycenter sinkhorn_barycenter(std::span<const GridDensity> densities,
                                   std::span<const double> weights,
                                   const SinkhornOptions& options = {});

using NodePairPredicate = std::function<bool(const Vector& x, const Vector& y)>;

/// Mass of the converged entropic plan on node pairs (x, y) accepted by
/// `region`, streamed from the dual potentials one row at a time.
double plan_region_mass(const GridDensity& p, const GridDensity& q, const NodePairPredicate& region,
                        const SinkhornOptions& options = {});

/// max over g in G of the L1 distance between p and its image g p. Throws
/// InvalidGrid unless every element maps the grid nodes onto grid nodes.
double symmetry_defect(const GridDensity& p, const SymmetryGroup& group);

/// CSV with header `x,value` or `x,y,value`, 17 significant digits, one row
/// per node in row-major order.
void write_csv(std::ostream& out, const GridDensity& p);

/// Worker thread cap: MIXOT_THREADS when set to a positive integer, otherwise
/// the OpenMP default.
int worker_threads();

}  // namespace mixot
