#pragma once

// Exact solvers for discrete transport between mixture weight vectors.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace mixot {

/// Nonnegative coupling stored sparsely as (index tuple, weight) pairs.
struct DiscretePlan {
  struct Entry {
    std::vector<std::size_t> index;
    double weight = 0.0;
  };

  std::vector<std::size_t> shape;
  std::vector<Entry> entries;
  /// Objective value sum_k w_k c_k.
  double value = 0.0;
  /// Dual potentials (one vector per marginal). Filled by solve_transport; the
  /// multi-marginal solver fills them for the kept constraints and sets the
  /// dropped redundant ones to zero.
  std::vector<std::vector<double>> potentials;
  int pivots = 0;

  std::size_t nonzeros() const noexcept { return entries.size(); }
  /// Marginal q of the plan.
  std::vector<double> marginal(std::size_t q) const;
  /// Dense J x K view of a two-marginal plan.
  Eigen::MatrixXd dense() const;
};

/// Dense tensor in row-major (last index fastest) order.
struct CostTensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double at(std::span<const std::size_t> index) const;
};

/// Transportation simplex on the J x K problem. Returns a basic optimal plan
/// with at most J + K - 1 nonzeros. The entering variable is the
/// lexicographically smallest cell with negative reduced cost and the leaving
/// variable the smallest tied cell, so plans are reproducible.
/// Throws InvalidInput on negative or non-finite costs or weights off the simplex.
DiscretePlan solve_transport(std::span<const double> lambda0, std::span<const double> lambda1,
                             const Eigen::MatrixXd& cost);

inline constexpr std::size_t kMultiMarginalCapacity = 1'000'000;

/// Multi-marginal transport by dense revised simplex, started from the
/// north-west staircase and pivoting with Bland's rule. Returns a basic
/// solution with at most sum K_q - Q + 1 nonzeros. Throws CapacityError if the
/// tensor has more than kMultiMarginalCapacity cells.
DiscretePlan solve_multimarginal(std::span<const std::vector<double>> lambdas,
                                 const CostTensor& cost);

/// Vertex enumeration over spanning-tree supports, J, K <= 4. Test oracle.
DiscretePlan brute_force_transport(std::span<const double> lambda0,
                                   std::span<const double> lambda1, const Eigen::MatrixXd& cost);

}  // namespace mixot
