#include "mixot/discrete_ot.hpp"

#include "mixot/errors.hpp"
#include "mixot/spd_linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <queue>
#include <string>

namespace mixot {
namespace {

constexpr double kDropBelow = 1e-15;
constexpr int kMaxPivots = 1'000'000;

void validate_cost(const Eigen::MatrixXd& cost, std::size_t rows, std::size_t cols) {
  if (static_cast<std::size_t>(cost.rows()) != rows ||
      static_cast<std::size_t>(cost.cols()) != cols) {
    throw InvalidInput("cost matrix is " + std::to_string(cost.rows()) + "x" +
                       std::to_string(cost.cols()) + ", expected " + std::to_string(rows) + "x" +
                       std::to_string(cols));
  }
  if (!cost.allFinite() || (cost.size() > 0 && cost.minCoeff() < 0.0)) {
    throw InvalidInput("cost entries must be finite and nonnegative");
  }
}

double reduced_cost_tolerance(double max_cost) { return 1e-12 * std::max(max_cost, 1e-300); }

DiscretePlan two_marginal_plan(const Eigen::MatrixXd& flow, const Eigen::MatrixXd& cost) {
  DiscretePlan plan;
  plan.shape = {static_cast<std::size_t>(flow.rows()), static_cast<std::size_t>(flow.cols())};
  for (Eigen::Index i = 0; i < flow.rows(); ++i) {
    for (Eigen::Index j = 0; j < flow.cols(); ++j) {
      if (flow(i, j) > kDropBelow) {
        plan.entries.push_back(
            {{static_cast<std::size_t>(i), static_cast<std::size_t>(j)}, flow(i, j)});
        plan.value += flow(i, j) * cost(i, j);
      }
    }
  }
  return plan;
}

}  // namespace

std::vector<double> DiscretePlan::marginal(std::size_t q) const {
  std::vector<double> out(shape.at(q), 0.0);
  for (const auto& e : entries) out[e.index[q]] += e.weight;
  return out;
}

Eigen::MatrixXd DiscretePlan::dense() const {
  if (shape.size() != 2) throw InvalidInput("dense view requires a two-marginal plan");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(shape[0], shape[1]);
  for (const auto& e : entries) out(e.index[0], e.index[1]) += e.weight;
  return out;
}

double CostTensor::at(std::span<const std::size_t> index) const {
  std::size_t flat = 0;
  for (std::size_t q = 0; q < shape.size(); ++q) flat = flat * shape[q] + index[q];
  return values.at(flat);
}

DiscretePlan solve_transport(std::span<const double> lambda0, std::span<const double> lambda1,
                             const Eigen::MatrixXd& cost) {
  const std::vector<double> a = validated_simplex(lambda0);
  const std::vector<double> b = validated_simplex(lambda1);
  const std::size_t rows = a.size();
  const std::size_t cols = b.size();
  validate_cost(cost, rows, cols);

  Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(rows, cols);
  std::vector<std::pair<std::size_t, std::size_t>> basis;
  basis.reserve(rows + cols - 1);

  // North-west staircase: one index advances per cell, giving exactly
  // rows + cols - 1 basic cells even under degeneracy.
  {
    std::vector<double> ra = a;
    std::vector<double> rb = b;
    std::size_t i = 0;
    std::size_t j = 0;
    while (true) {
      if (i == rows - 1 && j == cols - 1) {
        flow(i, j) = std::max(ra[i], 0.0);
        basis.emplace_back(i, j);
        break;
      }
      const bool row_first = ra[i] <= rb[j];
      const double x = std::min(ra[i], rb[j]);
      flow(i, j) = std::max(x, 0.0);
      basis.emplace_back(i, j);
      ra[i] -= x;
      rb[j] -= x;
      if ((row_first && i < rows - 1) || j == cols - 1) {
        ra[i] = 0.0;
        ++i;
      } else {
        rb[j] = 0.0;
        ++j;
      }
    }
  }

  const double tol = reduced_cost_tolerance(cost.size() ? cost.maxCoeff() : 0.0);
  const std::size_t nodes = rows + cols;
  std::vector<double> u(rows);
  std::vector<double> v(cols);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> in_basis =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(rows, cols, false);
  for (const auto& [i, j] : basis) in_basis(i, j) = true;

  int pivots = 0;
  std::vector<std::vector<std::size_t>> adjacency(nodes);
  std::vector<std::ptrdiff_t> parent(nodes);
  while (true) {
    for (auto& list : adjacency) list.clear();
    for (const auto& [i, j] : basis) {
      adjacency[i].push_back(rows + j);
      adjacency[rows + j].push_back(i);
    }
    // Potentials u_i + v_j = c_ij on the spanning tree, rooted at row 0.
    std::fill(parent.begin(), parent.end(), -2);
    parent[0] = -1;
    u[0] = 0.0;
    std::queue<std::size_t> frontier;
    frontier.push(0);
    while (!frontier.empty()) {
      const std::size_t node = frontier.front();
      frontier.pop();
      for (std::size_t next : adjacency[node]) {
        if (parent[next] != -2) continue;
        parent[next] = static_cast<std::ptrdiff_t>(node);
        if (next >= rows) {
          v[next - rows] = cost(node, next - rows) - u[node];
        } else {
          u[next] = cost(next, node - rows) - v[node - rows];
        }
        frontier.push(next);
      }
    }

    std::ptrdiff_t enter_i = -1;
    std::ptrdiff_t enter_j = -1;
    for (std::size_t i = 0; i < rows && enter_i < 0; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        if (!in_basis(i, j) && cost(i, j) - u[i] - v[j] < -tol) {
          enter_i = static_cast<std::ptrdiff_t>(i);
          enter_j = static_cast<std::ptrdiff_t>(j);
          break;
        }
      }
    }
    if (enter_i < 0) break;
    if (++pivots > kMaxPivots) {
      throw ConvergenceError("transportation simplex exceeded its pivot budget", 0.0, pivots);
    }

    // Tree path from column node back to the entering row, rooted at that row.
    std::fill(parent.begin(), parent.end(), -2);
    parent[enter_i] = -1;
    frontier.push(static_cast<std::size_t>(enter_i));
    while (!frontier.empty()) {
      const std::size_t node = frontier.front();
      frontier.pop();
      for (std::size_t next : adjacency[node]) {
        if (parent[next] != -2) continue;
        parent[next] = static_cast<std::ptrdiff_t>(node);
        frontier.push(next);
      }
    }
    struct CycleCell {
      std::size_t i, j;
      bool minus;
    };
    std::vector<CycleCell> cycle;
    bool minus = true;
    for (std::size_t node = rows + static_cast<std::size_t>(enter_j);
         parent[node] >= 0; node = static_cast<std::size_t>(parent[node])) {
      const std::size_t other = static_cast<std::size_t>(parent[node]);
      const std::size_t i = node < rows ? node : other;
      const std::size_t j = (node < rows ? other : node) - rows;
      cycle.push_back({i, j, minus});
      minus = !minus;
    }

    std::ptrdiff_t leave = -1;
    double theta = 0.0;
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      if (!cycle[k].minus) continue;
      const double x = flow(cycle[k].i, cycle[k].j);
      if (leave < 0 || x < theta ||
          (x == theta && std::pair(cycle[k].i, cycle[k].j) <
                             std::pair(cycle[leave].i, cycle[leave].j))) {
        leave = static_cast<std::ptrdiff_t>(k);
        theta = x;
      }
    }
    theta = std::max(theta, 0.0);
    flow(enter_i, enter_j) = theta;
    for (const auto& c : cycle) {
      flow(c.i, c.j) += c.minus ? -theta : theta;
      if (flow(c.i, c.j) < 0.0) flow(c.i, c.j) = 0.0;
    }
    const auto& out = cycle[static_cast<std::size_t>(leave)];
    flow(out.i, out.j) = 0.0;
    in_basis(out.i, out.j) = false;
    in_basis(enter_i, enter_j) = true;
    *std::find(basis.begin(), basis.end(), std::pair(out.i, out.j)) = {
        static_cast<std::size_t>(enter_i), static_cast<std::size_t>(enter_j)};
  }

  DiscretePlan plan = two_marginal_plan(flow, cost);
  plan.potentials = {u, v};
  plan.pivots = pivots;
  return plan;
}

DiscretePlan solve_multimarginal(std::span<const std::vector<double>> lambdas,
                                 const CostTensor& cost) {
  const std::size_t marginals = lambdas.size();
  if (marginals < 2) throw InvalidInput("multi-marginal transport needs at least two marginals");
  if (cost.shape.size() != marginals) throw InvalidInput("cost tensor rank does not match");
  std::vector<std::vector<double>> w;
  std::size_t cells = 1;
  for (std::size_t q = 0; q < marginals; ++q) {
    w.push_back(validated_simplex(lambdas[q]));
    if (cost.shape[q] != w[q].size()) {
      throw InvalidInput("cost tensor extent " + std::to_string(q) + " does not match marginal");
    }
    cells *= w[q].size();
    if (cells > kMultiMarginalCapacity) {
      throw CapacityError("multi-marginal problem has more than " +
                          std::to_string(kMultiMarginalCapacity) +
                          " cells; decompose it into pairwise problems");
    }
  }
  if (cost.values.size() != cells) throw InvalidInput("cost tensor has the wrong number of cells");
  double max_cost = 0.0;
  for (double c : cost.values) {
    if (!std::isfinite(c) || c < 0.0) {
      throw InvalidInput("cost entries must be finite and nonnegative");
    }
    max_cost = std::max(max_cost, c);
  }

  // Constraint rows: every entry of marginal 0, all but the last entry of the
  // others (one redundant mass constraint per extra marginal).
  std::vector<std::size_t> row_offset(marginals, 0);
  std::size_t row_count = w[0].size();
  for (std::size_t q = 1; q < marginals; ++q) {
    row_offset[q] = row_count;
    row_count += w[q].size() - 1;
  }
  auto row_of = [&](std::size_t q, std::size_t k) -> std::ptrdiff_t {
    if (q == 0) return static_cast<std::ptrdiff_t>(k);
    if (k + 1 == w[q].size()) return -1;
    return static_cast<std::ptrdiff_t>(row_offset[q] + k);
  };
  Eigen::VectorXd rhs(row_count);
  for (std::size_t q = 0; q < marginals; ++q) {
    for (std::size_t k = 0; k < w[q].size(); ++k) {
      if (auto r = row_of(q, k); r >= 0) rhs(r) = w[q][k];
    }
  }
  auto unflatten = [&](std::size_t flat) {
    std::vector<std::size_t> index(marginals);
    for (std::size_t q = marginals; q-- > 0;) {
      index[q] = flat % w[q].size();
      flat /= w[q].size();
    }
    return index;
  };
  auto flatten = [&](const std::vector<std::size_t>& index) {
    std::size_t flat = 0;
    for (std::size_t q = 0; q < marginals; ++q) flat = flat * w[q].size() + index[q];
    return flat;
  };
  auto column = [&](std::size_t flat) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(row_count);
    const auto index = unflatten(flat);
    for (std::size_t q = 0; q < marginals; ++q) {
      if (auto r = row_of(q, index[q]); r >= 0) col(r) = 1.0;
    }
    return col;
  };

  // North-west staircase start: exactly row_count cells.
  std::vector<std::size_t> basis;
  {
    std::vector<std::vector<double>> remaining = w;
    std::vector<std::size_t> index(marginals, 0);
    while (true) {
      double x = remaining[0][index[0]];
      for (std::size_t q = 1; q < marginals; ++q) x = std::min(x, remaining[q][index[q]]);
      basis.push_back(flatten(index));
      for (std::size_t q = 0; q < marginals; ++q) remaining[q][index[q]] -= x;
      std::ptrdiff_t advance = -1;
      for (std::size_t q = 0; q < marginals; ++q) {
        if (index[q] + 1 == w[q].size()) continue;
        if (advance < 0 || remaining[q][index[q]] < remaining[advance][index[advance]]) {
          advance = static_cast<std::ptrdiff_t>(q);
        }
      }
      if (advance < 0) break;
      remaining[advance][index[advance]] = 0.0;
      ++index[advance];
    }
  }

  const double tol = reduced_cost_tolerance(max_cost);
  std::vector<bool> is_basic(cells, false);
  for (std::size_t b : basis) is_basic[b] = true;
  Eigen::VectorXd x_basic;
  Eigen::VectorXd duals;
  int pivots = 0;
  while (true) {
    Eigen::MatrixXd basis_matrix(row_count, row_count);
    Eigen::VectorXd basis_cost(row_count);
    for (std::size_t k = 0; k < row_count; ++k) {
      basis_matrix.col(static_cast<Eigen::Index>(k)) = column(basis[k]);
      basis_cost(static_cast<Eigen::Index>(k)) = cost.values[basis[k]];
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix);
    x_basic = lu.solve(rhs);
    duals = basis_matrix.transpose().partialPivLu().solve(basis_cost);

    std::ptrdiff_t entering = -1;
    std::vector<std::size_t> index(marginals, 0);
    for (std::size_t flat = 0; flat < cells; ++flat) {
      if (!is_basic[flat]) {
        double reduced = cost.values[flat];
        for (std::size_t q = 0; q < marginals; ++q) {
          if (auto r = row_of(q, index[q]); r >= 0) reduced -= duals(r);
        }
        if (reduced < -tol) {
          entering = static_cast<std::ptrdiff_t>(flat);
          break;
        }
      }
      for (std::size_t q = marginals; q-- > 0;) {
        if (++index[q] < w[q].size()) break;
        index[q] = 0;
      }
    }
    if (entering < 0) break;
    if (++pivots > kMaxPivots) {
      throw ConvergenceError("multi-marginal simplex exceeded its pivot budget", 0.0, pivots);
    }

    const Eigen::VectorXd direction = lu.solve(column(static_cast<std::size_t>(entering)));
    std::ptrdiff_t leave = -1;
    double best = 0.0;
    for (std::size_t k = 0; k < row_count; ++k) {
      const double d = direction(static_cast<Eigen::Index>(k));
      if (d <= 1e-11) continue;
      const double ratio = std::max(x_basic(static_cast<Eigen::Index>(k)), 0.0) / d;
      if (leave < 0 || ratio < best - 1e-15 ||
          (ratio <= best + 1e-15 && basis[k] < basis[static_cast<std::size_t>(leave)])) {
        leave = static_cast<std::ptrdiff_t>(k);
        best = ratio;
      }
    }
    if (leave < 0) throw InvalidInput("multi-marginal problem is unbounded");
    is_basic[basis[static_cast<std::size_t>(leave)]] = false;
    basis[static_cast<std::size_t>(leave)] = static_cast<std::size_t>(entering);
    is_basic[static_cast<std::size_t>(entering)] = true;
  }

  DiscretePlan plan;
  plan.shape.resize(marginals);
  for (std::size_t q = 0; q < marginals; ++q) plan.shape[q] = w[q].size();
  std::vector<std::size_t> order(row_count);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto l, auto r) { return basis[l] < basis[r]; });
  for (std::size_t k : order) {
    const double weight = x_basic(static_cast<Eigen::Index>(k));
    if (weight <= kDropBelow) continue;
    plan.entries.push_back({unflatten(basis[k]), weight});
    plan.value += weight * cost.values[basis[k]];
  }
  plan.potentials.resize(marginals);
  for (std::size_t q = 0; q < marginals; ++q) {
    plan.potentials[q].assign(w[q].size(), 0.0);
    for (std::size_t k = 0; k < w[q].size(); ++k) {
      if (auto r = row_of(q, k); r >= 0) plan.potentials[q][k] = duals(r);
    }
  }
  plan.pivots = pivots;
  return plan;
}

DiscretePlan brute_force_transport(std::span<const double> lambda0,
                                   std::span<const double> lambda1, const Eigen::MatrixXd& cost) {
  const std::vector<double> a = validated_simplex(lambda0);
  const std::vector<double> b = validated_simplex(lambda1);
  const std::size_t rows = a.size();
  const std::size_t cols = b.size();
  if (rows > 4 || cols > 4) throw CapacityError("brute-force transport is limited to 4x4");
  validate_cost(cost, rows, cols);

  const std::size_t cells = rows * cols;
  const std::size_t tree_size = rows + cols - 1;
  double best_value = 0.0;
  Eigen::MatrixXd best_flow;

  // Enumerate every subset of tree_size cells via a selection mask.
  std::vector<bool> mask(cells, false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(tree_size), true);
  do {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t c = 0; c < cells; ++c) {
      if (mask[c]) edges.emplace_back(c / cols, c % cols);
    }
    // Spanning tree check by union-find.
    std::vector<std::size_t> root(rows + cols);
    std::iota(root.begin(), root.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t n) {
      return root[n] == n ? n : root[n] = find(root[n]);
    };
    bool acyclic = true;
    for (const auto& [i, j] : edges) {
      const std::size_t ri = find(i);
      const std::size_t rj = find(rows + j);
      if (ri == rj) {
        acyclic = false;
        break;
      }
      root[ri] = rj;
    }
    if (!acyclic) continue;

    // Leaf elimination determines the unique flow on the tree.
    std::vector<double> supply(rows + cols);
    for (std::size_t i = 0; i < rows; ++i) supply[i] = a[i];
    for (std::size_t j = 0; j < cols; ++j) supply[rows + j] = b[j];
    std::vector<bool> used(edges.size(), false);
    Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(rows, cols);
    bool feasible = true;
    for (std::size_t step = 0; step < edges.size(); ++step) {
      std::vector<int> degree(rows + cols, 0);
      for (std::size_t e = 0; e < edges.size(); ++e) {
        if (used[e]) continue;
        ++degree[edges[e].first];
        ++degree[rows + edges[e].second];
      }
      for (std::size_t e = 0; e < edges.size(); ++e) {
        if (used[e]) continue;
        const auto [i, j] = edges[e];
        const std::size_t leaf = degree[i] == 1 ? i : (degree[rows + j] == 1 ? rows + j : SIZE_MAX);
        if (leaf == SIZE_MAX) continue;
        const std::size_t other = leaf == i ? rows + j : i;
        const double x = supply[leaf];
        flow(i, j) = x;
        supply[leaf] = 0.0;
        supply[other] -= x;
        used[e] = true;
        if (x < -1e-12) feasible = false;
        break;
      }
    }
    if (!feasible) continue;
    flow = flow.cwiseMax(0.0);
    const double value = (flow.array() * cost.array()).sum();
    if (best_flow.size() == 0 || value < best_value) {
      best_value = value;
      best_flow = flow;
    }
  } while (std::prev_permutation(mask.begin(), mask.end()));

  DiscretePlan plan = two_marginal_plan(best_flow, cost);
  return plan;
}

}  // namespace mixot
