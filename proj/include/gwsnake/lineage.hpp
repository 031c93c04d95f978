#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "gwsnake/errors.hpp"
#include "gwsnake/grid_path.hpp"
#include "gwsnake/multinomial.hpp"
#include "gwsnake/offspring.hpp"
#include "gwsnake/tree.hpp"

namespace gwsnake {

// Per-node ancestry counts: entry (k,j) of row l is the number of strict
// ancestors of u(l) with k children such that u(l) sits in the subtree of
// their j-th child.
struct LineageTable {
  int K = 0;
  std::size_t cells = 0;
  std::vector<int> flat;  // node-major, cells per node
  std::vector<int> depth;

  int at(std::size_t node, int k, int j) const {
    return flat[node * cells + IndexSetIK::flat_index(k, j)];
  }
  ContentVector row(std::size_t node) const {
    ContentVector a(K);
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(node * cells),
                cells, a.counts.begin());
    return a;
  }
};

// One depth-first pass with an explicit ancestor stack of (k, j) cells; the
// running count vector is updated incrementally on push and pop.
inline LineageTable compute_lineage(const PlanarTree& tree) {
  int kmax = 0;
  for (std::size_t v = 0; v < tree.node_count(); ++v)
    kmax = std::max(kmax, tree.degree(v));
  kmax = std::max(kmax, 1);
  LineageTable table;
  table.K = kmax;
  table.cells = static_cast<std::size_t>(kmax) * (kmax + 1) / 2;
  table.flat.assign(tree.node_count() * table.cells, 0);
  table.depth.assign(tree.node_count(), 0);
  std::vector<int> running(table.cells, 0);
  std::vector<std::size_t> cell_stack;
  // Nodes arrive in DFS order, so the current ancestor stack is maintained
  // by comparing depths: going from u(l) to u(l+1) pops to depth(u(l+1))-1
  // and pushes the edge into u(l+1).
  for (std::size_t v = 0; v < tree.node_count(); ++v) {
    int d = tree.depth(v);
    table.depth[v] = d;
    while (static_cast<int>(cell_stack.size()) > d - 1 && !cell_stack.empty()) {
      --running[cell_stack.back()];
      cell_stack.pop_back();
    }
    if (v != 0) {
      std::size_t cell = IndexSetIK::flat_index(
          tree.degree(static_cast<std::size_t>(tree.parent(v))),
          tree.child_rank(v));
      ++running[cell];
      cell_stack.push_back(cell);
    }
    std::copy(running.begin(), running.end(),
              table.flat.begin() + static_cast<std::ptrdiff_t>(v * table.cells));
  }
  return table;
}

// Counts restricted to the ancestors within distance `window` of u; walks
// parent pointers, so one call costs O(window).
inline ContentVector restricted_lineage(const PlanarTree& tree,
                                        std::size_t node, int window,
                                        int kmax) {
  if (window < 0 || window > tree.depth(node))
    throw InvalidWindow("window must lie in [0, depth]");
  ContentVector a(kmax);
  std::size_t cur = node;
  for (int step = 0; step < window; ++step) {
    auto p = static_cast<std::size_t>(tree.parent(cur));
    ++a.ref(tree.degree(p), tree.child_rank(cur));
    cur = p;
  }
  return a;
}

// Centered lineage processes on the DFS grid: cell (k,j) has grid values
// (A_{u(l),k,j} - mu_k |u(l)|) / n^{1/4} at l/n, linearly interpolated.
inline std::vector<GridPath> g_process(const PlanarTree& tree,
                                       const LineageTable& table,
                                       const OffspringDistribution& mu) {
  if (table.depth.size() != tree.node_count())
    throw DimensionMismatch("lineage table does not match the tree");
  if (mu.max_children() < table.K)
    throw DimensionMismatch("offspring bound below observed degrees");
  std::size_t n = tree.edge_count();
  if (n == 0) throw DegenerateTree("no edges to rescale");
  double scale = std::pow(static_cast<double>(n), -0.25);
  IndexSetIK ik(mu);
  std::vector<GridPath> out;
  out.reserve(ik.size());
  for (std::size_t i = 0; i < ik.size(); ++i) {
    auto [k, j] = ik.cell(i);
    std::vector<double> vals(tree.node_count());
    for (std::size_t v = 0; v < tree.node_count(); ++v) {
      double centered =
          (k <= table.K ? table.at(v, k, j) : 0) - mu.prob(k) * table.depth[v];
      vals[v] = centered * scale;
    }
    out.emplace_back(std::move(vals));
  }
  return out;
}

struct PathStatistics {
  int max_increment = 0;   // max |depth(u(l+1)) - depth(u(l))|
  int last_depth = 0;      // depth of the final DFS node
  double window_ratio = 0; // max |A_{u,l,k,j} - mu_k l| / sqrt(l log n)
};

// The window-ratio scan is exhaustive for small trees; above 2000 nodes it
// subsamples deterministically (every ceil(n/1000)-th node, dyadic windows)
// to stay near-linear.
inline PathStatistics path_statistics(const PlanarTree& tree,
                                      const OffspringDistribution& mu) {
  PathStatistics st;
  std::size_t count = tree.node_count();
  st.last_depth = tree.depth(count - 1);
  for (std::size_t v = 0; v + 1 < count; ++v)
    st.max_increment = std::max(
        st.max_increment, std::abs(tree.depth(v + 1) - tree.depth(v)));
  double logn = std::log(static_cast<double>(count));
  if (logn <= 0.0) return st;
  std::size_t node_step =
      count > 2000 ? (count + 999) / 1000 : static_cast<std::size_t>(1);
  bool dyadic_only = count > 2000;
  int kmax = std::max(mu.max_children(), 1);
  std::vector<int> acc(static_cast<std::size_t>(kmax) * (kmax + 1) / 2);
  for (std::size_t v = 0; v < count; v += node_step) {
    std::fill(acc.begin(), acc.end(), 0);
    int depth = tree.depth(v);
    std::size_t cur = v;
    int next_dyadic = 1;
    for (int l = 1; l <= depth; ++l) {
      auto p = static_cast<std::size_t>(tree.parent(cur));
      int deg = tree.degree(p);
      if (deg <= kmax) ++acc[IndexSetIK::flat_index(deg, tree.child_rank(cur))];
      cur = p;
      bool evaluate = !dyadic_only || l == next_dyadic || l == depth;
      if (evaluate) {
        double denom = std::sqrt(static_cast<double>(l) * logn);
        for (int k = 1; k <= kmax; ++k) {
          double expect = mu.prob(k) * l;
          for (int j = 1; j <= k; ++j) {
            double dev =
                std::abs(acc[IndexSetIK::flat_index(k, j)] - expect) / denom;
            st.window_ratio = std::max(st.window_ratio, dev);
          }
        }
        if (l == next_dyadic) next_dyadic *= 2;
      }
    }
  }
  return st;
}

}  // namespace gwsnake
