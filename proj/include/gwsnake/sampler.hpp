#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gwsnake/errors.hpp"
#include "gwsnake/offspring.hpp"
#include "gwsnake/random.hpp"
#include "gwsnake/rational.hpp"
#include "gwsnake/tree.hpp"

namespace gwsnake {

// Unconditioned tree: emit child counts along the depth-first walk until the
// open-node counter hits zero.  Returns nothing if the tree would exceed
// max_nodes (critical trees have infinite expected size, so a cap is the
// only way to keep this total).
inline std::optional<PlanarTree> sample_gw(const OffspringDistribution& mu,
                                           RandomStream& rng,
                                           std::size_t max_nodes = 10'000'000) {
  std::vector<int> degrees;
  long long open = 1;
  while (open > 0) {
    if (degrees.size() >= max_nodes) return std::nullopt;
    int x = mu.sample(rng);
    degrees.push_back(x);
    open += x - 1;
  }
  return PlanarTree::from_degrees(std::move(degrees));
}

// Checks that a tree with `edges` edges has positive probability: the edge
// count must be a nonnegative integer combination of the support above zero.
// Beyond max_children^2 (after dividing out the span) every multiple of the
// span is representable, so the dynamic program only runs on small targets.
inline bool size_is_feasible(const OffspringDistribution& mu, long long edges) {
  if (edges == 0) return mu.prob(0) > 0.0;
  if (edges < 0) return false;
  int d = mu.span();
  if (d == 0) return false;  // only leaves: the single-vertex tree
  if (edges % d != 0) return false;
  long long target = edges / d;
  std::vector<long long> steps;
  for (int k = 1; k <= mu.max_children(); ++k)
    if (mu.prob(k) > 0.0) steps.push_back(k / d);
  long long bound = static_cast<long long>(mu.max_children() / d) *
                    (mu.max_children() / d);
  if (target > bound) return true;
  std::vector<char> reach(static_cast<std::size_t>(target) + 1, 0);
  reach[0] = 1;
  for (long long t = 1; t <= target; ++t)
    for (long long s : steps)
      if (s <= t && reach[static_cast<std::size_t>(t - s)]) {
        reach[static_cast<std::size_t>(t)] = 1;
        break;
      }
  return reach[static_cast<std::size_t>(target)] != 0;
}

struct ConditionedOptions {
  std::uint64_t max_attempts = 10'000'000;
};

// Tree conditioned to have exactly n edges (n+1 vertices).  Draws n+1 child
// counts, rejects until they sum to n, then rotates the sequence to start
// just after the first minimum of the partial sums; that rotation is the
// unique cyclic shift forming a valid depth-first degree sequence, and the
// resulting law is the conditioned one.
inline PlanarTree sample_conditioned(const OffspringDistribution& mu,
                                     std::size_t n, RandomStream& rng,
                                     const ConditionedOptions& opts = {}) {
  if (!size_is_feasible(mu, static_cast<long long>(n)))
    throw UnsupportedSize("no tree with " + std::to_string(n) +
                          " edges has positive probability");
  if (n == 0) return PlanarTree::from_degrees({0});
  const std::size_t count = n + 1;
  const long long target = static_cast<long long>(n);
  const int kmax = mu.max_children();
  std::vector<int> draws(count);
  for (std::uint64_t attempt = 0; attempt < opts.max_attempts; ++attempt) {
    long long sum = 0;
    bool ok = true;
    for (std::size_t i = 0; i < count; ++i) {
      int x = mu.sample(rng);
      draws[i] = x;
      sum += x;
      if (sum > target ||
          sum + static_cast<long long>(count - 1 - i) * kmax < target) {
        ok = false;
        break;
      }
    }
    if (!ok || sum != target) continue;
    long long walk = 0;
    long long best = 0;
    std::size_t best_pos = 0;  // rotation start: index after the first minimum
    for (std::size_t i = 0; i < count; ++i) {
      walk += draws[i] - 1;
      if (walk < best) {
        best = walk;
        best_pos = i + 1;
      }
    }
    std::vector<int> rotated(count);
    for (std::size_t i = 0; i < count; ++i)
      rotated[i] = draws[(best_pos + i) % count];
    return PlanarTree::from_degrees(std::move(rotated));
  }
  throw RejectionBudgetExceeded("no valid sample after " +
                                std::to_string(opts.max_attempts) +
                                " attempts");
}

// Distribution of the n-step walk with increments (children - 1).  Index t
// holds the probability of the value t - n, so the support is [-n, n*(K-1)].
inline std::vector<double> walk_pmf(const OffspringDistribution& mu, int n) {
  const int kmax = mu.max_children();
  std::vector<double> pmf{1.0};
  pmf.reserve(static_cast<std::size_t>(n) * kmax + 1);
  for (int step = 0; step < n; ++step) {
    std::vector<double> next(pmf.size() + kmax, 0.0);
    for (std::size_t t = 0; t < pmf.size(); ++t) {
      if (pmf[t] == 0.0) continue;
      for (int k = 0; k <= kmax; ++k) {
        double p = mu.prob(k);
        if (p > 0.0) next[t + k] += pmf[t] * p;
      }
    }
    pmf.swap(next);
  }
  return pmf;
}

inline std::vector<Rat> walk_pmf_exact(const OffspringDistribution& mu, int n) {
  const int kmax = mu.max_children();
  std::vector<Rat> pmf{Rat(1)};
  for (int step = 0; step < n; ++step) {
    std::vector<Rat> next(pmf.size() + kmax, Rat(0));
    for (std::size_t t = 0; t < pmf.size(); ++t) {
      if (pmf[t] == 0) continue;
      for (int k = 0; k <= kmax; ++k) {
        Rat p = mu.exact_prob(k);
        if (p != 0) next[t + k] += pmf[t] * p;
      }
    }
    pmf.swap(next);
  }
  return pmf;
}

// P(W_n = v) read out of a pmf vector as produced above.
template <typename T>
inline T walk_prob_at(const std::vector<T>& pmf, int n, long long v) {
  long long idx = v + n;
  if (idx < 0 || idx >= static_cast<long long>(pmf.size())) return T(0);
  return pmf[static_cast<std::size_t>(idx)];
}

// P(forest of k independent trees has n vertices total) through the walk:
// the forest has n vertices exactly when the walk first hits -k at step n,
// and that has probability (k/n) P(W_n = -k).
inline void check_forest_args(int k, long long n) {
  if (k < 1) throw InvalidArgs("need at least one root");
  if (n < k)
    throw InvalidArgs("a forest of " + std::to_string(k) +
                      " trees has at least " + std::to_string(k) +
                      " vertices");
}

inline double forest_size_prob(const OffspringDistribution& mu, int k, long long n) {
  check_forest_args(k, n);
  auto pmf = walk_pmf(mu, static_cast<int>(n));
  return static_cast<double>(k) / static_cast<double>(n) *
         walk_prob_at(pmf, static_cast<int>(n), -k);
}

inline Rat forest_size_prob_exact(const OffspringDistribution& mu, int k,
                                  long long n) {
  check_forest_args(k, n);
  auto pmf = walk_pmf_exact(mu, static_cast<int>(n));
  return Rat(k, n) * walk_prob_at(pmf, static_cast<int>(n), -k);
}

inline double tree_size_prob(const OffspringDistribution& mu, long long n) {
  return forest_size_prob(mu, 1, n);
}

inline Rat tree_size_prob_exact(const OffspringDistribution& mu, long long n) {
  return forest_size_prob_exact(mu, 1, n);
}

struct SizeAsymptoticsRow {
  long long n = 0;        // vertex count
  double prob = 0.0;      // P(|T| = n)
  double scaled = 0.0;    // n^{3/2} P(|T| = n)
  double limit = 0.0;     // span / (sigma * sqrt(2 pi))
  double ratio = 0.0;     // scaled / limit, meaningful on the feasible lattice
};

// n^{3/2} P(|T| = n) along the feasible lattice converges to
// span / (sigma * sqrt(2 pi)); the table makes the convergence inspectable.
inline std::vector<SizeAsymptoticsRow> tree_size_asymptotics(
    const OffspringDistribution& mu, const std::vector<long long>& sizes) {
  std::vector<SizeAsymptoticsRow> rows;
  rows.reserve(sizes.size());
  double sigma = std::sqrt(mu.variance());
  double limit = mu.span() / (sigma * std::sqrt(2.0 * 3.14159265358979323846));
  for (long long n : sizes) {
    SizeAsymptoticsRow row;
    row.n = n;
    row.prob = n >= 1 ? tree_size_prob(mu, n) : 0.0;
    row.scaled = std::pow(static_cast<double>(n), 1.5) * row.prob;
    row.limit = limit;
    row.ratio = row.prob > 0.0 ? row.scaled / limit : 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gwsnake
