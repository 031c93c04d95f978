#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gwsnake/errors.hpp"
#include "gwsnake/lineage.hpp"
#include "gwsnake/multinomial.hpp"
#include "gwsnake/offspring.hpp"
#include "gwsnake/rational.hpp"
#include "gwsnake/sampler.hpp"
#include "gwsnake/tree.hpp"

namespace gwsnake {

struct WeightedTree {
  PlanarTree tree;
  Rat weight;
};

// Every valid degree sequence of length n+1, by backtracking with
// partial-sum pruning; weight of a tree is the product of its child-count
// probabilities, so the weights sum to P(|T| = n+1).
inline std::vector<WeightedTree> enumerate_trees(
    const OffspringDistribution& mu, int n, int max_edges = 10) {
  if (n > max_edges || mu.max_children() > 4)
    throw CapExceeded("enumeration capped at 10 edges and 4 children");
  if (!mu.is_exact())
    throw InvalidDistribution("enumeration needs exact weights");
  std::vector<WeightedTree> out;
  std::vector<int> degrees(static_cast<std::size_t>(n) + 1, 0);
  const int kmax = mu.max_children();
  auto rec = [&](auto&& self, int pos, long long walk, Rat weight) -> void {
    if (pos == n + 1) {
      if (walk == -1) out.push_back({PlanarTree::from_degrees(degrees), weight});
      return;
    }
    int left = n - pos;  // slots after this one
    for (int c = 0; c <= kmax; ++c) {
      Rat p = mu.exact_prob(c);
      if (p == 0) continue;
      long long w = walk + c - 1;
      bool last = pos == n;
      if (!last && w < 0) continue;
      if (w - left > -1) continue;
      if (w + static_cast<long long>(left) * (kmax - 1) < -1) continue;
      degrees[pos] = c;
      self(self, pos + 1, w, weight * p);
    }
    degrees[pos] = 0;
  };
  rec(rec, 0, 0, Rat(1));
  return out;
}

// Lineage of u(m) normalized to the index set of mu.
inline ContentVector lineage_content(const PlanarTree& tree, std::size_t m,
                                     int kmax) {
  ContentVector a(kmax);
  std::size_t cur = m;
  while (tree.parent(cur) >= 0) {
    auto p = static_cast<std::size_t>(tree.parent(cur));
    ++a.ref(tree.degree(p), tree.child_rank(cur));
    cur = p;
  }
  return a;
}

// P(A_{u(m)} = a | the tree has n+1 nodes), by enumeration.
inline std::map<ContentVector, Rat> exact_lineage_law(
    const OffspringDistribution& mu, int n, int m) {
  if (m < 0 || m > n) throw InvalidArgs("node rank outside the tree");
  auto trees = enumerate_trees(mu, n);
  Rat total(0);
  std::map<ContentVector, Rat> law;
  for (const auto& wt : trees) {
    total += wt.weight;
    law[lineage_content(wt.tree, static_cast<std::size_t>(m),
                        mu.max_children())] += wt.weight;
  }
  if (total == 0) return {};
  for (auto& [a, p] : law) p /= total;
  return law;
}

inline std::map<int, Rat> exact_depth_law(const OffspringDistribution& mu,
                                          int n, int m) {
  if (m < 0 || m > n) throw InvalidArgs("node rank outside the tree");
  auto trees = enumerate_trees(mu, n);
  Rat total(0);
  std::map<int, Rat> law;
  for (const auto& wt : trees) {
    total += wt.weight;
    law[wt.tree.depth(static_cast<std::size_t>(m))] += wt.weight;
  }
  if (total == 0) return {};
  for (auto& [h, p] : law) p /= total;
  return law;
}

inline Rat forest_prob_with_empty(const OffspringDistribution& mu,
                                  long long roots, long long nodes) {
  if (roots == 0) return nodes == 0 ? Rat(1) : Rat(0);
  if (nodes < roots) return Rat(0);
  return forest_size_prob_exact(mu, static_cast<int>(roots), nodes);
}

// One-point lineage decomposition: the probability that u(m) has lineage a
// factors into the multinomial weight of a, the sizes of the two forests
// hanging left and right of the ancestral line, and the total-size
// normalizer, which must be P(|T| = n+1) for the identity to hold.
inline Rat lineage_law_closed_form(const OffspringDistribution& mu, int n,
                                   int m, const ContentVector& a) {
  long long h = a.total();
  if (m < 0 || m > n || h > m) throw InvalidArgs("need lineage size <= m <= n");
  IndexSetIK ik(mu);
  Rat q = q_h_pmf_exact(ik, a);
  if (q == 0) return Rat(0);
  auto [x1, x2] = n1_n2(a);
  Rat left = forest_prob_with_empty(mu, x1, m - h);
  Rat right = forest_prob_with_empty(mu, 1 + x2, n + 1 - m);
  Rat denom = tree_size_prob_exact(mu, n + 1);
  if (denom == 0) throw InvalidArgs("no trees of this size");
  return q * left * right / denom;
}

struct OracleCheck {
  std::string name;
  int n = 0;
  int m = -1;  // -1 when the check is not tied to one node rank
  bool pass = false;
  std::string detail;
};

struct OracleReport {
  std::vector<OracleCheck> checks;
  long long violations = 0;

  bool all_pass() const { return violations == 0; }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : checks) {
      nlohmann::json row{{"name", c.name},
                         {"n", c.n},
                         {"status", c.pass ? "pass" : "fail"},
                         {"detail", c.detail}};
      if (c.m >= 0)
        row["m"] = c.m;
      else
        row["m"] = nullptr;
      arr.push_back(std::move(row));
    }
    return nlohmann::json{{"checks", std::move(arr)}};
  }
};

namespace detail {

inline void check_one_rank(const OffspringDistribution& mu, int n, int m,
                           const std::vector<WeightedTree>& trees,
                           const Rat& total, OracleReport& report) {
  IndexSetIK ik(mu);
  std::map<ContentVector, Rat> oracle_law;
  std::map<int, Rat> oracle_depth;
  for (const auto& wt : trees) {
    oracle_law[lineage_content(wt.tree, static_cast<std::size_t>(m),
                               mu.max_children())] += wt.weight;
    oracle_depth[wt.tree.depth(static_cast<std::size_t>(m))] += wt.weight;
  }
  for (auto& [a, p] : oracle_law) p /= total;
  for (auto& [h, p] : oracle_depth) p /= total;

  // Formula side over every content vector with total <= m.
  std::map<ContentVector, Rat> formula_law;
  std::map<int, Rat> formula_depth;
  std::map<int, std::vector<std::pair<ContentVector, Rat>>> by_h;
  for (int h = 0; h <= m; ++h) {
    for (const auto& a : enumerate_contents(ik, h)) {
      Rat rhs = lineage_law_closed_form(mu, n, m, a);
      by_h[h].push_back({a, rhs});
      if (rhs != 0) {
        formula_law[a] = rhs;
        formula_depth[h] += rhs;
      }
    }
  }

  OracleCheck law_check{"lineage_law_vs_decomposition", n, m, true, ""};
  if (oracle_law != formula_law) {
    law_check.pass = false;
    law_check.detail = "enumerated lineage law differs from the product formula";
    for (const auto& [a, p] : oracle_law) {
      auto it = formula_law.find(a);
      Rat other = it == formula_law.end() ? Rat(0) : it->second;
      if (other != p) {
        law_check.detail += "; a=" + a.to_json().dump() + " enum=" +
                            to_string(p) + " formula=" + to_string(other);
        break;
      }
    }
    ++report.violations;
  }
  report.checks.push_back(std::move(law_check));

  OracleCheck depth_check{"depth_law_vs_summed_decomposition", n, m, true, ""};
  std::map<int, Rat> oracle_depth_nonzero;
  for (const auto& [h, p] : oracle_depth)
    if (p != 0) oracle_depth_nonzero[h] = p;
  if (oracle_depth_nonzero != formula_depth) {
    depth_check.pass = false;
    depth_check.detail = "depth law differs from the summed formula";
    ++report.violations;
  }
  report.checks.push_back(std::move(depth_check));

  // Ratio identity: P(lineage = a) / (P(depth = h) Q_h(a)) must equal the
  // forest-probability ratio with the multinomial mixture in the
  // denominator.  Cross-multiplied to stay division-free.
  bool ratio_ok = true;
  std::string ratio_detail;
  for (const auto& [h, entries] : by_h) {
    Rat mixture(0);
    for (const auto& [a, rhs] : entries) {
      auto [x1, x2] = n1_n2(a);
      mixture += q_h_pmf_exact(ik, a) * forest_prob_with_empty(mu, x1, m - h) *
                 forest_prob_with_empty(mu, 1 + x2, n + 1 - m);
    }
    auto depth_it = oracle_depth.find(h);
    Rat depth_prob = depth_it == oracle_depth.end() ? Rat(0) : depth_it->second;
    for (const auto& [a, rhs] : entries) {
      auto law_it = oracle_law.find(a);
      Rat lineage_prob = law_it == oracle_law.end() ? Rat(0) : law_it->second;
      auto [x1, x2] = n1_n2(a);
      Rat fprod = forest_prob_with_empty(mu, x1, m - h) *
                  forest_prob_with_empty(mu, 1 + x2, n + 1 - m);
      Rat lhs = lineage_prob * mixture;
      Rat rhs_cross = fprod * depth_prob * q_h_pmf_exact(ik, a);
      if (lhs != rhs_cross) {
        ratio_ok = false;
        ratio_detail = "ratio identity fails at h=" + std::to_string(h) +
                       " a=" + a.to_json().dump();
        break;
      }
    }
    if (!ratio_ok) break;
  }
  OracleCheck ratio_check{"comparison_ratio_identity", n, m, ratio_ok,
                          ratio_detail};
  if (!ratio_ok) ++report.violations;
  report.checks.push_back(std::move(ratio_check));
}

}  // namespace detail

// The exact finite-size identity suite.  Every check is exact rational
// arithmetic; any inequality is a violation.
inline OracleReport verify_identities(const OffspringDistribution& mu,
                                      int n_max) {
  OracleReport report;
  std::vector<Rat> tree_totals(static_cast<std::size_t>(n_max) + 2, Rat(0));
  std::vector<std::vector<WeightedTree>> by_edges(
      static_cast<std::size_t>(n_max) + 1);
  for (int n = 0; n <= n_max; ++n) {
    by_edges[n] = enumerate_trees(mu, n);
    Rat total(0);
    for (const auto& wt : by_edges[n]) total += wt.weight;
    tree_totals[n + 1] = total;  // indexed by node count
  }

  // Enumeration totals against the walk formula, then forests of up to four
  // trees against composition sums over enumerated tree totals.
  for (int k = 1; k <= 4; ++k) {
    bool ok = true;
    std::string detail;
    for (int r = k; r <= n_max + 1; ++r) {
      Rat direct(0);
      auto rec = [&](auto&& self, int parts, int remaining, Rat acc) -> void {
        if (parts == 1) {
          if (remaining >= 1) direct += acc * tree_totals[remaining];
          return;
        }
        for (int first = 1; first + parts - 1 <= remaining; ++first)
          self(self, parts - 1, remaining - first,
               acc * tree_totals[first]);
      };
      rec(rec, k, r, Rat(1));
      Rat formula = forest_size_prob_exact(mu, k, r);
      if (direct != formula) {
        ok = false;
        detail = "forest of " + std::to_string(k) + " trees, " +
                 std::to_string(r) + " nodes: composition sum " +
                 to_string(direct) + " vs walk formula " + to_string(formula);
        break;
      }
    }
    OracleCheck check{"forest_size_vs_walk_formula", k, -1, ok, detail};
    if (!ok) ++report.violations;
    report.checks.push_back(std::move(check));
  }

  for (int n = 1; n <= n_max; ++n) {
    if (tree_totals[n + 1] == 0) continue;
    for (int m = 0; m <= n; ++m)
      detail::check_one_rank(mu, n, m, by_edges[n], tree_totals[n + 1],
                             report);
  }

  // Law equality of the left and right subtree counts under the multinomial.
  IndexSetIK ik(mu);
  for (int h = 0; h <= 12; ++h) {
    auto left = exact_n_law(ik, h, 1);
    auto right = exact_n_law(ik, h, 2);
    bool ok = left == right;
    OracleCheck check{"subtree_count_symmetry", h, -1, ok,
                      ok ? "" : "left/right subtree count laws differ"};
    if (!ok) ++report.violations;
    report.checks.push_back(std::move(check));
  }
  return report;
}

}  // namespace gwsnake
