#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gwsnake/errors.hpp"
#include "gwsnake/grid_path.hpp"
#include "gwsnake/lineage.hpp"
#include "gwsnake/offspring.hpp"
#include "gwsnake/random.hpp"
#include "gwsnake/tree.hpp"

namespace gwsnake {

// Joint law of the k sibling displacements for one arity: either a finite
// atom list or independent per-coordinate Gaussians with declared moments.
struct ArityLaw {
  struct Atom {
    std::vector<double> values;
    double prob = 0.0;
  };
  int arity = 0;
  std::vector<Atom> atoms;          // finite support when nonempty
  std::vector<double> gauss_means;  // parametric otherwise
  std::vector<double> gauss_sds;

  bool is_atomic() const { return !atoms.empty(); }

  double mean(int j) const {
    if (is_atomic()) {
      double m = 0.0;
      for (const auto& a : atoms) m += a.prob * a.values[j - 1];
      return m;
    }
    return gauss_means[j - 1];
  }

  double second_moment(int j) const {
    if (is_atomic()) {
      double m2 = 0.0;
      for (const auto& a : atoms)
        m2 += a.prob * a.values[j - 1] * a.values[j - 1];
      return m2;
    }
    double mu = gauss_means[j - 1], sd = gauss_sds[j - 1];
    return sd * sd + mu * mu;
  }
};

struct H2Report {
  bool passes = false;
  bool centered = false;       // global mean zero
  bool positive = false;       // global second moment positive and finite
  bool moments_declared = false;
  double global_mean = 0.0;
  double global_var = 0.0;
  std::vector<std::string> issues;
};

class DisplacementFamily {
 public:
  DisplacementFamily() = default;

  void set_atoms(int arity, std::vector<ArityLaw::Atom> atoms) {
    ArityLaw law;
    law.arity = arity;
    double total = 0.0;
    for (const auto& a : atoms) {
      if (static_cast<int>(a.values.size()) != arity)
        throw DimensionMismatch("atom has wrong dimension for arity " +
                                std::to_string(arity));
      if (a.prob < 0.0) throw InvalidDistribution("negative atom probability");
      total += a.prob;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw InvalidDistribution("atom probabilities sum to " +
                                std::to_string(total));
    law.atoms = std::move(atoms);
    laws_[arity] = std::move(law);
  }

  void set_gaussian(int arity, std::vector<double> means,
                    std::vector<double> sds) {
    if (static_cast<int>(means.size()) != arity ||
        static_cast<int>(sds.size()) != arity)
      throw DimensionMismatch("gaussian parameters have wrong dimension");
    ArityLaw law;
    law.arity = arity;
    law.gauss_means = std::move(means);
    law.gauss_sds = std::move(sds);
    laws_[arity] = std::move(law);
  }

  bool has(int arity) const { return laws_.count(arity) != 0; }

  const ArityLaw& law(int arity) const {
    auto it = laws_.find(arity);
    if (it == laws_.end())
      throw MissingArity("no displacement law for arity " +
                         std::to_string(arity));
    return it->second;
  }

  double mean(int k, int j) const { return law(k).mean(j); }

  void draw(int arity, RandomStream& rng, std::vector<double>& out) const {
    const ArityLaw& l = law(arity);
    out.resize(arity);
    if (l.is_atomic()) {
      double u = rng.uniform01();
      double acc = 0.0;
      const ArityLaw::Atom* chosen = &l.atoms.back();
      for (const auto& a : l.atoms) {
        acc += a.prob;
        if (u < acc) {
          chosen = &a;
          break;
        }
      }
      std::copy(chosen->values.begin(), chosen->values.end(), out.begin());
      return;
    }
    for (int j = 0; j < arity; ++j)
      out[j] = l.gauss_means[j] + l.gauss_sds[j] * rng.normal();
  }

  // JSON: {"2": {"atoms":[{"values":[1,-1],"prob":1}]},
  //        "3": {"gaussian":{"means":[0,0,0],"sds":[1,1,1]}}}
  static DisplacementFamily from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("displacement JSON must be a map");
    DisplacementFamily fam;
    for (auto it = j.begin(); it != j.end(); ++it) {
      int arity = 0;
      try {
        arity = std::stoi(it.key());
      } catch (...) {
        throw ParseError("arity key '" + it.key() + "' is not an integer");
      }
      if (arity < 1) throw ParseError("arity must be positive");
      const auto& spec = it.value();
      if (spec.contains("atoms")) {
        std::vector<ArityLaw::Atom> atoms;
        for (const auto& aj : spec["atoms"]) {
          ArityLaw::Atom atom;
          atom.prob = aj.at("prob").get<double>();
          for (const auto& v : aj.at("values"))
            atom.values.push_back(v.get<double>());
          atoms.push_back(std::move(atom));
        }
        fam.set_atoms(arity, std::move(atoms));
      } else if (spec.contains("gaussian")) {
        const auto& g = spec["gaussian"];
        std::vector<double> means, sds;
        for (const auto& v : g.at("means")) means.push_back(v.get<double>());
        for (const auto& v : g.at("sds")) sds.push_back(v.get<double>());
        fam.set_gaussian(arity, std::move(means), std::move(sds));
      } else {
        throw ParseError("arity " + std::to_string(arity) +
                         " has neither atoms nor gaussian");
      }
    }
    return fam;
  }

  nlohmann::json to_json() const {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [arity, law] : laws_) {
      nlohmann::json spec;
      if (law.is_atomic()) {
        nlohmann::json atoms = nlohmann::json::array();
        for (const auto& a : law.atoms)
          atoms.push_back({{"values", a.values}, {"prob", a.prob}});
        spec["atoms"] = std::move(atoms);
      } else {
        spec["gaussian"] = {{"means", law.gauss_means},
                            {"sds", law.gauss_sds}};
      }
      out[std::to_string(arity)] = std::move(spec);
    }
    return out;
  }

 private:
  std::map<int, ArityLaw> laws_;
};

// (global mean, global second moment) weighted by the offspring law.
inline std::pair<double, double> global_moments(
    const DisplacementFamily& family, const OffspringDistribution& mu) {
  double m = 0.0, beta2 = 0.0;
  for (int k = 1; k <= mu.max_children(); ++k) {
    double p = mu.prob(k);
    if (p == 0.0) continue;
    const ArityLaw& law = family.law(k);
    for (int j = 1; j <= k; ++j) {
      m += p * law.mean(j);
      beta2 += p * law.second_moment(j);
    }
  }
  return {m, beta2};
}

inline H2Report validate_h2(const DisplacementFamily& family,
                            const OffspringDistribution& mu) {
  H2Report r;
  auto [m, beta2] = global_moments(family, mu);
  r.global_mean = m;
  r.global_var = beta2;
  r.centered = std::abs(m) <= 1e-9;
  if (!r.centered)
    r.issues.push_back("global mean " + std::to_string(m) + " is not zero");
  r.positive = beta2 > 0.0 && std::isfinite(beta2);
  if (!r.positive) r.issues.push_back("global variance must be positive");
  // Finite-atom laws have all moments; Gaussian coordinates likewise.  Any
  // law representable here declares the >4 moment structurally.
  r.moments_declared = true;
  r.passes = r.centered && r.positive && r.moments_declared;
  return r;
}

// Tree plus node labels; the raw displacement of every non-root node is kept
// so the label decomposition can be replayed on the same randomness.
struct LabeledTree {
  PlanarTree tree;
  std::vector<double> labels;         // label of u(l), root 0
  std::vector<double> displacements;  // entry v: label(v) - label(parent(v))

  nlohmann::json to_json() const {
    nlohmann::json j = tree.to_json();
    j["labels"] = labels;
    return j;
  }
};

inline LabeledTree assign_labels(const PlanarTree& tree,
                                 const DisplacementFamily& family,
                                 RandomStream& rng) {
  std::size_t count = tree.node_count();
  LabeledTree lt{tree, std::vector<double>(count, 0.0),
                 std::vector<double>(count, 0.0)};
  std::vector<double> draw;
  for (std::size_t v = 0; v < count; ++v) {
    int deg = tree.degree(v);
    if (deg == 0) continue;
    family.draw(deg, rng, draw);
    for (int j = 1; j <= deg; ++j) {
      std::size_t c = tree.child(v, j);
      lt.displacements[c] = draw[j - 1];
      lt.labels[c] = lt.labels[v] + draw[j - 1];
    }
  }
  return lt;
}

// r_n: label of u(ns) divided by n^{1/4}, on the DFS grid.
inline GridPath label_process(const LabeledTree& lt) {
  std::size_t n = lt.tree.edge_count();
  if (n == 0) throw DegenerateTree("no edges to rescale");
  double scale = std::pow(static_cast<double>(n), -0.25);
  std::vector<double> vals(lt.labels.size());
  for (std::size_t v = 0; v < vals.size(); ++v)
    vals[v] = lt.labels[v] * scale;
  return GridPath(std::move(vals));
}

// Contour variant: label along the walk-around traversal, 2n+1 values.
inline GridPath contour_label_process(const LabeledTree& lt) {
  std::size_t n = lt.tree.edge_count();
  if (n == 0) throw DegenerateTree("no edges to rescale");
  double scale = std::pow(static_cast<double>(n), -0.25);
  auto walk = lt.tree.contour_nodes();
  std::vector<double> vals(walk.size());
  for (std::size_t i = 0; i < walk.size(); ++i)
    vals[i] = lt.labels[walk[i]] * scale;
  return GridPath(std::move(vals));
}

// Splits r_n into the part carried by the centered displacements (r1) and
// the part carried by the lineage against the per-coordinate means (r2):
//   r1(l) = n^{-1/4} * sum over ancestors of (Y - m_{k,j})
//   r2(l) = n^{-1/4} * sum over cells of (A_{u(l),k,j} - mu_k|u(l)|) m_{k,j}
// For a globally centered family these add back to r_n pathwise.
inline std::pair<GridPath, GridPath> decompose(
    const LabeledTree& lt, const LineageTable& table,
    const DisplacementFamily& family, const OffspringDistribution& mu) {
  auto [m, beta2] = global_moments(family, mu);
  (void)beta2;
  if (std::abs(m) > 1e-9)
    throw NotCentered("global mean " + std::to_string(m));
  std::size_t count = lt.tree.node_count();
  std::size_t n = lt.tree.edge_count();
  if (n == 0) throw DegenerateTree("no edges to rescale");
  if (table.depth.size() != count)
    throw DimensionMismatch("lineage table does not match the tree");
  double scale = std::pow(static_cast<double>(n), -0.25);

  std::vector<double> mean_by_cell(table.cells, 0.0);
  for (int k = 1; k <= table.K; ++k) {
    if (!family.has(k)) continue;
    for (int j = 1; j <= k; ++j)
      mean_by_cell[IndexSetIK::flat_index(k, j)] = family.mean(k, j);
  }

  std::vector<double> r1(count, 0.0), r2(count, 0.0);
  std::vector<double> centered(count, 0.0);
  for (std::size_t v = 1; v < count; ++v) {
    auto p = static_cast<std::size_t>(lt.tree.parent(v));
    std::size_t cell = IndexSetIK::flat_index(
        lt.tree.degree(p), lt.tree.child_rank(v));
    centered[v] = centered[p] + (lt.displacements[v] - mean_by_cell[cell]);
  }
  for (std::size_t v = 0; v < count; ++v) {
    r1[v] = centered[v] * scale;
    double dot = 0.0;
    for (std::size_t c = 0; c < table.cells; ++c)
      dot += table.flat[v * table.cells + c] * mean_by_cell[c];
    r2[v] = (dot - m * table.depth[v]) * scale;
  }
  return {GridPath(std::move(r1)), GridPath(std::move(r2))};
}

}  // namespace gwsnake
