#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gwsnake/errors.hpp"
#include "gwsnake/grid_path.hpp"

namespace gwsnake {

// Rooted ordered tree stored as the depth-first sequence of child counts.
// Node k is the k-th vertex in lexicographic (depth-first, children left to
// right) order; all per-node arrays are indexed that way.
class PlanarTree {
 public:
  static PlanarTree from_degrees(std::vector<int> degrees) {
    if (degrees.empty())
      throw LukasiewiczViolation(0, "empty degree sequence");
    long long sum = 0;
    for (std::size_t i = 0; i < degrees.size(); ++i) {
      if (degrees[i] < 0)
        throw LukasiewiczViolation(i + 1, "negative child count at node " +
                                              std::to_string(i));
      sum += degrees[i] - 1;
      bool last = (i + 1 == degrees.size());
      if (!last && sum < 0)
        throw LukasiewiczViolation(
            i + 1, "walk went negative after " + std::to_string(i + 1) +
                       " steps");
      if (last && sum != -1)
        throw LukasiewiczViolation(
            i + 1, "walk ends at " + std::to_string(sum) + ", expected -1");
    }
    return PlanarTree(std::move(degrees));
  }

  std::size_t node_count() const { return degrees_.size(); }
  std::size_t edge_count() const { return degrees_.size() - 1; }
  const std::vector<int>& degrees() const { return degrees_; }

  int degree(std::size_t v) const { return degrees_[v]; }
  int parent(std::size_t v) const { return parent_[v]; }  // -1 for the root
  int depth(std::size_t v) const { return depth_[v]; }
  // 1-based position of v among its parent's children; 0 for the root.
  int child_rank(std::size_t v) const { return child_rank_[v]; }

  std::size_t child(std::size_t v, int rank1) const {
    return children_[child_offset_[v] + static_cast<std::size_t>(rank1 - 1)];
  }

  // Depth of node k at k/n, n = edge count.
  GridPath height_process() const {
    std::vector<double> vals(node_count());
    for (std::size_t v = 0; v < node_count(); ++v)
      vals[v] = static_cast<double>(depth_[v]);
    return GridPath(std::move(vals));
  }

  // Depth of the vertex visited by the contour walk, 2n+1 values.
  GridPath contour_process() const {
    auto walk = contour_nodes();
    std::vector<double> vals(walk.size());
    for (std::size_t k = 0; k < walk.size(); ++k)
      vals[k] = static_cast<double>(depth_[walk[k]]);
    return GridPath(std::move(vals));
  }

  // Vertex visited at each step of the depth-first contour walk around the
  // tree: starts and ends at the root, 2n+1 entries.
  std::vector<std::size_t> contour_nodes() const {
    std::vector<std::size_t> out;
    out.reserve(2 * edge_count() + 1);
    struct Frame {
      std::size_t v;
      int next;
    };
    std::vector<Frame> stack;
    out.push_back(0);
    stack.push_back({0, 1});
    while (!stack.empty()) {
      Frame& top = stack.back();
      if (top.next <= degrees_[top.v]) {
        std::size_t c = child(top.v, top.next);
        ++top.next;
        out.push_back(c);
        stack.push_back({c, 1});
      } else {
        stack.pop_back();
        if (!stack.empty()) out.push_back(stack.back().v);
      }
    }
    return out;
  }

  // Height or contour values divided by sqrt(n), on the same grids.
  // Rescaling a single vertex would divide by zero, hence the guard.
  GridPath rescaled_height() const {
    require_edges();
    return scale(height_process());
  }
  GridPath rescaled_contour() const {
    require_edges();
    return scale(contour_process());
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"degrees", degrees_}};
  }

  static PlanarTree from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("degrees") || !j["degrees"].is_array())
      throw ParseError("tree JSON must be an object with a 'degrees' array");
    std::vector<int> deg;
    deg.reserve(j["degrees"].size());
    for (const auto& x : j["degrees"]) {
      if (!x.is_number_integer())
        throw ParseError("tree degrees must be integers");
      deg.push_back(x.get<int>());
    }
    return from_degrees(std::move(deg));
  }

 private:
  explicit PlanarTree(std::vector<int> degrees)
      : degrees_(std::move(degrees)) {
    std::size_t n = degrees_.size();
    parent_.assign(n, -1);
    depth_.assign(n, 0);
    child_rank_.assign(n, 0);
    child_offset_.assign(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v)
      child_offset_[v + 1] = child_offset_[v] +
                             static_cast<std::size_t>(degrees_[v]);
    children_.assign(child_offset_[n], 0);
    std::vector<std::size_t> cursor(child_offset_.begin(),
                                    child_offset_.end() - 1);
    struct Frame {
      std::size_t v;
      int remaining;
    };
    std::vector<Frame> stack;
    stack.push_back({0, degrees_[0]});
    for (std::size_t v = 1; v < n; ++v) {
      while (stack.back().remaining == 0) stack.pop_back();
      std::size_t p = stack.back().v;
      parent_[v] = static_cast<int>(p);
      depth_[v] = depth_[p] + 1;
      child_rank_[v] = degrees_[p] - stack.back().remaining + 1;
      children_[cursor[p]++] = v;
      --stack.back().remaining;
      stack.push_back({v, degrees_[v]});
    }
  }

  void require_edges() const {
    if (edge_count() == 0)
      throw DegenerateTree("single-vertex tree has no path encodings");
  }

  GridPath scale(const GridPath& p) const {
    double inv = 1.0 / std::sqrt(static_cast<double>(edge_count()));
    std::vector<double> vals = p.values();
    for (double& v : vals) v *= inv;
    return GridPath(std::move(vals));
  }

  std::vector<int> degrees_;
  std::vector<int> parent_;
  std::vector<int> depth_;
  std::vector<int> child_rank_;
  std::vector<std::size_t> child_offset_;
  std::vector<std::size_t> children_;
};

}  // namespace gwsnake
