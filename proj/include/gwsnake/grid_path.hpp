#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "gwsnake/errors.hpp"

namespace gwsnake {

// Piecewise-linear function on [0,1] given by values at i/segments.
// Evaluation snaps arguments that are within a few ulp of a grid point so
// that f(i/n) returns values[i] itself, not an interpolated neighbour.
class GridPath {
 public:
  explicit GridPath(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw InvalidWindow("grid path needs at least one value");
  }

  std::size_t size() const { return values_.size(); }
  std::size_t segment_count() const { return values_.size() - 1; }
  const std::vector<double>& values() const { return values_; }
  double at_index(std::size_t i) const { return values_[i]; }

  double operator()(double s) const {
    std::size_t segs = segment_count();
    if (segs == 0) return values_[0];
    if (s <= 0.0) return values_.front();
    if (s >= 1.0) return values_.back();
    double pos = s * static_cast<double>(segs);
    double nearest = std::round(pos);
    double tol = 8.0 * std::numeric_limits<double>::epsilon() *
                 std::max(1.0, std::abs(pos));
    if (std::abs(pos - nearest) <= tol && nearest >= 0.0 &&
        nearest <= static_cast<double>(segs)) {
      return values_[static_cast<std::size_t>(nearest)];
    }
    auto i = static_cast<std::size_t>(pos);
    if (i >= segs) i = segs - 1;
    double frac = pos - static_cast<double>(i);
    return values_[i] + frac * (values_[i + 1] - values_[i]);
  }

  // Minimum of the path over [min(s,t), max(s,t)].  Only grid values and the
  // two boundary evaluations can realise the minimum of a piecewise-linear
  // function, so scan those.
  double min_between(double s, double t) const {
    if (s > t) std::swap(s, t);
    double lo = (*this)(s);
    double hi = (*this)(t);
    double best = std::min(lo, hi);
    std::size_t segs = segment_count();
    if (segs == 0) return best;
    double first_idx = std::ceil(s * static_cast<double>(segs));
    double last_idx = std::floor(t * static_cast<double>(segs));
    for (double d = first_idx; d <= last_idx; d += 1.0) {
      auto i = static_cast<std::size_t>(d);
      if (i < values_.size()) best = std::min(best, values_[i]);
    }
    return best;
  }

 private:
  std::vector<double> values_;
};

}  // namespace gwsnake
