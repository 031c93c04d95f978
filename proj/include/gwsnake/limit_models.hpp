#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gwsnake/errors.hpp"
#include "gwsnake/grid_path.hpp"
#include "gwsnake/multinomial.hpp"
#include "gwsnake/random.hpp"

namespace gwsnake {

// Discretized normalized Brownian excursion on m+1 grid points: a Brownian
// bridge from Gaussian increments, cyclically shifted at its first argmin
// (Vervaat) and lifted by the minimum.  Endpoints are exactly zero and all
// values nonnegative by construction.
inline GridPath sample_excursion(std::size_t m, RandomStream& rng) {
  if (m < 2) throw InvalidArgs("excursion grid needs at least two segments");
  std::vector<double> walk(m + 1, 0.0);
  double step_sd = 1.0 / std::sqrt(static_cast<double>(m));
  for (std::size_t i = 1; i <= m; ++i)
    walk[i] = walk[i - 1] + step_sd * rng.normal();
  double drift = walk[m] / static_cast<double>(m);
  for (std::size_t i = 1; i <= m; ++i)
    walk[i] -= drift * static_cast<double>(i);  // bridge: ends at exactly 0
  std::size_t argmin = 0;
  for (std::size_t i = 1; i < m; ++i)
    if (walk[i] < walk[argmin]) argmin = i;
  std::vector<double> exc(m + 1);
  double base = walk[argmin];
  for (std::size_t i = 0; i <= m; ++i) {
    std::size_t j = argmin + i;
    exc[i] = walk[j < m ? j : j - m] - base;
  }
  exc[0] = 0.0;
  exc[m] = 0.0;
  return GridPath(std::move(exc));
}

// Lifetime path of the limiting snake: 2 e / sigma.
inline GridPath lifetime_from_excursion(const GridPath& e, double sigma) {
  std::vector<double> vals = e.values();
  double c = 2.0 / sigma;
  for (double& v : vals) v *= c;
  return GridPath(std::move(vals));
}

// Min of the path over [min(s,t), max(s,t)], with the endpoints snapped to
// the nearest grid points so the result is an exact grid-value minimum.
inline double h_check(const GridPath& path, double s, double t) {
  if (s > t) std::swap(s, t);
  auto segs = static_cast<double>(path.segment_count());
  auto clamp_idx = [&](double x) {
    double i = std::round(std::clamp(x, 0.0, 1.0) * segs);
    return static_cast<std::size_t>(i);
  };
  std::size_t lo = clamp_idx(s);
  std::size_t hi = clamp_idx(t);
  double best = path.at_index(lo);
  for (std::size_t i = lo; i <= hi; ++i)
    best = std::min(best, path.at_index(i));
  return best;
}

enum class KernelKind { SnakeHead, LineageField, Combination };

// Covariance selector for the conditionally Gaussian limit fields.  Given a
// lifetime path h, the field covariance between grid points s, s' is
//   SnakeHead:    beta2 * hcheck(s,s')
//   LineageField: hcheck(s,s') * (-p p^T + diag p) blockwise over I_K
//   Combination:  hcheck(s,s') * lambda^T (-p p^T + diag p) lambda
struct ConditionalGaussianSpec {
  std::vector<double> grid;
  KernelKind kind = KernelKind::SnakeHead;
  double beta2 = 1.0;
  std::optional<IndexSetIK> ik;
  std::vector<double> lambda;

  std::size_t dimension() const {
    if (kind == KernelKind::LineageField) {
      if (!ik) throw InvalidArgs("lineage-field kernel needs an index set");
      return grid.size() * ik->size();
    }
    return grid.size();
  }
};

inline Eigen::MatrixXd assemble_covariance(const ConditionalGaussianSpec& spec,
                                           const GridPath& h) {
  std::size_t q = spec.grid.size();
  if (q == 0) throw InvalidArgs("empty evaluation grid");
  Eigen::MatrixXd mins(q, q);
  for (std::size_t a = 0; a < q; ++a)
    for (std::size_t b = a; b < q; ++b) {
      double v = h_check(h, spec.grid[a], spec.grid[b]);
      mins(a, b) = v;
      mins(b, a) = v;
    }
  switch (spec.kind) {
    case KernelKind::SnakeHead:
      return spec.beta2 * mins;
    case KernelKind::Combination: {
      if (!spec.ik) throw InvalidArgs("combination kernel needs an index set");
      if (spec.lambda.size() != spec.ik->size())
        throw DimensionMismatch("lambda size does not match the index set");
      Eigen::Map<const Eigen::VectorXd> lam(spec.lambda.data(),
                                            static_cast<Eigen::Index>(
                                                spec.lambda.size()));
      double coeff = lam.dot(limit_covariance(*spec.ik) * lam);
      return coeff * mins;
    }
    case KernelKind::LineageField: {
      if (!spec.ik) throw InvalidArgs("lineage-field kernel needs an index set");
      Eigen::MatrixXd cell = limit_covariance(*spec.ik);
      auto c = static_cast<std::size_t>(cell.rows());
      Eigen::MatrixXd full(q * c, q * c);
      for (std::size_t a = 0; a < q; ++a)
        for (std::size_t b = 0; b < q; ++b)
          full.block(static_cast<Eigen::Index>(a * c),
                     static_cast<Eigen::Index>(b * c),
                     static_cast<Eigen::Index>(c),
                     static_cast<Eigen::Index>(c)) = mins(a, b) * cell;
      return full;
    }
  }
  throw InvalidArgs("unknown kernel kind");
}

// Centered Gaussian draw with the assembled covariance.  The kernel is
// singular by design (the all-ones direction for the lineage field), so the
// eigendecomposition clips slightly negative eigenvalues; clipping more than
// a 1e-6 share of the spectrum mass means the assembly itself is broken.
inline std::vector<double> sample_conditional_field(
    const ConditionalGaussianSpec& spec, const GridPath& h, RandomStream& rng) {
  Eigen::MatrixXd cov = assemble_covariance(spec, h);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success)
    throw NotPSD("eigendecomposition failed");
  Eigen::VectorXd values = eig.eigenvalues();
  double clipped = 0.0, mass = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    mass += std::abs(values[i]);
    if (values[i] < 0.0) {
      clipped += -values[i];
      values[i] = 0.0;
    }
  }
  if (mass > 0.0 && clipped > 1e-6 * mass)
    throw NotPSD("negative eigenvalue mass " + std::to_string(clipped));
  Eigen::VectorXd z(values.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  Eigen::VectorXd x =
      eig.eigenvectors() * (values.array().sqrt() * z.array()).matrix();
  return std::vector<double>(x.data(), x.data() + x.size());
}

}  // namespace gwsnake
