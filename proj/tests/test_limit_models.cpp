#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gwsnake/gwsnake.hpp"

using namespace gwsnake;

namespace {
GridPath tent() { return GridPath({0.0, 1.0, 2.0, 1.0, 0.0}); }

IndexSetIK binary_ik() {
  return IndexSetIK(OffspringDistribution::from_string("1/2,0,1/2"));
}
}  // namespace

TEST_CASE("excursion samples are nonnegative loops") {
  RandomStream rng(3, 0);
  for (int rep = 0; rep < 50; ++rep) {
    auto e = sample_excursion(64, rng);
    REQUIRE(e.size() == 65);
    REQUIRE(e.at_index(0) == 0.0);
    REQUIRE(e.at_index(64) == 0.0);
    double mx = 0.0;
    for (double v : e.values()) {
      REQUIRE(v >= 0.0);
      mx = std::max(mx, v);
    }
    REQUIRE(mx > 0.0);
  }
  REQUIRE_THROWS_AS(sample_excursion(1, rng), InvalidArgs);
}

TEST_CASE("excursion functionals match the known constants") {
  RandomStream rng(12, 0);
  const int reps = 4000;
  const std::size_t m = 1024;
  double smax = 0.0, smid = 0.0;
  for (int r = 0; r < reps; ++r) {
    auto e = sample_excursion(m, rng);
    const auto& v = e.values();
    smax += *std::max_element(v.begin(), v.end());
    smid += e(0.5);
  }
  // discretization alone sits ~3% low at this grid, well inside the band
  double mean_max = smax / reps;
  double mean_mid = smid / reps;
  REQUIRE(mean_max / 1.2533141373155003 == Catch::Approx(1.0).margin(0.05));
  REQUIRE(mean_mid / 0.7978845608028654 == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("lifetime scaling by the offspring deviation") {
  RandomStream rng(4, 0);
  auto e = sample_excursion(32, rng);
  auto h2 = lifetime_from_excursion(e, 2.0);
  auto h1 = lifetime_from_excursion(e, 1.0);
  for (std::size_t i = 0; i <= 32; ++i) {
    REQUIRE(h2.at_index(i) == e.at_index(i));
    REQUIRE(h1.at_index(i) == 2.0 * e.at_index(i));
  }
}

TEST_CASE("interval minimum with grid snapping") {
  auto p = tent();
  REQUIRE(h_check(p, 0.25, 0.75) == 1.0);
  REQUIRE(h_check(p, 0.75, 0.25) == 1.0);
  REQUIRE(h_check(p, 0.5, 0.5) == 2.0);
  REQUIRE(h_check(p, 0.0, 1.0) == 0.0);
  REQUIRE(h_check(p, 0.3, 0.8) == 1.0);   // snaps to 0.25, 0.75
  REQUIRE(h_check(p, 0.2, 0.3) == 1.0);   // both snap to 0.25
  REQUIRE(h_check(p, -0.2, 0.1) == 0.0);  // clamped into [0,1]
}

TEST_CASE("kernel assembly on the tent path") {
  ConditionalGaussianSpec spec;
  spec.grid = {0.25, 0.5, 0.75};
  spec.kind = KernelKind::SnakeHead;
  auto cov = assemble_covariance(spec, tent());
  Eigen::MatrixXd want(3, 3);
  want << 1, 1, 1, 1, 2, 1, 1, 1, 1;
  REQUIRE((cov - want).norm() == 0.0);

  spec.beta2 = 3.0;
  auto scaled = assemble_covariance(spec, tent());
  REQUIRE((scaled - 3.0 * want).norm() == 0.0);

  ConditionalGaussianSpec combo;
  combo.grid = spec.grid;
  combo.kind = KernelKind::Combination;
  combo.ik = binary_ik();
  combo.lambda = {0.0, 1.0, -1.0};
  auto ccov = assemble_covariance(combo, tent());
  REQUIRE((ccov - want).norm() < 1e-14);

  combo.lambda = {1.0, 0.0};
  REQUIRE_THROWS_AS(assemble_covariance(combo, tent()), DimensionMismatch);

  ConditionalGaussianSpec field;
  field.grid = spec.grid;
  field.kind = KernelKind::LineageField;
  REQUIRE_THROWS_AS(field.dimension(), InvalidArgs);
  field.ik = binary_ik();
  REQUIRE(field.dimension() == 9);
  auto fcov = assemble_covariance(field, tent());
  REQUIRE(fcov.rows() == 9);
  // block (a,b) is hcheck(s_a, s_b) times the cell covariance
  REQUIRE(fcov(1, 1) == 0.25);
  REQUIRE(fcov(1, 2) == -0.25);
  REQUIRE(fcov(4, 4) == 0.5);
  REQUIRE(fcov(1, 4) == 0.25);
  REQUIRE(fcov(0, 0) == 0.0);
  REQUIRE(fcov(0, 4) == 0.0);
}

TEST_CASE("field draws respect the degenerate directions") {
  ConditionalGaussianSpec field;
  field.grid = {0.25, 0.5, 0.75};
  field.kind = KernelKind::LineageField;
  field.ik = binary_ik();
  RandomStream rng(21, 0);
  for (int rep = 0; rep < 200; ++rep) {
    auto x = sample_conditional_field(field, tent(), rng);
    REQUIRE(x.size() == 9);
    for (std::size_t a = 0; a < 3; ++a) {
      REQUIRE(std::abs(x[a * 3 + 0]) < 1e-9);
      REQUIRE(x[a * 3 + 1] == Catch::Approx(-x[a * 3 + 2]).margin(1e-9));
    }
  }
}

TEST_CASE("field draws reproduce the kernel moments") {
  ConditionalGaussianSpec spec;
  spec.grid = {0.25, 0.5};
  spec.kind = KernelKind::SnakeHead;
  RandomStream rng(22, 0);
  const int reps = 40000;
  double v00 = 0.0, v11 = 0.0, c01 = 0.0, m0 = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    auto x = sample_conditional_field(spec, tent(), rng);
    v00 += x[0] * x[0];
    v11 += x[1] * x[1];
    c01 += x[0] * x[1];
    m0 += x[0];
  }
  REQUIRE(std::abs(m0 / reps) < 0.02);
  REQUIRE(v00 / reps == Catch::Approx(1.0).margin(0.03));
  REQUIRE(v11 / reps == Catch::Approx(2.0).margin(0.06));
  REQUIRE(c01 / reps == Catch::Approx(1.0).margin(0.03));
}

TEST_CASE("broken kernels are rejected rather than repaired") {
  ConditionalGaussianSpec spec;
  spec.grid = {0.25, 0.5, 0.75};
  spec.kind = KernelKind::SnakeHead;
  spec.beta2 = -1.0;
  RandomStream rng(23, 0);
  REQUIRE_THROWS_AS(sample_conditional_field(spec, tent(), rng), NotPSD);
}

TEST_CASE("fields over random lifetimes stay finite") {
  RandomStream rng(24, 0);
  auto h = lifetime_from_excursion(sample_excursion(256, rng), 1.0);
  ConditionalGaussianSpec field;
  field.grid = {0.1, 0.4, 0.9};
  field.kind = KernelKind::LineageField;
  field.ik = IndexSetIK(OffspringDistribution::from_string("2/3,0,0,1/3"));
  auto x = sample_conditional_field(field, h, rng);
  REQUIRE(x.size() == 18);
  for (double v : x) REQUIRE(std::isfinite(v));
}
