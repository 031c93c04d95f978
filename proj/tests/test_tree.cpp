#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "gwsnake/gwsnake.hpp"

using namespace gwsnake;

TEST_CASE("degree sequences are validated") {
  REQUIRE_NOTHROW(PlanarTree::from_degrees({2, 2, 0, 0, 0}));
  REQUIRE_NOTHROW(PlanarTree::from_degrees({1, 1, 0}));
  REQUIRE_NOTHROW(PlanarTree::from_degrees({0}));

  REQUIRE_THROWS_AS(PlanarTree::from_degrees({}), LukasiewiczViolation);
  // walk dips to -1 with nodes left over
  REQUIRE_THROWS_AS(PlanarTree::from_degrees({0, 0}), LukasiewiczViolation);
  REQUIRE_THROWS_AS(PlanarTree::from_degrees({2, 0, 0, 0}),
                    LukasiewiczViolation);
  // walk never reaches -1
  REQUIRE_THROWS_AS(PlanarTree::from_degrees({2, 0}), LukasiewiczViolation);
  try {
    PlanarTree::from_degrees({0, 0});
    FAIL("expected a validation error");
  } catch (const LukasiewiczViolation& e) {
    REQUIRE(e.index() == 1);
  }
}

TEST_CASE("structure of a worked five-node tree") {
  auto tree = PlanarTree::from_degrees({2, 2, 0, 0, 0});
  REQUIRE(tree.node_count() == 5);
  REQUIRE(tree.edge_count() == 4);

  std::vector<int> depths, parents, ranks;
  for (std::size_t v = 0; v < 5; ++v) {
    depths.push_back(tree.depth(v));
    parents.push_back(tree.parent(v));
    ranks.push_back(tree.child_rank(v));
  }
  REQUIRE(depths == std::vector<int>{0, 1, 2, 2, 1});
  REQUIRE(parents == std::vector<int>{-1, 0, 1, 1, 0});
  REQUIRE(ranks == std::vector<int>{0, 1, 1, 2, 2});
  REQUIRE(tree.child(0, 1) == 1);
  REQUIRE(tree.child(0, 2) == 4);
  REQUIRE(tree.child(1, 2) == 3);
}

TEST_CASE("height and contour encodings") {
  auto tree = PlanarTree::from_degrees({2, 2, 0, 0, 0});
  REQUIRE(tree.height_process().values() ==
          std::vector<double>{0, 1, 2, 2, 1});
  REQUIRE(tree.contour_process().values() ==
          std::vector<double>{0, 1, 2, 1, 2, 1, 0, 1, 0});

  auto cherry = PlanarTree::from_degrees({2, 0, 0});
  REQUIRE(cherry.contour_process().values() ==
          std::vector<double>{0, 1, 0, 1, 0});

  auto single = PlanarTree::from_degrees({0});
  REQUIRE(single.height_process().values() == std::vector<double>{0});
  REQUIRE(single.contour_process().values() == std::vector<double>{0});
  REQUIRE_THROWS_AS(single.rescaled_height(), DegenerateTree);
  REQUIRE_THROWS_AS(single.rescaled_contour(), DegenerateTree);
}

TEST_CASE("rescaled encodings divide by the square root of the edge count") {
  auto cherry = PlanarTree::from_degrees({2, 0, 0});
  auto rc = cherry.rescaled_contour();
  REQUIRE(rc.segment_count() == 4);
  REQUIRE(rc.at_index(1) == Catch::Approx(1.0 / std::sqrt(2.0)));
  REQUIRE(rc.at_index(2) == 0.0);

  auto tree = PlanarTree::from_degrees({2, 2, 0, 0, 0});
  auto rh = tree.rescaled_height();
  REQUIRE(rh.segment_count() == 4);
  REQUIRE(rh.at_index(2) == Catch::Approx(2.0 / 2.0));
}

TEST_CASE("grid paths interpolate linearly and hit grid values exactly") {
  GridPath p({0, 1, 2, 2, 1});
  REQUIRE(p(0.0) == 0.0);
  REQUIRE(p(0.25) == 1.0);
  REQUIRE(p(1.0) == 1.0);
  REQUIRE(p(0.375) == Catch::Approx(1.5));
  REQUIRE(p(0.5 + 1e-16) == 2.0);  // snaps to the grid index

  REQUIRE(p.min_between(0.25, 0.75) == 1.0);
  REQUIRE(p.min_between(0.75, 0.25) == 1.0);
  REQUIRE(p.min_between(0.3, 0.6) == Catch::Approx(1.2));
  REQUIRE(p.min_between(0.5, 0.5) == 2.0);

  GridPath flat({3.0});
  REQUIRE(flat(0.7) == 3.0);
  REQUIRE(flat.min_between(0.0, 1.0) == 3.0);
}

TEST_CASE("tree JSON round trip") {
  auto tree = PlanarTree::from_degrees({3, 0, 2, 0, 0, 0});
  auto j = tree.to_json();
  REQUIRE(j.contains("degrees"));
  auto back = PlanarTree::from_json(j);
  REQUIRE(back.node_count() == tree.node_count());
  for (std::size_t v = 0; v < tree.node_count(); ++v)
    REQUIRE(back.degree(v) == tree.degree(v));
  REQUIRE_THROWS_AS(PlanarTree::from_json(nlohmann::json{{"deg", 1}}),
                    ParseError);
}

TEST_CASE("height process matches depths on sampled trees") {
  auto mu = OffspringDistribution::from_string("1/6,1/2,1/3");
  RandomStream rng(42, 0);
  for (int rep = 0; rep < 20; ++rep) {
    auto tree = sample_conditioned(mu, 60, rng);
    REQUIRE(tree.node_count() == 61);
    auto h = tree.height_process();
    for (std::size_t v = 0; v < tree.node_count(); ++v)
      REQUIRE(h.at_index(v) == static_cast<double>(tree.depth(v)));
    auto c = tree.contour_process();
    REQUIRE(c.size() == 2 * tree.edge_count() + 1);
  }
}
