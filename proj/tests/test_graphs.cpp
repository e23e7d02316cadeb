#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "darkfarseer/graphs.hpp"
#include "oracles.hpp"

using namespace darkfarseer::graphs;

namespace {

void expect_well_formed(const SensorGraph& g) {
  EXPECT_TRUE(g.adjacency().is_symmetric());
  EXPECT_TRUE(g.adjacency().has_zero_diagonal());
  EXPECT_NO_THROW(validate_adjacency(g.adjacency()));
}

// Independent great-circle distance for the SPG oracle.
double great_circle_km(Coordinate a, Coordinate b) {
  const double r = 6371.0088, rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad, dlon = (b.lon - a.lon) * rad;
  const double h = std::pow(std::sin(dlat / 2), 2) + std::cos(a.lat * rad) * std::cos(b.lat * rad) * std::pow(std::sin(dlon / 2), 2);
  return 2 * r * std::asin(std::sqrt(h));
}

Adjacency path(std::size_t n) {
  Adjacency a(n);
  for (std::size_t i = 0; i + 1 < n; ++i) a.set_symmetric(i, i + 1, 1.0);
  return a;
}

}  // namespace

TEST(BuildPcg, SingleEdge) {
  const Edge e[] = {{0, 1, 2.0}};
  const auto g = build_pcg(3, e);
  expect_well_formed(g);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      EXPECT_EQ(g.adjacency()(i, j), ((i == 0 && j == 1) || (i == 1 && j == 0)) ? 2.0 : 0.0);
  EXPECT_EQ(g.kind(), GraphKind::pcg);
}

TEST(BuildPcg, EmptyEdgeList) {
  const auto g = build_pcg(2, std::span<const Edge>{});
  EXPECT_EQ(g.adjacency(), Adjacency(2));
}

TEST(BuildPcg, CompleteGraphHasTwelveEntries) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) edges.push_back({i, j, 1.0});
  const auto g = build_pcg(4, edges);
  std::size_t nonzero = 0;
  for (double w : g.adjacency().values()) {
    if (w != 0.0) {
      ++nonzero;
      EXPECT_EQ(w, 1.0);
    }
  }
  EXPECT_EQ(nonzero, 12u);
}

TEST(BuildPcg, Errors) {
  const Edge out_of_range[] = {{0, 3, 1.0}};
  EXPECT_THROW(build_pcg(3, out_of_range), GraphError);
  const Edge self_loop[] = {{1, 1, 1.0}};
  EXPECT_THROW(build_pcg(3, self_loop), GraphError);
  const Edge conflicting[] = {{0, 1, 1.0}, {1, 0, 2.0}};
  EXPECT_THROW(build_pcg(3, conflicting), GraphError);
  const Edge zero[] = {{0, 1, 0.0}};
  EXPECT_THROW(build_pcg(3, zero), GraphError);
  const Edge repeated[] = {{0, 1, 1.5}, {1, 0, 1.5}};
  EXPECT_NO_THROW(build_pcg(3, repeated));
}

TEST(BuildSpg, CoincidentPointsHaveWeightOne) {
  const Coordinate c[] = {{10.0, 20.0}, {10.0, 20.0}};
  const auto g = build_spg(c, 1.0, kInfinity, ThresholdMode::keep_below);
  EXPECT_EQ(g.adjacency()(0, 1), 1.0);
  EXPECT_EQ(g.kind(), GraphKind::spg);
  EXPECT_TRUE(g.normalized());
}

TEST(BuildSpg, InfiniteEpsilonKeepsEveryPair) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  std::vector<Coordinate> c;
  for (int k = 0; k < 7; ++k) c.push_back({40.0 + u(rng), -74.0 + u(rng)});
  const auto g = build_spg(c, 1.0, kInfinity);
  expect_well_formed(g);
  EXPECT_EQ(g.adjacency().edge_count(), 21u);
}

TEST(BuildSpg, KeepAboveDropsTheWeakPair) {
  // Three points on a meridian; the outer pair is twice as far apart.
  const Coordinate c[] = {{0.0, 0.0}, {0.006, 0.0}, {0.012, 0.0}};
  const double near = std::exp(-great_circle_km(c[0], c[1]));
  const double far = std::exp(-great_circle_km(c[0], c[2]));
  ASSERT_GT(near, 0.4);
  ASSERT_LT(far, 0.4);
  const auto g = build_spg(c, 1.0, 0.4, ThresholdMode::keep_above);
  expect_well_formed(g);
  EXPECT_EQ(g.adjacency().edge_count(), 2u);
  EXPECT_NEAR(g.adjacency()(0, 1), near, 1e-12);
  EXPECT_EQ(g.adjacency()(0, 2), 0.0);
  // The literal rule keeps the opposite side.
  const auto literal = build_spg(c, 1.0, 0.4, ThresholdMode::keep_below);
  EXPECT_EQ(literal.adjacency().edge_count(), 1u);
  EXPECT_NEAR(literal.adjacency()(0, 2), far, 1e-12);
}

TEST(BuildSpg, Errors) {
  const Coordinate one[] = {{0.0, 0.0}};
  EXPECT_THROW(build_spg(one, 1.0, kInfinity), GraphError);
  const Coordinate two[] = {{0.0, 0.0}, {1.0, 1.0}};
  EXPECT_THROW(build_spg(two, 0.0, kInfinity), GraphError);
  EXPECT_THROW(build_spg(two, 1.0, 0.0), GraphError);
}

TEST(Kernel, ZeroDistanceIsOne) { EXPECT_EQ(kernel_weight(0.0, 1.0), 1.0); }

TEST(NormalizeAdjacency, LnTwoGivesHalf) {
  const Edge e[] = {{0, 1, std::log(2.0)}};
  const auto g = normalize_adjacency(build_pcg(2, e), 1.0, kInfinity);
  EXPECT_NEAR(g.adjacency()(0, 1), 0.5, 1e-15);
  EXPECT_TRUE(g.normalized());
  expect_well_formed(g);
}

TEST(NormalizeAdjacency, InfiniteEpsilonOnlyReweights) {
  std::mt19937_64 rng(11);
  const Adjacency raw = oracle::random_graph(9, 0.5, rng);
  const SensorGraph g(raw, GraphKind::pcg);
  const auto n = normalize_adjacency(g, 1.0, kInfinity);
  EXPECT_EQ(n.adjacency().edge_count(), raw.edge_count());
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j)
      if (raw(i, j) > 0) EXPECT_EQ(n.adjacency()(i, j), std::exp(-raw(i, j)));
}

TEST(NormalizeAdjacency, RejectsDoubleApplication) {
  const Edge e[] = {{0, 1, 1.0}};
  const auto once = normalize_adjacency(build_pcg(2, e), 1.0, kInfinity);
  EXPECT_THROW(normalize_adjacency(once, 1.0, kInfinity), GraphError);
}

TEST(Density, Examples) {
  Adjacency complete(4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) complete.set_symmetric(i, j, 1.0);
  EXPECT_NEAR(density(complete), 6.0 / (4.0 * std::log(4.0)), 1e-15);
  EXPECT_NEAR(density(complete), 1.0820, 1e-4);
  EXPECT_EQ(density(Adjacency(5)), 0.0);
  EXPECT_NEAR(density(path(10)), 0.3909, 1e-4);
  EXPECT_THROW(density(Adjacency(1)), GraphError);
}

TEST(Subgraph, Examples) {
  const SensorGraph tri([] {
    Adjacency a(3);
    a.set_symmetric(0, 1, 0.5);
    a.set_symmetric(1, 2, 0.6);
    a.set_symmetric(0, 2, 0.7);
    return a;
  }(), GraphKind::pcg);
  const std::size_t all[] = {0, 1, 2};
  EXPECT_EQ(subgraph(tri, all).graph.adjacency(), tri.adjacency());

  const std::size_t two[] = {2, 0};
  const auto s = subgraph(tri, two);
  EXPECT_EQ(s.index_map, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(s.graph.adjacency().edge_count(), 1u);
  EXPECT_EQ(s.graph.adjacency()(0, 1), 0.7);

  Adjacency star(5);
  for (std::size_t leaf = 1; leaf < 5; ++leaf) star.set_symmetric(0, leaf, 1.0);
  const std::size_t leaves[] = {1, 2, 3, 4};
  EXPECT_EQ(subgraph(SensorGraph(star, GraphKind::pcg), leaves).graph.adjacency().edge_count(), 0u);

  EXPECT_THROW(subgraph(tri, std::span<const std::size_t>{}), GraphError);
  const std::size_t bad[] = {0, 3};
  EXPECT_THROW(subgraph(tri, bad), GraphError);
}

TEST(Subgraph, IsIdempotent) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const SensorGraph g(oracle::random_graph(10, 0.4, rng), GraphKind::pcg);
    std::vector<std::size_t> keep;
    for (std::size_t v = 0; v < 10; ++v)
      if (rng() % 2) keep.push_back(v);
    if (keep.empty()) keep.push_back(0);
    const auto once = subgraph(g, keep).graph;
    std::vector<std::size_t> all(once.n_nodes());
    std::iota(all.begin(), all.end(), 0);
    EXPECT_EQ(subgraph(once, all).graph.adjacency(), once.adjacency());
  }
}

TEST(FindBccs, PathOfThree) {
  const auto b = find_bccs(path(3), 0.0);
  EXPECT_EQ(b.components, (std::vector<std::vector<std::size_t>>{{0, 1}, {1, 2}}));
  EXPECT_EQ(b.membership[1], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(b.articulation_nodes(), std::vector<std::size_t>{1});
  EXPECT_EQ(b.components, oracle::brute_force_bccs(path(3), 0.0));
}

TEST(FindBccs, Triangle) {
  Adjacency a(3);
  a.set_symmetric(0, 1, 1.0);
  a.set_symmetric(1, 2, 1.0);
  a.set_symmetric(0, 2, 1.0);
  const auto b = find_bccs(a, 0.0);
  EXPECT_EQ(b.components, (std::vector<std::vector<std::size_t>>{{0, 1, 2}}));
  EXPECT_TRUE(b.articulation_nodes().empty());
}

TEST(FindBccs, OverlappingRegionsMembership) {
  const auto b = find_bccs(oracle::overlapping_regions(), 0.5);
  ASSERT_EQ(b.size(), 4u);
  EXPECT_EQ(b.components[2], (std::vector<std::size_t>{5, 6, 7}));
  EXPECT_EQ(b.components[3], (std::vector<std::size_t>{6, 8, 9}));
  EXPECT_EQ(b.membership[6], (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(b.membership[5], (std::vector<std::size_t>{1, 2}));
  EXPECT_TRUE(b.membership[4].empty());
  EXPECT_EQ(b.articulation_nodes(), (std::vector<std::size_t>{2, 5, 6}));
}

TEST(FindBccs, ThresholdAboveEveryWeightIsEmpty) {
  const auto b = find_bccs(oracle::overlapping_regions(), 0.9);
  EXPECT_TRUE(b.empty());
  EXPECT_THROW(find_bccs(path(3), -0.1), GraphError);
}

TEST(FindBccs, MatchesBruteForceOracle) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 2 + rng() % 11;
    const Adjacency a = oracle::random_graph(n, 0.15 + 0.5 * (seed % 4) / 3.0, rng);
    for (double mu : {0.0, 0.3, 0.7}) {
      const auto b = find_bccs(a, mu);
      ASSERT_EQ(b.components, oracle::brute_force_bccs(a, mu)) << "seed " << seed << " mu " << mu;
      for (const auto& c : b.components) EXPECT_GE(c.size(), 2u);
    }
  }
}

// Each thresholded edge lies inside exactly one component.
TEST(FindBccs, EdgesBelongToExactlyOneComponent) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed + 1000);
    const Adjacency a = oracle::random_graph(10, 0.35, rng);
    const auto b = find_bccs(a, 0.3);
    for (std::size_t i = 0; i < 10; ++i) {
      for (std::size_t j = i + 1; j < 10; ++j) {
        if (!(a(i, j) > 0.3)) continue;
        std::size_t owners = 0;
        for (const auto& c : b.components)
          owners += std::binary_search(c.begin(), c.end(), i) && std::binary_search(c.begin(), c.end(), j);
        EXPECT_EQ(owners, 1u) << "edge " << i << "-" << j;
      }
    }
  }
}

TEST(FindBccs, RaisingMuNeverAddsEdges) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const Adjacency a = oracle::random_graph(12, 0.4, rng);
    std::size_t last = std::numeric_limits<std::size_t>::max();
    for (double mu : {0.0, 0.1, 0.3, 0.5, 0.7, 0.9}) {
      // Working-graph edges as covered by the decomposition.
      const auto b = find_bccs(a, mu);
      std::size_t edges = 0;
      for (const auto& c : b.components)
        for (std::size_t x = 0; x < c.size(); ++x)
          for (std::size_t y = x + 1; y < c.size(); ++y) edges += a(c[x], c[y]) > b.threshold;
      EXPECT_LE(edges, last);
      last = edges;
    }
  }
}

TEST(Adjacency, ValidationErrors) {
  Adjacency a(2);
  a(0, 1) = 1.0;
  EXPECT_THROW(validate_adjacency(a), GraphError);
  Adjacency d(2);
  d(0, 0) = 1.0;
  EXPECT_THROW(validate_adjacency(d), GraphError);
  Adjacency neg(2);
  neg.set_symmetric(0, 1, -1.0);
  EXPECT_THROW(validate_adjacency(neg), GraphError);
  EXPECT_THROW(SensorGraph(Adjacency(2), GraphKind::spg), GraphError);
}
