#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "liftlab/topology.hpp"

using namespace liftlab;

namespace {

const double kLog2 = std::log(2.0);

ChainSpec path3() {
  return {{"a", "b", "c"}, {{0, 1, 1.0, 2.0}, {1, 2, 3.0, 1.0}}};
}

ChainSpec biased_ring3() {
  return {{"1", "2", "3"},
          {{0, 1, 2.0, 1.0}, {1, 2, 2.0, 1.0}, {0, 2, 1.0, 2.0}}};
}

// ring whose cycle affinity is exactly zero
ChainSpec unit_affinity_ring() {
  return {{"1", "2", "3"},
          {{0, 1, 1.0, 2.0}, {1, 2, 2.0, 1.0}, {0, 2, 1.0, 1.0}}};
}

// 4 vertices, 5 edges: two independent cycles
ChainSpec two_cycle_graph() {
  return {{"1", "2", "3", "4"},
          {{0, 1, 1.0, 1.0},
           {0, 2, 1.0, 1.0},
           {0, 3, 1.0, 1.0},
           {1, 2, 1.0, 1.0},
           {2, 3, 1.0, 1.0}}};
}

TEST(BettiNumber, KnownGraphs) {
  EXPECT_EQ(betti_number(path3()), 0);
  EXPECT_EQ(betti_number(biased_ring3()), 1);
  EXPECT_EQ(betti_number(two_cycle_graph()), 2);
}

TEST(CycleBasis, TreeHasNoSpecialEdges) {
  CycleBasis basis = build_cycle_basis(path3());
  EXPECT_TRUE(basis.special_edges.empty());
  EXPECT_EQ(static_cast<int>(basis.tree_edges.size()), 2);
  EXPECT_DOUBLE_EQ(basis.tree_potential[0], 0.0);
  // phi(b) - phi(a) = log(q_ba / q_ab)
  EXPECT_NEAR(basis.tree_potential[1], std::log(2.0 / 1.0), 1e-15);
  EXPECT_NEAR(basis.tree_potential[2] - basis.tree_potential[1],
              std::log(1.0 / 3.0), 1e-15);
}

TEST(CycleBasis, BiasedRingGain) {
  CycleBasis basis = build_cycle_basis(biased_ring3());
  ASSERT_EQ(basis.special_edges.size(), 1u);
  // chord (1,2) oriented along the forward (rate 2) direction
  EXPECT_EQ(basis.special_edges[0].u, 1);
  EXPECT_EQ(basis.special_edges[0].v, 2);
  EXPECT_NEAR(basis.cycle_gains[0], -3.0 * kLog2, 1e-14);
}

TEST(CycleBasis, UnitAffinityRingHasZeroGain) {
  CycleBasis basis = build_cycle_basis(unit_affinity_ring());
  ASSERT_EQ(basis.cycle_gains.size(), 1);
  EXPECT_NEAR(basis.cycle_gains[0], 0.0, 1e-14);
  EXPECT_TRUE(has_global_potential(basis, 1e-10));
}

TEST(CycleBasis, SpecialEdgeCountEqualsBetti) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> ksize(2, 7);
  std::uniform_real_distribution<double> rate(0.5, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    int k = ksize(rng);
    ChainSpec spec;
    for (int i = 0; i < k; ++i) spec.states.push_back(std::to_string(i));
    for (int i = 1; i < k; ++i) {
      std::uniform_int_distribution<int> parent(0, i - 1);
      spec.edges.push_back({parent(rng), i, rate(rng), rate(rng)});
    }
    // densify: add all remaining pairs with probability 1/3
    std::bernoulli_distribution add(1.0 / 3.0);
    for (int a = 0; a < k; ++a)
      for (int b = a + 1; b < k; ++b) {
        bool exists = false;
        for (const Edge& e : spec.edges)
          if (e.i == a && e.j == b) exists = true;
        if (!exists && add(rng))
          spec.edges.push_back({a, b, rate(rng), rate(rng)});
      }
    spec = validate_chain(spec);
    CycleBasis basis = build_cycle_basis(spec);
    EXPECT_EQ(static_cast<int>(basis.special_edges.size()), betti_number(spec));
    EXPECT_EQ(static_cast<int>(basis.tree_edges.size()), k - 1);
  }
}

TEST(PotentialGain, Basics) {
  ChainSpec spec = biased_ring3();
  EXPECT_DOUBLE_EQ(potential_gain(spec, {1}), 0.0);
  EXPECT_DOUBLE_EQ(potential_gain(spec, {0, 1, 0}), 0.0);
  EXPECT_NEAR(potential_gain(spec, {0, 1, 2, 0}), -3.0 * kLog2, 1e-14);
}

TEST(PotentialGain, NotAdjacent) {
  try {
    potential_gain(path3(), {0, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_adjacent);
  }
}

TEST(HasGlobalPotential, Cases) {
  EXPECT_TRUE(has_global_potential(build_cycle_basis(path3()), 1e-10));
  EXPECT_FALSE(has_global_potential(build_cycle_basis(biased_ring3()), 1e-10));
}

// random walk respecting adjacency; returns visited states
Trajectory random_walk(const ChainSpec& spec, std::mt19937_64& rng, int len,
                       int start) {
  std::vector<std::vector<int>> adj(spec.size());
  for (const Edge& e : spec.edges) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  Trajectory traj{start};
  int cur = start;
  for (int s = 0; s < len; ++s) {
    std::uniform_int_distribution<size_t> pick(0, adj[cur].size() - 1);
    cur = adj[cur][pick(rng)];
    traj.push_back(cur);
  }
  return traj;
}

TEST(PotentialGain, DecomposesThroughTreePotentialAndWinding) {
  // gain = phi_T(end) - phi_T(start) + sum_m w_m G_m, with w_m the signed
  // special-edge crossing count
  std::mt19937_64 rng(5);
  ChainSpec spec = two_cycle_graph();
  // randomize rates to make gains nontrivial
  std::uniform_real_distribution<double> rate(0.5, 2.0);
  for (Edge& e : spec.edges) {
    e.q_ij = rate(rng);
    e.q_ji = rate(rng);
  }
  CycleBasis basis = build_cycle_basis(spec);
  for (int rep = 0; rep < 200; ++rep) {
    Trajectory traj = random_walk(spec, rng, 12, rep % spec.size());
    Vector w = Vector::Zero(basis.cycle_gains.size());
    for (size_t s = 0; s + 1 < traj.size(); ++s)
      for (size_t m = 0; m < basis.special_edges.size(); ++m) {
        if (traj[s] == basis.special_edges[m].u &&
            traj[s + 1] == basis.special_edges[m].v)
          w[m] += 1;
        if (traj[s] == basis.special_edges[m].v &&
            traj[s + 1] == basis.special_edges[m].u)
          w[m] -= 1;
      }
    double expected = basis.tree_potential[traj.back()] -
                      basis.tree_potential[traj.front()] +
                      w.dot(basis.cycle_gains);
    EXPECT_NEAR(potential_gain(spec, traj), expected, 1e-12);
  }
}

TEST(PotentialGain, ReversalNegatesAndClosedWalksVanishUnderGlobalPotential) {
  std::mt19937_64 rng(9);
  ChainSpec spec = unit_affinity_ring();
  for (int rep = 0; rep < 100; ++rep) {
    Trajectory traj = random_walk(spec, rng, 10, 0);
    Trajectory rev(traj.rbegin(), traj.rend());
    double g = potential_gain(spec, traj);
    EXPECT_NEAR(potential_gain(spec, rev), -g, 1e-12);
    if (traj.front() == traj.back()) {
      EXPECT_NEAR(g, 0.0, traj.size() * 1e-12);
    }
  }
}

}  // namespace
