/**
 * Cycle structure of the chain's graph: first Betti number, deterministic
 * spanning tree, fundamental cycles with their potential gains, and the
 * global-potential existence test.
 */

#ifndef LIFTLAB_TOPOLOGY_HPP
#define LIFTLAB_TOPOLOGY_HPP

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "liftlab/chain.hpp"
#include "liftlab/errors.hpp"

namespace liftlab {

/// b(V,E) = |E| - |V| + 1 for a connected graph.
inline int betti_number(const ChainSpec& spec) {
  return static_cast<int>(spec.edges.size()) - spec.size() + 1;
}

struct SpecialEdge {
  int edge_index = 0;  // index into ChainSpec::edges
  int u = 0;           // orientation u -> v, u < v
  int v = 0;
};

struct CycleBasis {
  std::vector<int> tree_edges;             // edge indices forming the tree
  std::vector<SpecialEdge> special_edges;  // the n = |E|-|V|+1 chords
  Vector tree_potential;                   // phi_T, phi_T(0) = 0
  Vector cycle_gains;                      // G_m per fundamental cycle
};

/// Deterministic cycle basis: BFS spanning tree rooted at state 0 with
/// neighbors visited in ascending index order; special edges sorted by
/// (min endpoint, max endpoint) and oriented low -> high. The tree potential
/// accumulates phi_T(j) - phi_T(i) = log(q_ji / q_ij) along tree edges, and
/// G_m = log(q_vu / q_uv) + phi_T(u) - phi_T(v) is the gain around the m-th
/// fundamental cycle crossed in the u -> v direction.
inline CycleBasis build_cycle_basis(const ChainSpec& spec) {
  const int k = spec.size();
  struct Nbr {
    int to, edge;
  };
  std::vector<std::vector<Nbr>> adj(k);
  for (int m = 0; m < static_cast<int>(spec.edges.size()); ++m) {
    const Edge& e = spec.edges[m];
    adj[e.i].push_back({e.j, m});
    adj[e.j].push_back({e.i, m});
  }
  for (auto& v : adj)
    std::sort(v.begin(), v.end(),
              [](const Nbr& a, const Nbr& b) { return a.to < b.to; });

  CycleBasis basis;
  basis.tree_potential = Vector::Zero(k);
  std::vector<bool> in_tree_edge(spec.edges.size(), false);
  std::vector<bool> visited(k, false);
  std::queue<int> bfs;
  bfs.push(0);
  visited[0] = true;
  while (!bfs.empty()) {
    int u = bfs.front();
    bfs.pop();
    for (const Nbr& nb : adj[u]) {
      if (visited[nb.to]) continue;
      visited[nb.to] = true;
      in_tree_edge[nb.edge] = true;
      basis.tree_edges.push_back(nb.edge);
      const Edge& e = spec.edges[nb.edge];
      // gain of the step u -> nb.to
      double gain = (e.i == u) ? std::log(e.q_ji / e.q_ij)
                               : std::log(e.q_ij / e.q_ji);
      basis.tree_potential[nb.to] = basis.tree_potential[u] + gain;
      bfs.push(nb.to);
    }
  }

  std::vector<int> chords;
  for (int m = 0; m < static_cast<int>(spec.edges.size()); ++m)
    if (!in_tree_edge[m]) chords.push_back(m);
  std::sort(chords.begin(), chords.end(), [&](int a, int b) {
    const Edge& ea = spec.edges[a];
    const Edge& eb = spec.edges[b];
    return std::pair(ea.i, ea.j) < std::pair(eb.i, eb.j);
  });
  basis.cycle_gains = Vector::Zero(static_cast<int>(chords.size()));
  for (int m = 0; m < static_cast<int>(chords.size()); ++m) {
    const Edge& e = spec.edges[chords[m]];
    basis.special_edges.push_back({chords[m], e.i, e.j});
    basis.cycle_gains[m] = std::log(e.q_ji / e.q_ij) +
                           basis.tree_potential[e.i] -
                           basis.tree_potential[e.j];
  }
  return basis;
}

using Trajectory = std::vector<int>;

/// Potential gain sum_j log(q_{i_{j+1} i_j} / q_{i_j i_{j+1}}) of a walk.
inline double potential_gain(const ChainSpec& spec, const Trajectory& traj) {
  const int k = spec.size();
  Matrix q = Matrix::Zero(k, k);
  for (const Edge& e : spec.edges) {
    q(e.i, e.j) = e.q_ij;
    q(e.j, e.i) = e.q_ji;
  }
  double s = 0.0;
  for (size_t m = 0; m + 1 < traj.size(); ++m) {
    int a = traj[m], b = traj[m + 1];
    if (a < 0 || b < 0 || a >= k || b >= k || q(a, b) <= 0.0)
      fail(ErrorCode::not_adjacent, "trajectory step is not an edge");
    s += std::log(q(b, a) / q(a, b));
  }
  return s;
}

/// True iff every fundamental-cycle gain vanishes within tol; fundamental
/// cycles span all cycles, so this decides global-potential existence.
inline bool has_global_potential(const CycleBasis& basis, double tol) {
  for (int m = 0; m < basis.cycle_gains.size(); ++m)
    if (std::abs(basis.cycle_gains[m]) > tol) return false;
  return true;
}

}  // namespace liftlab

#endif  // LIFTLAB_TOPOLOGY_HPP
