/**
 * Finite continuous-time Markov chains with bidirectional positive rates:
 * validation, stationary distribution, master-equation evolution, and the
 * instantaneous thermodynamic quantities (entropy production rate, free
 * energy, housekeeping heat).
 */

#ifndef LIFTLAB_CHAIN_HPP
#define LIFTLAB_CHAIN_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "liftlab/errors.hpp"

namespace liftlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Floor applied to probabilities inside logarithms. Fluxes always use the
// raw values, so the decomposition e_p = Q_hk - dF/dt stays exact termwise
// even when some states carry zero probability.
inline constexpr double kLogFloor = 1e-14;

struct Edge {
  int i = 0;          // smaller endpoint
  int j = 0;          // larger endpoint
  double q_ij = 0.0;  // rate i -> j
  double q_ji = 0.0;  // rate j -> i
};

struct ChainSpec {
  std::vector<std::string> states;
  std::vector<Edge> edges;

  int size() const { return static_cast<int>(states.size()); }
};

/// Validates the standing assumptions: k >= 2, simple connected undirected
/// graph, q_ij > 0 iff q_ji > 0 on every listed edge.
inline ChainSpec validate_chain(const ChainSpec& spec) {
  const int k = spec.size();
  if (k < 2) fail(ErrorCode::validation, "chain needs at least 2 states");
  std::vector<std::vector<int>> adj(k);
  std::vector<std::vector<bool>> seen(k, std::vector<bool>(k, false));
  for (const Edge& e : spec.edges) {
    if (e.i < 0 || e.j < 0 || e.i >= k || e.j >= k)
      fail(ErrorCode::validation, "edge endpoint out of range");
    if (e.i == e.j)
      fail(ErrorCode::self_loop, "self-loop at state " + spec.states[e.i]);
    if (e.i > e.j)
      fail(ErrorCode::validation, "edge endpoints must satisfy i < j");
    if (seen[e.i][e.j])
      fail(ErrorCode::duplicate_edge,
           "duplicate edge " + spec.states[e.i] + "-" + spec.states[e.j]);
    seen[e.i][e.j] = true;
    if (!(e.q_ij > 0.0) || !(e.q_ji > 0.0))
      fail(ErrorCode::rate_sign_mismatch,
           "rates must be positive in both directions on edge " +
               spec.states[e.i] + "-" + spec.states[e.j]);
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  std::vector<bool> visited(k, false);
  std::queue<int> bfs;
  bfs.push(0);
  visited[0] = true;
  int reached = 1;
  while (!bfs.empty()) {
    int u = bfs.front();
    bfs.pop();
    for (int v : adj[u])
      if (!visited[v]) {
        visited[v] = true;
        ++reached;
        bfs.push(v);
      }
  }
  if (reached != k) fail(ErrorCode::disconnected, "graph is not connected");
  return spec;
}

/// Total exit rate of each state.
inline Vector exit_rates(const ChainSpec& spec) {
  Vector r = Vector::Zero(spec.size());
  for (const Edge& e : spec.edges) {
    r[e.i] += e.q_ij;
    r[e.j] += e.q_ji;
  }
  return r;
}

/// Generator matrix A with dp/dt = A p, A(i,j) = rate j -> i for i != j.
inline Matrix generator_matrix(const ChainSpec& spec) {
  const int k = spec.size();
  Matrix a = Matrix::Zero(k, k);
  for (const Edge& e : spec.edges) {
    a(e.j, e.i) += e.q_ij;
    a(e.i, e.i) -= e.q_ij;
    a(e.i, e.j) += e.q_ji;
    a(e.j, e.j) -= e.q_ji;
  }
  return a;
}

/// Unique stationary distribution, by replacing one balance row of the
/// generator with the normalization sum(pi) = 1 and solving densely.
inline Vector stationary_distribution(const ChainSpec& spec) {
  const int k = spec.size();
  Matrix a = generator_matrix(spec);
  Matrix sys = a;
  sys.row(k - 1).setOnes();
  Vector rhs = Vector::Zero(k);
  rhs[k - 1] = 1.0;
  Eigen::PartialPivLU<Matrix> lu(sys);
  Vector pi = lu.solve(rhs);
  if (!pi.allFinite())
    fail(ErrorCode::singular_solve, "stationary solve produced non-finite values");
  double resid = (a * pi).lpNorm<Eigen::Infinity>();
  if (resid > 1e-12 * std::max(1.0, exit_rates(spec).maxCoeff()))
    fail(ErrorCode::singular_solve, "stationary balance residual too large");
  return pi;
}

/// Spectral-gap estimate: -max Re(lambda) over nonzero eigenvalues of the
/// generator. Used for choosing convergence horizons.
inline double spectral_gap(const ChainSpec& spec) {
  Eigen::EigenSolver<Matrix> es(generator_matrix(spec));
  double gap = std::numeric_limits<double>::infinity();
  for (int m = 0; m < es.eigenvalues().size(); ++m) {
    double re = es.eigenvalues()[m].real();
    if (re < -1e-12) gap = std::min(gap, -re);
  }
  return gap;
}

struct BaseTrajectory {
  std::vector<double> times;
  std::vector<Vector> probs;
};

inline void check_step(double dt, double t_end, double max_exit) {
  if (!(t_end > 0.0)) fail(ErrorCode::validation, "t_end must be positive");
  if (!(dt > 0.0) || dt > 0.1 / max_exit * (1.0 + 1e-12))
    fail(ErrorCode::step_too_large,
         "dt must satisfy dt <= 0.1 / max exit rate");
}

/// Fixed-step RK4 on the master equation dp_i/dt = sum_j (p_j q_ji - p_i q_ij),
/// recording the distribution at every multiple of dt.
inline BaseTrajectory evolve_base(const ChainSpec& spec, const Vector& p0,
                                  double t_end, double dt) {
  check_step(dt, t_end, exit_rates(spec).maxCoeff());
  Matrix a = generator_matrix(spec);
  const int steps = static_cast<int>(std::llround(t_end / dt));
  BaseTrajectory traj;
  traj.times.reserve(steps + 1);
  traj.probs.reserve(steps + 1);
  Vector p = p0;
  traj.times.push_back(0.0);
  traj.probs.push_back(p);
  for (int s = 1; s <= steps; ++s) {
    Vector k1 = a * p;
    Vector k2 = a * (p + 0.5 * dt * k1);
    Vector k3 = a * (p + 0.5 * dt * k2);
    Vector k4 = a * (p + dt * k3);
    p += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    traj.times.push_back(s * dt);
    traj.probs.push_back(p);
  }
  return traj;
}

/// Relative entropy sum_i p_i log(p_i / theta_i) with 0 log 0 = 0.
/// theta may be a non-normalized positive measure.
inline double relative_entropy(const Vector& p, const Vector& theta) {
  double s = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      if (!(theta[i] > 0.0))
        fail(ErrorCode::support_mismatch,
             "p has mass where the reference measure vanishes");
      s += p[i] * std::log(p[i] / theta[i]);
    }
  }
  return s;
}

inline double entropy(const Vector& p) {
  double s = 0.0;
  for (int i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) s -= p[i] * std::log(p[i]);
  return s;
}

/// Instantaneous entropy production rate of the base chain:
/// sum over unordered edges of [p_i q_ij - p_j q_ji] log(p_i q_ij / (p_j q_ji)).
/// Edges with both directional fluxes zero contribute 0.
inline double base_epr(const ChainSpec& spec, const Vector& p) {
  double s = 0.0;
  for (const Edge& e : spec.edges) {
    double a = p[e.i] * e.q_ij, b = p[e.j] * e.q_ji;
    if (a == 0.0 && b == 0.0) continue;
    double af = std::max(p[e.i], kLogFloor) * e.q_ij;
    double bf = std::max(p[e.j], kLogFloor) * e.q_ji;
    s += (a - b) * std::log(af / bf);
  }
  return s;
}

inline double stationary_epr(const ChainSpec& spec) {
  return base_epr(spec, stationary_distribution(spec));
}

struct ThermoSample {
  double t = 0.0;
  double e_p = 0.0;
  double dF_dt = 0.0;
  double q_hk = 0.0;
  double F = 0.0;
  double H = 0.0;
  std::optional<double> E;  // mean potential energy; lifted chains only
};

/// All base-chain thermodynamic quantities at distribution p, with the
/// stationary distribution as reference measure.
inline ThermoSample base_thermo(const ChainSpec& spec, const Vector& p) {
  Vector pi = stationary_distribution(spec);
  ThermoSample out;
  out.F = relative_entropy(p, pi);
  out.H = entropy(p);
  for (const Edge& e : spec.edges) {
    double a = p[e.i] * e.q_ij, b = p[e.j] * e.q_ji;
    if (a == 0.0 && b == 0.0) continue;
    double d = a - b;
    double pf_i = std::max(p[e.i], kLogFloor);
    double pf_j = std::max(p[e.j], kLogFloor);
    out.e_p += d * std::log(pf_i * e.q_ij / (pf_j * e.q_ji));
    out.dF_dt -= d * std::log(pf_i * pi[e.j] / (pf_j * pi[e.i]));
    out.q_hk += d * std::log(pi[e.i] * e.q_ij / (pi[e.j] * e.q_ji));
  }
  return out;
}

}  // namespace liftlab

#endif  // LIFTLAB_CHAIN_HPP
