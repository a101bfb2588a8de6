/**
 * The winding-lattice lift of a driven chain: states (i, alpha) on
 * V x Z^n restricted to a finite window [-R,R]^n, with the proper global
 * potential, the detailed-balanced measure mu = exp(-phi), windowed
 * master-equation evolution with a lost-mass ledger, the full thermodynamic
 * time series, mutual-information diagnostics, and exact-jump path sampling.
 *
 * Crossing special edge m in its u -> v orientation is the only move that
 * changes the winding vector (alpha -> alpha + e_m); tree edges stay inside
 * the cell.
 */

#ifndef LIFTLAB_LIFT_HPP
#define LIFTLAB_LIFT_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "liftlab/chain.hpp"
#include "liftlab/errors.hpp"
#include "liftlab/topology.hpp"

namespace liftlab {

struct LiftedEdge {
  int u = 0, v = 0;  // flattened lifted-state indices
  double q_uv = 0.0, q_vu = 0.0;
};

struct LeakFlow {
  int u = 0;
  double rate = 0.0;  // flux out of the window (absorbed)
};

struct LiftSpec {
  ChainSpec base;
  CycleBasis basis;
  int radius = 0;  // window [-R, R] per winding coordinate
  int n = 0;       // Betti number = winding dimension
  int window = 1;  // 2R+1 (1 when n = 0)
  int cells = 1;   // window^n
  std::vector<LiftedEdge> edges;
  std::vector<LeakFlow> leaks;

  int states() const { return cells * base.size(); }
  int index(int i, const std::vector<int>& alpha) const {
    int c = 0, stride = 1;
    for (int m = 0; m < n; ++m) {
      c += (alpha[m] + radius) * stride;
      stride *= window;
    }
    return c * base.size() + i;
  }
  int base_state(int idx) const { return idx % base.size(); }
  std::vector<int> winding(int idx) const {
    std::vector<int> alpha(n);
    int c = idx / base.size();
    for (int m = 0; m < n; ++m) {
      alpha[m] = c % window - radius;
      c /= window;
    }
    return alpha;
  }
};

/// Materializes the windowed lift. Rates are inherited from the base chain
/// and do not depend on alpha; special-edge flux across the window boundary
/// is routed to the absorbing lost-mass ledger.
inline LiftSpec build_lift(const ChainSpec& base, int radius) {
  if (radius < 1) fail(ErrorCode::window_too_small, "window radius must be >= 1");
  LiftSpec lift;
  lift.base = validate_chain(base);
  lift.basis = build_cycle_basis(lift.base);
  lift.radius = radius;
  lift.n = betti_number(lift.base);
  lift.window = lift.n == 0 ? 1 : 2 * radius + 1;
  lift.cells = 1;
  for (int m = 0; m < lift.n; ++m) lift.cells *= lift.window;

  // chord lookup: edge index -> special index, -1 for tree edges
  std::vector<int> chord(base.edges.size(), -1);
  for (int m = 0; m < static_cast<int>(lift.basis.special_edges.size()); ++m)
    chord[lift.basis.special_edges[m].edge_index] = m;

  std::vector<int> alpha(lift.n, -radius);
  for (int c = 0; c < lift.cells; ++c) {
    for (size_t em = 0; em < lift.base.edges.size(); ++em) {
      const Edge& e = lift.base.edges[em];
      int m = chord[em];
      if (m < 0) {
        lift.edges.push_back({lift.index(e.i, alpha), lift.index(e.j, alpha),
                              e.q_ij, e.q_ji});
      } else if (alpha[m] + 1 <= radius) {
        std::vector<int> beta = alpha;
        ++beta[m];
        lift.edges.push_back(
            {lift.index(e.i, alpha), lift.index(e.j, beta), e.q_ij, e.q_ji});
      } else {
        lift.leaks.push_back({lift.index(e.i, alpha), e.q_ij});
      }
      if (m >= 0 && alpha[m] - 1 < -radius)
        lift.leaks.push_back({lift.index(e.j, alpha), e.q_ji});
    }
    for (int m = 0; m < lift.n; ++m) {  // mixed-radix increment
      if (++alpha[m] <= radius) break;
      alpha[m] = -radius;
    }
  }
  return lift;
}

struct WindowedDistribution {
  Vector probs;
  double lost_mass = 0.0;
};

inline WindowedDistribution delta_at(const LiftSpec& lift, int base_state) {
  if (base_state < 0 || base_state >= lift.base.size())
    fail(ErrorCode::validation, "start state out of range");
  WindowedDistribution w;
  w.probs = Vector::Zero(lift.states());
  w.probs[lift.index(base_state, std::vector<int>(lift.n, 0))] = 1.0;
  return w;
}

struct PotentialTable {
  Vector phi;      // phi(i,alpha) = phi_T(i) + alpha . G, phi(0,0) = 0
  Vector mu;       // exp(-phi), detailed balanced
  Vector pi_lift;  // pi(i,alpha) = stationary pi of the base chain
};

inline PotentialTable potential_table(const LiftSpec& lift) {
  PotentialTable t;
  const int n_states = lift.states();
  t.phi.resize(n_states);
  t.mu.resize(n_states);
  t.pi_lift.resize(n_states);
  Vector pi = stationary_distribution(lift.base);
  for (int idx = 0; idx < n_states; ++idx) {
    int i = lift.base_state(idx);
    std::vector<int> alpha = lift.winding(idx);
    double phi = lift.basis.tree_potential[i];
    for (int m = 0; m < lift.n; ++m) phi += alpha[m] * lift.basis.cycle_gains[m];
    t.phi[idx] = phi;
    t.mu[idx] = std::exp(-phi);
    t.pi_lift[idx] = pi[i];
  }
  return t;
}

/// Marginal over winding coordinates, renormalized by 1/(1 - lost_mass).
inline Vector fold(const LiftSpec& lift, const WindowedDistribution& w,
                   double fold_tol = 1e-9) {
  if (w.probs.size() != lift.states())
    fail(ErrorCode::validation, "distribution does not match the window");
  if (w.lost_mass > fold_tol)
    fail(ErrorCode::excessive_leak, "lost mass exceeds fold tolerance");
  const int k = lift.base.size();
  Vector p = Vector::Zero(k);
  for (int idx = 0; idx < w.probs.size(); ++idx)
    p[idx % k] += w.probs[idx];
  return p / (1.0 - w.lost_mass);
}

struct LiftSample {
  double t = 0.0;
  double e_p = 0.0;
  double dF_pi = 0.0;
  double dF_mu = 0.0;
  double Qhk_pi = 0.0;
  double Qhk_mu = 0.0;
  double F_pi = 0.0;
  double F_mu = 0.0;
  double E = 0.0;
  double H = 0.0;
  double cesaro_ep = 0.0;
  double lost_mass = 0.0;
};

using LiftSeries = std::vector<LiftSample>;

namespace detail {

inline LiftSample lift_thermo(const LiftSpec& lift, const PotentialTable& tab,
                              const Vector& p, double t, double lost) {
  LiftSample s;
  s.t = t;
  s.lost_mass = lost;
  for (const LiftedEdge& e : lift.edges) {
    double a = p[e.u] * e.q_uv, b = p[e.v] * e.q_vu;
    if (a == 0.0 && b == 0.0) continue;
    double d = a - b;
    double pu = std::max(p[e.u], kLogFloor), pv = std::max(p[e.v], kLogFloor);
    s.e_p += d * std::log(pu * e.q_uv / (pv * e.q_vu));
    s.dF_pi -= d * std::log(pu * tab.pi_lift[e.v] / (pv * tab.pi_lift[e.u]));
    s.Qhk_pi += d * std::log(tab.pi_lift[e.u] * e.q_uv /
                             (tab.pi_lift[e.v] * e.q_vu));
    s.dF_mu -= d * std::log(pu * tab.mu[e.v] / (pv * tab.mu[e.u]));
    s.Qhk_mu += d * std::log(tab.mu[e.u] * e.q_uv / (tab.mu[e.v] * e.q_vu));
  }
  for (int idx = 0; idx < p.size(); ++idx) {
    if (p[idx] > 0.0) {
      double lp = std::log(p[idx]);
      s.H -= p[idx] * lp;
      s.F_pi += p[idx] * (lp - std::log(tab.pi_lift[idx]));
    }
    s.E += p[idx] * tab.phi[idx];
  }
  s.F_mu = s.E - s.H;
  return s;
}

}  // namespace detail

struct LiftEvolveResult {
  LiftSeries series;
  WindowedDistribution final;
};

/// RK4 on the windowed master equation; flux leaving the window accumulates
/// into lost_mass. Thermo quantities are recorded every `output_every` steps;
/// the running Cesaro average integrates e_p with an open rule on the first
/// output interval (e_p may be singular at a delta start) and trapezoids
/// afterwards.
inline LiftEvolveResult evolve_lift(const LiftSpec& lift,
                                    const WindowedDistribution& w0,
                                    double t_end, double dt,
                                    int output_every = 10,
                                    double leak_abort = 1e-6) {
  check_step(dt, t_end, exit_rates(lift.base).maxCoeff());
  if (output_every < 1)
    fail(ErrorCode::validation, "output_every must be >= 1");
  if (w0.probs.size() != lift.states())
    fail(ErrorCode::validation, "distribution does not match the window");
  PotentialTable tab = potential_table(lift);
  const int steps = static_cast<int>(std::llround(t_end / dt));

  Vector p = w0.probs;
  double lost = w0.lost_mass;
  Vector dp(p.size()), k1(p.size()), k2(p.size()), k3(p.size()), k4(p.size());
  Vector tmp(p.size());
  double l1, l2, l3, l4;

  auto deriv = [&](const Vector& q, Vector& out, double& dlost) {
    out.setZero();
    for (const LiftedEdge& e : lift.edges) {
      double flux = q[e.u] * e.q_uv - q[e.v] * e.q_vu;
      out[e.u] -= flux;
      out[e.v] += flux;
    }
    dlost = 0.0;
    for (const LeakFlow& lf : lift.leaks) {
      double f = q[lf.u] * lf.rate;
      out[lf.u] -= f;
      dlost += f;
    }
  };

  LiftEvolveResult res;
  double integral = 0.0;
  LiftSample first = detail::lift_thermo(lift, tab, p, 0.0, lost);
  res.series.push_back(first);
  double prev_t = 0.0, prev_ep = first.e_p;
  bool first_interval = true;

  for (int s = 1; s <= steps; ++s) {
    deriv(p, k1, l1);
    tmp = p + 0.5 * dt * k1;
    deriv(tmp, k2, l2);
    tmp = p + 0.5 * dt * k2;
    deriv(tmp, k3, l3);
    tmp = p + dt * k3;
    deriv(tmp, k4, l4);
    p += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    lost += dt / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    if (lost > leak_abort)
      fail(ErrorCode::excessive_leak, "window leak exceeded abort threshold");
    if (s % output_every == 0 || s == steps) {
      double t = s * dt;
      LiftSample smp = detail::lift_thermo(lift, tab, p, t, lost);
      if (first_interval) {
        integral += smp.e_p * (t - prev_t);  // open rule at the start
        first_interval = false;
      } else {
        integral += 0.5 * (smp.e_p + prev_ep) * (t - prev_t);
      }
      smp.cesaro_ep = integral / t;
      prev_t = t;
      prev_ep = smp.e_p;
      res.series.push_back(smp);
    }
  }
  res.final.probs = std::move(p);
  res.final.lost_mass = lost;
  return res;
}

/// Trapezoidal (1/T) int_0^T e_p dt over the recorded grid, open rule on the
/// first interval.
inline double cesaro_epr(const LiftSeries& series, double T) {
  if (series.size() < 2 || T <= series[1].t ||
      T > series.back().t + 1e-9)
    fail(ErrorCode::insufficient_span, "series does not cover [0, T]");
  double integral = series[1].e_p * (series[1].t - series[0].t);
  size_t m = 1;
  for (; m + 1 < series.size() && series[m + 1].t <= T + 1e-9; ++m)
    integral += 0.5 * (series[m + 1].e_p + series[m].e_p) *
                (series[m + 1].t - series[m].t);
  return integral / series[m].t;
}

/// Least-squares slope of E(t) over samples with t in [t0, t1].
inline double energy_slope(const LiftSeries& series, double t0, double t1) {
  double n = 0, st = 0, se = 0, stt = 0, ste = 0;
  for (const LiftSample& s : series) {
    if (s.t < t0 - 1e-12 || s.t > t1 + 1e-12) continue;
    n += 1;
    st += s.t;
    se += s.E;
    stt += s.t * s.t;
    ste += s.t * s.E;
  }
  if (n < 2) fail(ErrorCode::insufficient_span, "window holds fewer than 2 samples");
  double denom = n * stt - st * st;
  if (denom == 0.0) fail(ErrorCode::insufficient_span, "degenerate time window");
  return (n * ste - st * se) / denom;
}

/// Mutual information MI^j(X_1, X_t) between the lifted chain at times 1 and
/// t, started from (j, 0), via the identity
///   MI = H^j_t - sum_i P(Xbar_1 = i | Xbar_0 = j) H^i_{t-1},
/// where translation invariance of the lift makes H^i_{t-1} depend only on
/// the base state i.
inline double mutual_information(const LiftSpec& lift, int start, double t,
                                 double dt = 0.0,
                                 double leak_tol = 1e-9) {
  if (!(t > 1.0))
    fail(ErrorCode::validation, "mutual information needs t > 1");
  double max_exit = exit_rates(lift.base).maxCoeff();
  if (dt <= 0.0) {
    // integer steps per unit time so that t and t-1 land on the grid
    int per_unit = static_cast<int>(std::ceil(10.0 * max_exit));
    dt = 1.0 / per_unit;
  }

  auto entropy_at = [&](int base_state, double horizon) {
    LiftEvolveResult r =
        evolve_lift(lift, delta_at(lift, base_state), horizon, dt,
                    std::max(1, static_cast<int>(std::llround(horizon / dt))),
                    leak_tol);
    return r.series.back().H;
  };

  double h_jt = entropy_at(start, t);
  Vector delta = Vector::Zero(lift.base.size());
  delta[start] = 1.0;
  Vector law1 = evolve_base(lift.base, delta, 1.0, dt).probs.back();
  double mixed = 0.0;
  for (int i = 0; i < lift.base.size(); ++i)
    if (law1[i] > 0.0) mixed += law1[i] * entropy_at(i, t - 1.0);
  return h_jt - mixed;
}

struct PathSample {
  std::vector<int64_t> winding;
  double potential_drop = 0.0;  // phi(start, 0) - phi(end)
};

struct SampleStats {
  std::vector<PathSample> paths;
  Vector mean_winding;
  double mean_drop_rate = 0.0;
  double se_drop_rate = 0.0;  // standard error of the mean rate
};

/// Exact-jump stochastic simulation of the lifted chain (exponential waiting
/// times, categorical jumps). Winding is tracked exactly, unbounded by the
/// window. Per-path RNG streams derive from (seed, path index), so results
/// are identical for any thread count.
inline SampleStats sample_paths(const LiftSpec& lift, int start, double t_end,
                                int n_paths, uint64_t seed, int threads = 1) {
  if (n_paths < 1) fail(ErrorCode::validation, "need at least one path");
  const int k = lift.base.size();
  struct Move {
    int to;
    double rate;
    int chord;  // special-edge index or -1
    int dir;    // +1 crossing u->v, -1 crossing v->u
  };
  std::vector<std::vector<Move>> moves(k);
  std::vector<int> chord(lift.base.edges.size(), -1);
  for (int m = 0; m < static_cast<int>(lift.basis.special_edges.size()); ++m)
    chord[lift.basis.special_edges[m].edge_index] = m;
  for (size_t em = 0; em < lift.base.edges.size(); ++em) {
    const Edge& e = lift.base.edges[em];
    moves[e.i].push_back({e.j, e.q_ij, chord[em], +1});
    moves[e.j].push_back({e.i, e.q_ji, chord[em], -1});
  }
  Vector exits = exit_rates(lift.base);

  SampleStats stats;
  stats.paths.resize(n_paths);
  auto run_path = [&](int idx) {
    std::seed_seq sq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                     static_cast<uint32_t>(idx), 0x9e3779b9u};
    std::mt19937_64 rng(sq);
    auto uniform = [&rng]() {
      return ((rng() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    };
    int state = start;
    std::vector<int64_t> alpha(lift.n, 0);
    double t = 0.0;
    while (true) {
      double lambda = exits[state];
      t += -std::log(uniform()) / lambda;
      if (t > t_end) break;
      double u = uniform() * lambda;
      double acc = 0.0;
      const Move* pick = &moves[state].back();
      for (const Move& mv : moves[state]) {
        acc += mv.rate;
        if (u <= acc) {
          pick = &mv;
          break;
        }
      }
      if (pick->chord >= 0) alpha[pick->chord] += pick->dir;
      state = pick->to;
    }
    double phi_end = lift.basis.tree_potential[state];
    for (int m = 0; m < lift.n; ++m)
      phi_end += static_cast<double>(alpha[m]) * lift.basis.cycle_gains[m];
    stats.paths[idx].winding = std::move(alpha);
    stats.paths[idx].potential_drop =
        lift.basis.tree_potential[start] - phi_end;
  };

  if (threads <= 1) {
    for (int idx = 0; idx < n_paths; ++idx) run_path(idx);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&, w]() {
        for (int idx = w; idx < n_paths; idx += threads) run_path(idx);
      });
    for (auto& th : pool) th.join();
  }

  stats.mean_winding = Vector::Zero(lift.n);
  double sum = 0.0, sum2 = 0.0;
  for (const PathSample& ps : stats.paths) {
    for (int m = 0; m < lift.n; ++m)
      stats.mean_winding[m] += static_cast<double>(ps.winding[m]);
    double rate = ps.potential_drop / t_end;
    sum += rate;
    sum2 += rate * rate;
  }
  if (lift.n > 0) stats.mean_winding /= static_cast<double>(n_paths);
  stats.mean_drop_rate = sum / n_paths;
  double var = (sum2 - sum * sum / n_paths) / std::max(1, n_paths - 1);
  stats.se_drop_rate = std::sqrt(std::max(0.0, var) / n_paths);
  return stats;
}

}  // namespace liftlab

#endif  // LIFTLAB_LIFT_HPP
