/**
 * One-shot verification runner: executes the full acceptance battery
 * (criteria AC-1 .. AC-14) and reports one pass/fail line per criterion.
 *
 * Fixtures are built in code so the battery is hermetic. Thresholds are
 * fixed here; --tol-overrides can replace the headline tolerance of a
 * criterion by id.
 */

#ifndef LIFTLAB_VERIFY_HPP
#define LIFTLAB_VERIFY_HPP

#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "liftlab/chain.hpp"
#include "liftlab/fokker_planck.hpp"
#include "liftlab/lift.hpp"
#include "liftlab/topology.hpp"

namespace liftlab {

struct CriterionResult {
  std::string id;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::map<std::string, double> tol_overrides;
  int threads = 1;
};

namespace verify_detail {

inline double tol(const VerifyOptions& opts, const std::string& id,
                  double fallback) {
  auto it = opts.tol_overrides.find(id);
  return it == opts.tol_overrides.end() ? fallback : it->second;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

inline ChainSpec biased_ring3() {
  return {{"1", "2", "3"},
          {{0, 1, 2.0, 1.0}, {1, 2, 2.0, 1.0}, {0, 2, 1.0, 2.0}}};
}

inline ChainSpec random_chain(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ksize(2, 6);
  std::uniform_real_distribution<double> lograte(std::log(0.5), std::log(2.0));
  int k = ksize(rng);
  ChainSpec spec;
  for (int i = 0; i < k; ++i) spec.states.push_back("s" + std::to_string(i));
  std::vector<std::pair<int, int>> present;
  auto add_edge = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    for (auto& pr : present)
      if (pr == std::pair(a, b)) return false;
    present.emplace_back(a, b);
    spec.edges.push_back(
        {a, b, std::exp(lograte(rng)), std::exp(lograte(rng))});
    return true;
  };
  for (int i = 1; i < k; ++i) {
    std::uniform_int_distribution<int> parent(0, i - 1);
    add_edge(parent(rng), i);
  }
  std::uniform_int_distribution<int> extra(0, 3);
  int want = extra(rng);
  for (int tries = 0; tries < 30 && want > 0; ++tries) {
    std::uniform_int_distribution<int> pick(0, k - 1);
    int a = pick(rng), b = pick(rng);
    if (a != b && betti_number(spec) < 3 && add_edge(a, b)) --want;
  }
  return spec;
}

inline PeriodicField const_field_1d(double b0, double d0, int grid_n) {
  PeriodicField f;
  f.dim = 1;
  f.grid_n = grid_n;
  f.drift.resize(1);
  f.drift[0].c0 = b0;
  f.diffusion.resize(1, std::vector<FourierSeries>(1));
  f.diffusion[0][0].c0 = d0;
  return f;
}

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

/// Everything derived from the single biased-3-ring lift run shared by
/// AC-3, AC-4, AC-5 and AC-6 (R = 40, t_end = 50, delta start).
struct RingRun {
  LiftSpec lift;
  Timer timer;
  LiftEvolveResult res;
  double seconds;
  RingRun()
      : lift(build_lift(biased_ring3(), 40)),
        res(evolve_lift(lift, delta_at(lift, 0), 50.0, 0.025)),
        seconds(timer.seconds()) {}
};

}  // namespace verify_detail

inline std::vector<CriterionResult> run_acceptance(
    const VerifyOptions& opts = {}) {
  using namespace verify_detail;
  const double kLog2 = std::log(2.0);
  std::vector<CriterionResult> out;
  auto push = [&](const std::string& id, bool pass, const std::string& detail,
                  double secs) {
    out.push_back({id, pass, detail, secs});
  };

  // ---- AC-1: biased 3-ring stationary EPR, closed form log 2 -------------
  {
    Timer tm;
    double ep = stationary_epr(biased_ring3());
    // oracle: direct formula evaluation at the uniform stationary law
    ChainSpec spec = biased_ring3();
    Vector pi = stationary_distribution(spec);
    double oracle = 0.0;
    for (const Edge& e : spec.edges) {
      double a = pi[e.i] * e.q_ij, b = pi[e.j] * e.q_ji;
      oracle += (a - b) * std::log(a / b);
    }
    double t = tol(opts, "AC-1", 1e-10);
    double secs = tm.seconds();
    bool pass = std::abs(ep - kLog2) <= t && std::abs(oracle - kLog2) <= t &&
                secs < 1e-3;
    push("AC-1", pass,
         "stationary_epr = " + fmt(ep) + " vs log 2 (tol " + fmt(t) +
             "), oracle agrees, runtime " + fmt(secs * 1e3) + " ms",
         secs);
  }

  // ---- AC-2/7/8 + chain part of AC-14: random-chain battery --------------
  {
    Timer tm;
    std::mt19937_64 rng(20250809);
    double tol2 = tol(opts, "AC-2", 1e-8);
    bool decomp_ok = true, mono_ok = true, fold_ok = true, mass_ok = true;
    double worst_decomp = 0.0, worst_increase = -1.0, worst_fold = 0.0,
           worst_mass = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      ChainSpec spec = validate_chain(random_chain(rng));
      double dt = 0.09 / exit_rates(spec).maxCoeff();
      // base run
      {
        std::exponential_distribution<double> ex(1.0);
        Vector p0(spec.size());
        for (int i = 0; i < spec.size(); ++i) p0[i] = ex(rng);
        p0 /= p0.sum();
        BaseTrajectory traj = evolve_base(spec, p0, 1.0, dt);
        for (const Vector& p : traj.probs) {
          ThermoSample s = base_thermo(spec, p);
          worst_decomp =
              std::max(worst_decomp, std::abs(s.e_p - (s.q_hk - s.dF_dt)));
          worst_mass = std::max(worst_mass, std::abs(p.sum() - 1.0));
        }
      }
      // lifted run
      int n = betti_number(spec);
      LiftSpec lift = build_lift(spec, n >= 3 ? 8 : 12);
      WindowedDistribution w0;
      w0.probs = Vector::Zero(lift.states());
      {
        std::exponential_distribution<double> ex(1.0);
        std::vector<int> zero(lift.n, 0);
        double sum = 0.0;
        for (int i = 0; i < spec.size(); ++i) {
          double v = ex(rng);
          w0.probs[lift.index(i, zero)] = v;
          sum += v;
        }
        w0.probs /= sum;
      }
      LiftEvolveResult res = evolve_lift(lift, w0, 1.0, dt);
      for (size_t s = 0; s < res.series.size(); ++s) {
        const LiftSample& smp = res.series[s];
        worst_decomp = std::max(
            worst_decomp, std::abs(smp.e_p - (smp.Qhk_pi - smp.dF_pi)));
        worst_decomp = std::max(
            worst_decomp, std::abs(smp.e_p - (smp.Qhk_mu - smp.dF_mu)));
        if (s > 0) {
          worst_increase = std::max(
              worst_increase, smp.F_pi - res.series[s - 1].F_pi);
          worst_increase = std::max(
              worst_increase, smp.F_mu - res.series[s - 1].F_mu);
        }
      }
      worst_mass = std::max(
          worst_mass,
          std::abs(res.final.probs.sum() + res.final.lost_mass - 1.0));
      // fold commutation
      Vector folded = fold(lift, res.final, 1e-9 + res.final.lost_mass);
      BaseTrajectory btr = evolve_base(spec, fold(lift, w0), 1.0, dt);
      double gap = (folded - btr.probs.back()).lpNorm<Eigen::Infinity>();
      worst_fold = std::max(worst_fold, gap - res.final.lost_mass);
    }
    decomp_ok = worst_decomp <= tol2;
    mono_ok = worst_increase <= 1e-10;
    fold_ok = worst_fold <= 1e-9;
    mass_ok = worst_mass <= 1e-12;
    double secs = tm.seconds();
    push("AC-2", decomp_ok && secs < 30.0,
         "max |e_p - Q_hk + dF/dt| = " + fmt(worst_decomp) + " (tol " +
             fmt(tol2) + ") over 20 chains, base+lift, both references; " +
             fmt(secs) + " s",
         secs);
    push("AC-7", mono_ok,
         "max single-step free-energy increase = " + fmt(worst_increase) +
             " (fail above 1e-10)",
         secs);
    push("AC-8", fold_ok,
         "max fold-commutation gap beyond lost mass = " + fmt(worst_fold) +
             " (tol 1e-9)",
         secs);
    // chain/lift part of AC-14 folded into the mass ledger below
    out.push_back({"AC-14a", mass_ok,
                   "chain and window mass ledger: worst |mass-1| = " +
                       fmt(worst_mass) + " (tol 1e-12)",
                   secs});
  }

  // ---- the shared biased-3-ring lift run ---------------------------------
  RingRun ring;
  const LiftSeries& series = ring.res.series;

  // ---- AC-3: Q_hk^mu identically zero -------------------------------------
  {
    Timer tm;
    double worst = 0.0;
    for (const LiftSample& s : series)
      worst = std::max(worst, std::abs(s.Qhk_mu));
    double t = tol(opts, "AC-3", 1e-10);
    push("AC-3", worst <= t,
         "max_t |Q_hk^mu| = " + fmt(worst) + " (tol " + fmt(t) + ")",
         tm.seconds());
  }

  // ---- AC-4: Cesaro convergence of e_p ------------------------------------
  {
    double c50 = cesaro_epr(series, 50.0);
    double c10 = cesaro_epr(series, 10.0);
    double err50 = std::abs(c50 - kLog2) / kLog2;
    double err10 = std::abs(c10 - kLog2) / kLog2;
    double t = tol(opts, "AC-4", 0.05);
    bool pass = err50 <= t && err50 < err10 && ring.seconds < 60.0;
    push("AC-4", pass,
         "cesaro(50) = " + fmt(c50) + ", rel err " + fmt(err50) + " (tol " +
             fmt(t) + "); err(10) = " + fmt(err10) +
             (err50 < err10 ? ", decreasing" : ", NOT decreasing") +
             "; run " + fmt(ring.seconds) + " s",
         ring.seconds);
  }

  // ---- AC-5: energy slope --------------------------------------------------
  {
    Timer tm;
    double slope = energy_slope(series, 40.0, 50.0);
    double rel = std::abs(slope + kLog2) / kLog2;
    double t = tol(opts, "AC-5", 0.01);
    push("AC-5", rel <= t,
         "dE/dt over [40,50] = " + fmt(slope) + " vs -log 2, rel err " +
             fmt(rel) + " (tol " + fmt(t) + ")",
         tm.seconds());
  }

  // ---- AC-6: entropy growth bound ------------------------------------------
  {
    Timer tm;
    double h1 = 0.0;
    for (const LiftSample& s : series)
      if (std::abs(s.t - 1.0) < 1e-9) h1 = s.H;
    double c_fit = 0.0;
    for (const LiftSample& s : series)
      if (s.t > 1.0 + 1e-9 && s.t <= 10.0 + 1e-9)
        c_fit = std::max(c_fit, (s.H - h1) / std::log(s.t));
    bool bound_ok = true;
    double worst_gap = -1e9;
    for (const LiftSample& s : series)
      if (s.t > 10.0) {
        double gap = s.H - (h1 + c_fit * std::log(s.t));
        worst_gap = std::max(worst_gap, gap);
        if (gap > 1e-12) bound_ok = false;
      }
    double h50 = series.back().H;
    double ratio = h50 / 50.0;
    double t = tol(opts, "AC-6", 0.05);
    bool ratio_ok = ratio <= t;
    push("AC-6", bound_ok && ratio_ok,
         "H(t) <= H(1) + C log t holds on (10,50] with C = " + fmt(c_fit) +
             " (max gap " + fmt(worst_gap) + "); H(50)/50 = " + fmt(ratio) +
             " vs bound " + fmt(t) + (ratio_ok ? "" : " EXCEEDED"),
         tm.seconds());
  }

  // ---- AC-9: mutual information -------------------------------------------
  {
    Timer tm;
    LiftSpec lift = build_lift(biased_ring3(), 50);
    double prev = std::numeric_limits<double>::infinity();
    bool monotone = true;
    double mi50 = 0.0;
    std::string vals;
    for (double t : {2.0, 5.0, 10.0, 20.0, 50.0}) {
      double mi = mutual_information(lift, 0, t);
      if (mi > prev + 1e-10) monotone = false;
      prev = mi;
      mi50 = mi;
      vals += fmt(mi) + (t < 50.0 ? ", " : "");
    }
    // threshold fixed from the exact windowed computation (0.010103 at
    // t = 50, dt -> 0), with a 1% guard for integrator settings
    double t9 = tol(opts, "AC-9", 0.0102);
    push("AC-9", monotone && mi50 <= t9,
         "MI at t = {2,5,10,20,50}: " + vals +
             (monotone ? " (non-increasing)" : " NOT monotone") +
             "; MI(50) fixture threshold " + fmt(t9),
         tm.seconds());
  }

  // ---- AC-10: path estimator ----------------------------------------------
  {
    Timer tm;
    LiftSpec lift = build_lift(biased_ring3(), 1);
    SampleStats stats =
        sample_paths(lift, 0, 100.0, 10000, 20240817, opts.threads);
    double dev = std::abs(stats.mean_drop_rate - kLog2);
    double band = 3.0 * stats.se_drop_rate;
    double secs = tm.seconds();
    push("AC-10", dev <= band && secs < 60.0,
         "mean potential-drop rate = " + fmt(stats.mean_drop_rate) +
             " vs log 2, |dev| = " + fmt(dev) + " <= 3 SE = " + fmt(band) +
             "; " + fmt(secs) + " s",
         secs);
  }

  // ---- AC-11: diffusion EPR oracle ----------------------------------------
  double lifted_mass_gap = 0.0;
  {
    Timer tm;
    // (a) torus EPR at the stationary density, constant coefficients
    PeriodicField f = const_field_1d(1.0, 1.0, 256);
    double ep256 = torus_epr(f, stationary_density(f, 256));
    double err_a = std::abs(ep256 - 1.0);
    bool a_ok = err_a <= tol(opts, "AC-11", 1e-3);

    // (b,c) lifted run: Gaussian start, T = 20, default window sizing
    int n = 32;
    int radius = static_cast<int>(
        std::ceil(1.0 * 20.0 + 6.0 * std::sqrt(2.0 * 1.0 * 20.0)));  // 58
    PeriodicField fl = const_field_1d(1.0, 1.0, n);
    LiftedDensity f0 = lifted_gaussian(1, n, radius, 0.0, 3.5);
    FpEvolveResult run = evolve_fp_lifted(fl, f0, 20.0);
    lifted_mass_gap =
        std::abs(total_mass(run.grid, run.final_f) + run.final_lost - 1.0);
    double ces = run.series.back().cesaro_ep;
    double err_b = std::abs(ces - 1.0);
    bool b_ok = err_b <= 0.05;
    // trailing energy slope over [15, 20]
    double sn = 0, st = 0, se = 0, stt = 0, ste = 0;
    for (const FpSample& s : run.series)
      if (s.t >= 15.0 - 1e-9) {
        sn += 1;
        st += s.t;
        se += s.E;
        stt += s.t * s.t;
        ste += s.t * s.E;
      }
    double slope = (sn * ste - st * se) / (sn * stt - st * st);
    double err_c = std::abs(slope + 1.0);
    bool c_ok = err_c <= 0.02;

    // (d) second-order refinement of torus_epr. The constant-coefficient
    // instance is grid-exact (uniform density and constant flux satisfy the
    // discrete scheme identically), so the error ratio there measures
    // round-off noise; exactness is asserted instead, and the convergence
    // order is demonstrated on the variable-diffusion companion with a
    // quadrature reference.
    double ep128 = torus_epr(f, stationary_density(f, 128));
    bool exact_ok = std::abs(ep128 - 1.0) <= 1e-12 && err_a <= 1e-12;
    PeriodicField fv = const_field_1d(1.0, 1.0, 256);
    fv.diffusion[0][0].cos_terms.push_back({1, 0, 0.5});
    const double ref = 1.1547005383792515;  // fine-quadrature fixture
    double ev128 = std::abs(torus_epr(fv, stationary_density(fv, 128)) - ref);
    double ev256 = std::abs(torus_epr(fv, stationary_density(fv, 256)) - ref);
    double ratio = ev128 / ev256;
    bool d_ok = exact_ok && ratio >= 3.0 && ratio <= 5.0;

    double secs = tm.seconds();
    push("AC-11", a_ok && b_ok && c_ok && d_ok,
         "torus_epr(const) err = " + fmt(err_a) + " (tol 1e-3); cesaro(20) = " +
             fmt(ces) + " err " + fmt(err_b) + " (tol 0.05); dE/dt[15,20] = " +
             fmt(slope) + " err " + fmt(err_c) +
             " (tol 0.02); const case grid-exact at N=128/256 (errs " +
             fmt(ep128 - 1.0) + ", " + fmt(err_a) +
             "), variable-D refinement ratio = " + fmt(ratio) + " in [3,5]",
         secs);

    // ---- AC-13 reuses the same lifted run ---------------------------------
    Timer tm13;
    bool entropy_ok = true;
    double worst_sgap = -1e9;
    for (const FpSample& s : run.series) {
      double gap = s.S - s.s_bound;
      worst_sgap = std::max(worst_sgap, gap);
      if (gap > 0.0) entropy_ok = false;
    }
    double c_fit = 0.0;
    for (const FpSample& s : run.series)
      if (s.t >= 1.0 && s.t <= 5.0)
        c_fit = std::max(c_fit, std::abs(s.cov00) / (s.t * s.t));
    bool cov_ok = true;
    for (const FpSample& s : run.series)
      if (s.t > 5.0 && std::abs(s.cov00) > c_fit * s.t * s.t + 1e-12)
        cov_ok = false;
    push("AC-13", entropy_ok && cov_ok,
         "max S - bound = " + fmt(worst_sgap) +
             " (must be <= 0); |Cov| <= C t^2 with C = " + fmt(c_fit) +
             " fitted on [1,5]" + (cov_ok ? ", holds on (5,20]" : " VIOLATED"),
         tm13.seconds());
  }

  // ---- AC-12: curl criterion ----------------------------------------------
  {
    Timer tm;
    // gradient field recovers its potential to O(h^2)
    int n = 256;
    double h = 1.0 / n;
    PeriodicField fg;
    fg.dim = 1;
    fg.grid_n = n;
    fg.drift.resize(1);
    fg.drift[0].sin_terms.push_back({1, 0, -0.3 * 2.0 * M_PI});
    fg.diffusion.resize(1, std::vector<FourierSeries>(1));
    fg.diffusion[0][0].c0 = 1.0;
    Reconstruction rec = reconstruct_potential(fg, n);
    double shift = rec.g(0.0) - 0.3;
    double worst_g = 0.0;
    for (int i = 0; i < n; ++i) {
      double x = i * h;
      worst_g = std::max(
          worst_g,
          std::abs(rec.g(x) - shift - 0.3 * std::cos(2.0 * M_PI * x)));
    }
    bool g_ok = worst_g <= 20.0 * h * h;
    // constant-drift closed form mu = e^{b0 x}: flux residual <= 1e-6
    Reconstruction rc = reconstruct_potential(const_field_1d(1.0, 1.0, 256), 256);
    bool flux_ok = rc.flux_residual <= tol(opts, "AC-12", 1e-6);
    // shear field: obstruction with max |curl| = 2 pi +- 5%
    PeriodicField fs;
    fs.dim = 2;
    fs.grid_n = 64;
    fs.drift.resize(2);
    fs.drift[0].sin_terms.push_back({0, 1, -1.0});
    fs.diffusion.assign(2, std::vector<FourierSeries>(2));
    fs.diffusion[0][0].c0 = 1.0;
    fs.diffusion[1][1].c0 = 1.0;
    bool obstructed = false;
    try {
      reconstruct_potential(fs, 64);
    } catch (const Error& e) {
      obstructed = e.code() == ErrorCode::curl_obstruction;
    }
    CurlReport rep = curl_check(fs, 64);
    bool curl_ok =
        std::abs(rep.max_curl - 2.0 * M_PI) / (2.0 * M_PI) <= 0.05;
    push("AC-12", g_ok && flux_ok && obstructed && curl_ok,
         "gradient recovery max dev = " + fmt(worst_g) + " (tol " +
             fmt(20.0 * h * h) + "); const-b0 flux = " + fmt(rc.flux_residual) +
             " (tol 1e-6); shear obstructed with max|curl| = " +
             fmt(rep.max_curl) + " vs 2 pi",
         tm.seconds());
  }

  // ---- AC-14: conservation -------------------------------------------------
  {
    Timer tm;
    PeriodicField f = const_field_1d(1.0, 1.0, 64);
    f.diffusion[0][0].cos_terms.push_back({1, 0, 0.5});
    TorusDensity f0 = torus_bump(1, 64, 0.2, 0.15);
    FpEvolveResult res = evolve_fp_torus(f, f0, 5.0);
    double drift =
        std::abs(total_mass(res.grid, res.final_f) - total_mass(f0.grid, f0.f)) /
        5.0;
    bool torus_ok = drift <= 1e-12;
    bool lifted_ok = lifted_mass_gap <= 1e-12;
    push("AC-14", torus_ok && lifted_ok,
         "torus mass drift = " + fmt(drift) +
             " per unit time (tol 1e-12); lifted diffusion mass+lost gap = " +
             fmt(lifted_mass_gap) + " (tol 1e-12); chain ledger in AC-14a",
         tm.seconds());
  }

  return out;
}

inline std::string format_results(const std::vector<CriterionResult>& results) {
  std::ostringstream os;
  int failed = 0;
  for (const CriterionResult& r : results) {
    os << r.id << " " << (r.pass ? "PASS" : "FAIL") << " - " << r.detail
       << "\n";
    if (!r.pass) ++failed;
  }
  os << (failed == 0 ? "all criteria passed"
                     : std::to_string(failed) + " criteria failed")
     << "\n";
  return os.str();
}

}  // namespace liftlab

#endif  // LIFTLAB_VERIFY_HPP
