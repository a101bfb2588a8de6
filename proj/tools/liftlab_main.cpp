/**
 * liftlab: winding-lattice lifts of driven Markov chains and periodic
 * diffusions, with the full entropy-production battery.
 *
 * Subcommands: chain analyze|evolve, lift evolve|mi|sample,
 * fp evolve|stationary, verify. Hyphenated forms (chain-analyze, ...) are
 * accepted as aliases.
 */

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "liftlab/chain.hpp"
#include "liftlab/fokker_planck.hpp"
#include "liftlab/json_io.hpp"
#include "liftlab/lift.hpp"
#include "liftlab/topology.hpp"
#include "liftlab/verify.hpp"

namespace {

using namespace liftlab;

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty())
    std::cout << content;
  else
    atomic_write(out_path, content);
}

Vector parse_p0(const std::string& csv, int k) {
  std::vector<double> vals;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
  if (static_cast<int>(vals.size()) != k)
    fail(ErrorCode::config, "initial distribution has wrong length");
  Vector p(k);
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    p[i] = vals[i];
    sum += vals[i];
  }
  if (std::abs(sum - 1.0) > 1e-12)
    fail(ErrorCode::config, "initial distribution must sum to 1");
  return p;
}

int default_lift_radius(const ChainSpec& spec, double t_end) {
  return static_cast<int>(
      std::ceil(3.0 * t_end * exit_rates(spec).maxCoeff() + 10.0));
}

struct GlobalArgs {
  std::string out;
  uint64_t seed = 0;
  int threads = 1;
  std::string tol_overrides;
};

}  // namespace

int main(int argc, char** argv) {
  // accept `liftlab chain-analyze ...` as `liftlab chain analyze ...`
  std::vector<std::string> args(argv, argv + argc);
  if (args.size() > 1) {
    static const std::map<std::string, std::pair<std::string, std::string>>
        aliases = {{"chain-analyze", {"chain", "analyze"}},
                   {"chain-evolve", {"chain", "evolve"}},
                   {"lift-evolve", {"lift", "evolve"}},
                   {"lift-mi", {"lift", "mi"}},
                   {"lift-sample", {"lift", "sample"}},
                   {"fp-evolve", {"fp", "evolve"}},
                   {"fp-stationary", {"fp", "stationary"}}};
    auto it = aliases.find(args[1]);
    if (it != aliases.end()) {
      args[1] = it->second.first;
      args.insert(args.begin() + 2, it->second.second);
    }
  }

  CLI::App app{"winding-lattice lifts and entropy production"};
  app.require_subcommand(1);
  GlobalArgs g;
  app.add_option("--out", g.out, "output file (atomic write)");
  app.add_option("--seed", g.seed, "RNG seed");
  app.add_option("--threads", g.threads, "worker threads where supported");
  app.add_option("--tol-overrides", g.tol_overrides,
                 "JSON file {criterion id: tolerance} for verify");
  app.fallthrough();

  std::string chain_path, field_path, p0_csv, times_csv;
  int start = 0, radius = 0, grid_n = 0, n_paths = 10000;
  int every_lift = 10, every_fp = 0;
  double t_end = 10.0, dt = 0.0, init_mean = 0.0, init_sigma = 0.0;
  bool lift_mode = false;

  CLI::App* chain = app.add_subcommand("chain", "base-chain operations");
  CLI::App* chain_analyze =
      chain->add_subcommand("analyze", "cycle structure and stationary EPR");
  chain_analyze->add_option("--chain", chain_path, "chain JSON")->required();
  CLI::App* chain_evolve =
      chain->add_subcommand("evolve", "master-equation trajectory CSV");
  chain_evolve->add_option("--chain", chain_path, "chain JSON")->required();
  chain_evolve->add_option("--t-end", t_end, "final time")->required();
  chain_evolve->add_option("--dt", dt, "step (default 0.09/max exit rate)");
  chain_evolve->add_option("--p0", p0_csv, "comma-separated initial law");
  chain_evolve->add_option("--start", start, "delta start state (default 0)");

  CLI::App* lift = app.add_subcommand("lift", "winding-lattice lift");
  CLI::App* lift_evolve =
      lift->add_subcommand("evolve", "windowed lift evolution + thermo CSV");
  lift_evolve->add_option("--chain", chain_path, "chain JSON")->required();
  lift_evolve->add_option("--radius", radius,
                          "winding window radius (default 3 t q_max + 10)");
  lift_evolve->add_option("--t-end", t_end, "final time")->required();
  lift_evolve->add_option("--dt", dt, "step (default 0.09/max exit rate)");
  lift_evolve->add_option("--start", start, "delta start state");
  lift_evolve->add_option("--every", every_lift, "output every N steps");
  CLI::App* lift_mi =
      lift->add_subcommand("mi", "mutual information MI(X_1, X_t)");
  lift_mi->add_option("--chain", chain_path, "chain JSON")->required();
  lift_mi->add_option("--start", start, "start state")->required();
  lift_mi->add_option("--times", times_csv, "comma-separated times > 1")
      ->required();
  lift_mi->add_option("--radius", radius, "window radius");
  CLI::App* lift_sample =
      lift->add_subcommand("sample", "exact-jump path sampling");
  lift_sample->add_option("--chain", chain_path, "chain JSON")->required();
  lift_sample->add_option("--start", start, "start state");
  lift_sample->add_option("--t-end", t_end, "path horizon");
  lift_sample->add_option("--paths", n_paths, "number of paths");

  CLI::App* fp = app.add_subcommand("fp", "Fokker-Planck on T^n / R^n");
  CLI::App* fp_evolve = fp->add_subcommand("evolve", "torus or lifted run");
  fp_evolve->add_option("--field", field_path, "field JSON")->required();
  fp_evolve->add_flag("--lift", lift_mode, "absorbing window on R^n");
  fp_evolve->add_option("--t-end", t_end, "final time")->required();
  fp_evolve->add_option("--dt", dt, "step (default 0.9 x stability bound)");
  fp_evolve->add_option("--grid-n", grid_n, "cells per unit length");
  fp_evolve->add_option("--radius", radius, "window radius (lift)");
  fp_evolve->add_option("--init-mean", init_mean, "initial bump center");
  fp_evolve->add_option("--init-sigma", init_sigma,
                        "initial bump width (default: torus uniform, lift 1)");
  fp_evolve->add_option("--every", every_fp,
                        "output every N steps (0: about 400 samples)");
  CLI::App* fp_stationary =
      fp->add_subcommand("stationary", "stationary density CSV");
  fp_stationary->add_option("--field", field_path, "field JSON")->required();
  fp_stationary->add_option("--grid-n", grid_n, "cells per unit length");

  CLI::App* verify =
      app.add_subcommand("verify", "run the acceptance battery AC-1..AC-14");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    rev.pop_back();  // program name
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*chain_analyze) {
      ChainSpec spec = load_chain(chain_path);
      emit(g.out, analyze_to_json(spec).dump(2) + "\n");
    } else if (*chain_evolve) {
      ChainSpec spec = load_chain(chain_path);
      if (dt <= 0.0) dt = 0.09 / exit_rates(spec).maxCoeff();
      Vector p0;
      if (!p0_csv.empty()) {
        p0 = parse_p0(p0_csv, spec.size());
      } else {
        p0 = Vector::Zero(spec.size());
        if (start < 0 || start >= spec.size())
          fail(ErrorCode::config, "start state out of range");
        p0[start] = 1.0;
      }
      BaseTrajectory traj = evolve_base(spec, p0, t_end, dt);
      emit(g.out, base_trajectory_csv(traj, spec.size()));
    } else if (*lift_evolve) {
      ChainSpec spec = load_chain(chain_path);
      if (dt <= 0.0) dt = 0.09 / exit_rates(spec).maxCoeff();
      if (radius <= 0) radius = default_lift_radius(spec, t_end);
      LiftSpec ls = build_lift(spec, radius);
      if (start < 0 || start >= spec.size())
        fail(ErrorCode::config, "start state out of range");
      LiftEvolveResult res =
          evolve_lift(ls, delta_at(ls, start), t_end, dt, every_lift);
      emit(g.out, lift_series_csv(res.series));
    } else if (*lift_mi) {
      ChainSpec spec = load_chain(chain_path);
      std::vector<double> times;
      std::stringstream ss(times_csv);
      std::string tok;
      while (std::getline(ss, tok, ',')) times.push_back(std::stod(tok));
      double t_max = 0.0;
      for (double t : times) t_max = std::max(t_max, t);
      if (radius <= 0) radius = default_lift_radius(spec, t_max);
      LiftSpec ls = build_lift(spec, radius);
      std::ostringstream csv;
      csv << "t,mi\n";
      for (double t : times)
        csv << format_double(t) << ","
            << format_double(mutual_information(ls, start, t)) << "\n";
      emit(g.out, csv.str());
    } else if (*lift_sample) {
      ChainSpec spec = load_chain(chain_path);
      LiftSpec ls = build_lift(spec, 1);
      SampleStats stats =
          sample_paths(ls, start, t_end, n_paths, g.seed, g.threads);
      json summary;
      summary["mean_drop_rate"] = stats.mean_drop_rate;
      summary["se_drop_rate"] = stats.se_drop_rate;
      summary["mean_winding"] = std::vector<double>(
          stats.mean_winding.data(),
          stats.mean_winding.data() + stats.mean_winding.size());
      std::cout << summary.dump(2) << "\n";
      if (!g.out.empty()) atomic_write(g.out, sample_paths_csv(stats, ls.n));
    } else if (*fp_evolve) {
      PeriodicField field = load_field(field_path);
      if (grid_n > 0) field.grid_n = grid_n;
      if (lift_mode) {
        double bmax = 0.0, dmax = 0.0;
        for (int i = 0; i < 64; ++i) {
          double x = i / 64.0;
          for (int c = 0; c < field.dim; ++c) {
            bmax = std::max(bmax, std::abs(field.b(c, x, x)));
            dmax = std::max(dmax, std::abs(field.D(c, c, x, x)));
          }
        }
        double sigma = init_sigma > 0.0 ? init_sigma : 1.0;
        if (radius <= 0)
          radius = static_cast<int>(std::ceil(
              bmax * t_end + 6.0 * std::sqrt(2.0 * dmax * t_end) +
              4.0 * sigma));
        LiftedDensity f0 =
            lifted_gaussian(field.dim, field.grid_n, radius, init_mean, sigma);
        FpEvolveResult res = evolve_fp_lifted(field, f0, t_end, dt, every_fp);
        emit(g.out, fp_series_csv(res.series, field.dim));
      } else {
        TorusDensity f0 =
            init_sigma > 0.0
                ? torus_bump(field.dim, field.grid_n, init_mean, init_sigma)
                : uniform_density(field.dim, field.grid_n);
        FpEvolveResult res = evolve_fp_torus(field, f0, t_end, dt, every_fp);
        emit(g.out, fp_series_csv(res.series, field.dim));
      }
    } else if (*fp_stationary) {
      PeriodicField field = load_field(field_path);
      if (grid_n > 0) field.grid_n = grid_n;
      TorusDensity rho = stationary_density(field);
      std::ostringstream csv;
      if (field.dim == 1) {
        csv << "x,rho\n";
        for (int i = 0; i < rho.grid.m; ++i)
          csv << format_double(rho.grid.center(i)) << ","
              << format_double(rho.f[i]) << "\n";
      } else {
        csv << "x,y,rho\n";
        for (int i = 0; i < rho.grid.m; ++i)
          for (int j = 0; j < rho.grid.m; ++j)
            csv << format_double(rho.grid.center(i)) << ","
                << format_double(rho.grid.center(j)) << ","
                << format_double(rho.f[rho.grid.flat(i, j)]) << "\n";
      }
      emit(g.out, csv.str());
    } else if (*verify) {
      VerifyOptions vo;
      vo.threads = g.threads;
      if (!g.tol_overrides.empty()) {
        json jo = parse_json_file(g.tol_overrides);
        for (auto it = jo.begin(); it != jo.end(); ++it)
          vo.tol_overrides[it.key()] = it.value().get<double>();
      }
      std::vector<CriterionResult> results = run_acceptance(vo);
      std::string report = format_results(results);
      std::cout << report;
      if (!g.out.empty()) atomic_write(g.out, report);
      for (const CriterionResult& r : results)
        if (!r.pass) return 1;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_status();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
