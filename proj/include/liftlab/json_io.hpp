/**
 * JSON parsing/emission for chain and field configurations, CSV emission for
 * the thermodynamic series, and atomic output writing.
 *
 * All parsers reject unknown keys. Floats are written with 17 significant
 * digits so reruns diff byte-identically.
 */

#ifndef LIFTLAB_JSON_IO_HPP
#define LIFTLAB_JSON_IO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "liftlab/chain.hpp"
#include "liftlab/errors.hpp"
#include "liftlab/fokker_planck.hpp"
#include "liftlab/lift.hpp"
#include "liftlab/topology.hpp"

namespace liftlab {

using nlohmann::json;

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void reject_unknown_keys(const json& obj,
                                std::initializer_list<const char*> allowed,
                                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* key : allowed)
      if (it.key() == key) {
        ok = true;
        break;
      }
    if (!ok)
      fail(ErrorCode::config, "unknown key '" + it.key() + "' in " + where);
  }
}

inline json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::config, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::config, std::string("JSON parse error in ") + path + ": " +
                                e.what());
  }
}

// ---------------------------------------------------------------------------
// chain config
// ---------------------------------------------------------------------------

inline ChainSpec chain_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::config, "chain config must be an object");
  reject_unknown_keys(j, {"states", "edges"}, "chain config");
  ChainSpec spec;
  try {
    spec.states = j.at("states").get<std::vector<std::string>>();
    for (const json& je : j.at("edges")) {
      reject_unknown_keys(je, {"i", "j", "q_ij", "q_ji"}, "edge");
      Edge e;
      e.i = je.at("i").get<int>();
      e.j = je.at("j").get<int>();
      e.q_ij = je.at("q_ij").get<double>();
      e.q_ji = je.at("q_ji").get<double>();
      spec.edges.push_back(e);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::config, std::string("bad chain config: ") + e.what());
  }
  return spec;
}

inline ChainSpec load_chain(const std::string& path) {
  return validate_chain(chain_from_json(parse_json_file(path)));
}

inline json chain_to_json(const ChainSpec& spec) {
  json j;
  j["states"] = spec.states;
  j["edges"] = json::array();
  for (const Edge& e : spec.edges)
    j["edges"].push_back(
        {{"i", e.i}, {"j", e.j}, {"q_ij", e.q_ij}, {"q_ji", e.q_ji}});
  return j;
}

/// `chain analyze` output: topology plus stationary quantities.
inline json analyze_to_json(const ChainSpec& spec) {
  CycleBasis basis = build_cycle_basis(spec);
  Vector pi = stationary_distribution(spec);
  json j;
  j["betti"] = betti_number(spec);
  j["tree_edges"] = basis.tree_edges;
  j["special_edges"] = json::array();
  for (const SpecialEdge& se : basis.special_edges)
    j["special_edges"].push_back(
        {{"edge_index", se.edge_index}, {"u", se.u}, {"v", se.v}});
  j["cycle_gains"] = std::vector<double>(
      basis.cycle_gains.data(), basis.cycle_gains.data() + basis.cycle_gains.size());
  j["tree_potential"] = std::vector<double>(
      basis.tree_potential.data(),
      basis.tree_potential.data() + basis.tree_potential.size());
  j["pi"] = std::vector<double>(pi.data(), pi.data() + pi.size());
  j["stationary_epr"] = stationary_epr(spec);
  j["has_global_potential"] = has_global_potential(basis, 1e-10);
  return j;
}

// ---------------------------------------------------------------------------
// field config
// ---------------------------------------------------------------------------

inline FourierSeries series_from_json(const json& j, int dim) {
  if (!j.is_object()) fail(ErrorCode::config, "Fourier series must be an object");
  reject_unknown_keys(j, {"const", "cos", "sin"}, "Fourier series");
  FourierSeries s;
  try {
    if (j.contains("const")) s.c0 = j.at("const").get<double>();
    auto parse_terms = [&](const char* key, std::vector<FourierSeries::Term>& out) {
      if (!j.contains(key)) return;
      for (const json& t : j.at(key)) {
        if (!t.is_array() || t.size() != 2)
          fail(ErrorCode::config, "harmonic term must be [k, coeff]");
        FourierSeries::Term term;
        if (t[0].is_array()) {
          if (dim != 2 || t[0].size() != 2)
            fail(ErrorCode::config, "vector harmonic requires dim 2");
          term.k1 = t[0][0].get<int>();
          term.k2 = t[0][1].get<int>();
        } else {
          term.k1 = t[0].get<int>();
        }
        term.coeff = t[1].get<double>();
        out.push_back(term);
      }
    };
    parse_terms("cos", s.cos_terms);
    parse_terms("sin", s.sin_terms);
  } catch (const json::exception& e) {
    fail(ErrorCode::config, std::string("bad Fourier series: ") + e.what());
  }
  return s;
}

inline PeriodicField field_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::config, "field config must be an object");
  reject_unknown_keys(j, {"dim", "drift", "diffusion", "grid_n"}, "field config");
  PeriodicField f;
  try {
    f.dim = j.at("dim").get<int>();
    if (j.contains("grid_n")) f.grid_n = j.at("grid_n").get<int>();
    for (const json& s : j.at("drift")) f.drift.push_back(series_from_json(s, f.dim));
    for (const json& row : j.at("diffusion")) {
      std::vector<FourierSeries> r;
      for (const json& s : row) r.push_back(series_from_json(s, f.dim));
      f.diffusion.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::config, std::string("bad field config: ") + e.what());
  }
  return validate_field(f);
}

inline PeriodicField load_field(const std::string& path) {
  return field_from_json(parse_json_file(path));
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

inline std::string base_trajectory_csv(const BaseTrajectory& traj, int k) {
  std::ostringstream out;
  out << "t";
  for (int i = 0; i < k; ++i) out << ",p_" << i;
  out << "\n";
  for (size_t s = 0; s < traj.times.size(); ++s) {
    out << format_double(traj.times[s]);
    for (int i = 0; i < k; ++i) out << "," << format_double(traj.probs[s][i]);
    out << "\n";
  }
  return out.str();
}

inline std::string lift_series_csv(const LiftSeries& series) {
  std::ostringstream out;
  out << "t,e_p,dF_pi,dF_mu,Qhk_pi,Qhk_mu,F_pi,F_mu,E,H,cesaro_ep,lost_mass\n";
  for (const LiftSample& s : series) {
    out << format_double(s.t) << "," << format_double(s.e_p) << ","
        << format_double(s.dF_pi) << "," << format_double(s.dF_mu) << ","
        << format_double(s.Qhk_pi) << "," << format_double(s.Qhk_mu) << ","
        << format_double(s.F_pi) << "," << format_double(s.F_mu) << ","
        << format_double(s.E) << "," << format_double(s.H) << ","
        << format_double(s.cesaro_ep) << "," << format_double(s.lost_mass)
        << "\n";
  }
  return out.str();
}

inline std::string fp_series_csv(const FpSeries& series, int dim) {
  std::ostringstream out;
  out << "t,e_p,dF_rho,dF_mu,Qhk_rho,Qhk_mu,F_rho,F_mu,E,S,cesaro_ep,lost_mass,"
      << (dim == 1 ? "cov_00" : "cov_00,cov_01,cov_11") << ",S_bound\n";
  for (const FpSample& s : series) {
    out << format_double(s.t) << "," << format_double(s.e_p) << ","
        << format_double(s.dF_rho) << "," << format_double(s.dF_mu) << ","
        << format_double(s.Qhk_rho) << "," << format_double(s.Qhk_mu) << ","
        << format_double(s.F_rho) << "," << format_double(s.F_mu) << ","
        << format_double(s.E) << "," << format_double(s.S) << ","
        << format_double(s.cesaro_ep) << "," << format_double(s.lost_mass)
        << "," << format_double(s.cov00);
    if (dim == 2)
      out << "," << format_double(s.cov01) << "," << format_double(s.cov11);
    out << "," << format_double(s.s_bound) << "\n";
  }
  return out.str();
}

inline std::string sample_paths_csv(const SampleStats& stats, int n) {
  std::ostringstream out;
  out << "path";
  for (int m = 0; m < n; ++m) out << ",w_" << m;
  out << ",potential_drop\n";
  for (size_t idx = 0; idx < stats.paths.size(); ++idx) {
    out << idx;
    for (int m = 0; m < n; ++m) out << "," << stats.paths[idx].winding[m];
    out << "," << format_double(stats.paths[idx].potential_drop) << "\n";
  }
  return out.str();
}

/// Writes via a temporary file in the same directory plus rename, so an
/// abort never leaves a partially written output.
inline void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::config, "cannot write " + tmp.string());
    out << content;
    if (!out.flush()) fail(ErrorCode::config, "write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace liftlab

#endif  // LIFTLAB_JSON_IO_HPP
