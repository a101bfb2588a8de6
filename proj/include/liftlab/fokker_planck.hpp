/**
 * Finite-volume Fokker-Planck solver for periodic-coefficient diffusions on
 * T^1/T^2 and their lifts to R^1/R^2.
 *
 * Spatial scheme: flux-form central differences on the advection-diffusion
 * form df/dt = -div J, J = b_eff f - D grad f at faces, with effective drift
 * b_eff = b - div D; mass-conservative by construction, second order.
 *
 * Thermo integrands use the product-rule cell-centered flux
 *   J = D grad_c f + (div D - b) f
 * with grad_c the central difference, so that e_p = J^T D^{-1} J / f,
 * dF^nu/dt and Q_hk^nu satisfy the decomposition identity termwise exactly.
 */

#ifndef LIFTLAB_FOKKER_PLANCK_HPP
#define LIFTLAB_FOKKER_PLANCK_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "liftlab/errors.hpp"
#include "liftlab/chain.hpp"  // Vector/Matrix aliases, kLogFloor

namespace liftlab {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// periodic coefficient fields as truncated Fourier series (period 1 per axis)
// ---------------------------------------------------------------------------

struct FourierSeries {
  struct Term {
    int k1 = 0, k2 = 0;
    double coeff = 0.0;
  };
  double c0 = 0.0;
  std::vector<Term> cos_terms;
  std::vector<Term> sin_terms;

  double eval(double x, double y = 0.0) const {
    double s = c0;
    for (const Term& t : cos_terms)
      s += t.coeff * std::cos(2.0 * M_PI * (t.k1 * x + t.k2 * y));
    for (const Term& t : sin_terms)
      s += t.coeff * std::sin(2.0 * M_PI * (t.k1 * x + t.k2 * y));
    return s;
  }
  // d/dx_axis (axis: 0 or 1)
  double deriv(int axis, double x, double y = 0.0) const {
    double s = 0.0;
    for (const Term& t : cos_terms) {
      double w = 2.0 * M_PI * (axis == 0 ? t.k1 : t.k2);
      s -= t.coeff * w * std::sin(2.0 * M_PI * (t.k1 * x + t.k2 * y));
    }
    for (const Term& t : sin_terms) {
      double w = 2.0 * M_PI * (axis == 0 ? t.k1 : t.k2);
      s += t.coeff * w * std::cos(2.0 * M_PI * (t.k1 * x + t.k2 * y));
    }
    return s;
  }
  int max_harmonic() const {
    int k = 0;
    for (const Term& t : cos_terms)
      k = std::max({k, std::abs(t.k1), std::abs(t.k2)});
    for (const Term& t : sin_terms)
      k = std::max({k, std::abs(t.k1), std::abs(t.k2)});
    return k;
  }
};

struct PeriodicField {
  int dim = 1;
  int grid_n = 64;                              // default resolution
  std::vector<FourierSeries> drift;             // size dim
  std::vector<std::vector<FourierSeries>> diffusion;  // dim x dim

  double b(int comp, double x, double y = 0.0) const {
    return drift[comp].eval(x, y);
  }
  double D(int r, int c, double x, double y = 0.0) const {
    return diffusion[r][c].eval(x, y);
  }
  // (div D)_r = sum_c dD_rc/dx_c
  double divD(int r, double x, double y = 0.0) const {
    double s = diffusion[r][0].deriv(0, x, y);
    if (dim == 2) s += diffusion[r][1].deriv(1, x, y);
    return s;
  }
  double beff(int comp, double x, double y = 0.0) const {
    return b(comp, x, y) - divD(comp, x, y);
  }
};

/// Structural validation plus the SPD check of D on the grid nodes.
inline PeriodicField validate_field(const PeriodicField& field) {
  if (field.dim != 1 && field.dim != 2)
    fail(ErrorCode::validation, "dim must be 1 or 2");
  if (static_cast<int>(field.drift.size()) != field.dim ||
      static_cast<int>(field.diffusion.size()) != field.dim)
    fail(ErrorCode::validation, "drift/diffusion shape does not match dim");
  for (const auto& row : field.diffusion)
    if (static_cast<int>(row.size()) != field.dim)
      fail(ErrorCode::validation, "diffusion matrix is not dim x dim");
  int kmax = 0;
  for (const auto& s : field.drift) kmax = std::max(kmax, s.max_harmonic());
  for (const auto& row : field.diffusion)
    for (const auto& s : row) kmax = std::max(kmax, s.max_harmonic());
  if (kmax > 8) fail(ErrorCode::validation, "max harmonic exceeds 8");
  if (field.grid_n < 8) fail(ErrorCode::validation, "grid_n too small");

  const int probe = std::max(field.grid_n, 64);
  const double h = 1.0 / probe;
  for (int i = 0; i < probe; ++i)
    for (int j = 0; j < (field.dim == 2 ? probe : 1); ++j) {
      double x = i * h, y = j * h;
      if (field.dim == 1) {
        if (field.D(0, 0, x) < 1e-8)
          fail(ErrorCode::validation, "diffusion not positive definite");
      } else {
        double a = field.D(0, 0, x, y), d = field.D(1, 1, x, y);
        double b01 = field.D(0, 1, x, y), b10 = field.D(1, 0, x, y);
        if (std::abs(b01 - b10) > 1e-12)
          fail(ErrorCode::validation, "diffusion matrix not symmetric");
        double tr = a + d, det = a * d - b01 * b01;
        double lam_min = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4 * det)));
        if (lam_min < 1e-8)
          fail(ErrorCode::validation, "diffusion not positive definite");
      }
    }
  return field;
}

// ---------------------------------------------------------------------------
// grids and densities
// ---------------------------------------------------------------------------

struct FpGrid {
  int dim = 1;
  int n_per_unit = 64;  // cells per unit length
  int m = 64;           // cells per axis
  double h = 0.0;
  double x0 = 0.0;      // left edge
  bool periodic = true;

  int cells() const { return dim == 1 ? m : m * m; }
  double center(int i) const { return x0 + (i + 0.5) * h; }
  int flat(int i, int j) const { return i * m + j; }
};

inline FpGrid torus_grid(int dim, int n) {
  FpGrid g;
  g.dim = dim;
  g.n_per_unit = n;
  g.m = n;
  g.h = 1.0 / n;
  g.x0 = 0.0;
  g.periodic = true;
  return g;
}

inline FpGrid window_grid(int dim, int n, int radius) {
  if (radius < 1) fail(ErrorCode::window_too_small, "window radius must be >= 1");
  FpGrid g;
  g.dim = dim;
  g.n_per_unit = n;
  g.m = 2 * radius * n;
  g.h = 1.0 / n;
  g.x0 = -static_cast<double>(radius);
  g.periodic = false;
  return g;
}

struct TorusDensity {
  FpGrid grid;
  Vector f;  // cell-averaged values
};

struct LiftedDensity {
  FpGrid grid;
  Vector f;
  double lost_mass = 0.0;
};

inline double cell_volume(const FpGrid& g) {
  return g.dim == 1 ? g.h : g.h * g.h;
}

inline double total_mass(const FpGrid& g, const Vector& f) {
  return f.sum() * cell_volume(g);
}

inline TorusDensity uniform_density(int dim, int n) {
  TorusDensity d;
  d.grid = torus_grid(dim, n);
  d.f = Vector::Ones(d.grid.cells());
  return d;
}

/// Periodic Gaussian-like bump on the torus, normalized to unit mass.
inline TorusDensity torus_bump(int dim, int n, double mean, double sigma) {
  TorusDensity d;
  d.grid = torus_grid(dim, n);
  d.f.resize(d.grid.cells());
  auto bump1 = [&](double x) {
    double r = x - mean;
    r -= std::round(r);  // wrap to [-0.5, 0.5)
    return std::exp(-0.5 * r * r / (sigma * sigma));
  };
  if (dim == 1) {
    for (int i = 0; i < d.grid.m; ++i) d.f[i] = bump1(d.grid.center(i));
  } else {
    for (int i = 0; i < d.grid.m; ++i)
      for (int j = 0; j < d.grid.m; ++j)
        d.f[d.grid.flat(i, j)] = bump1(d.grid.center(i)) * bump1(d.grid.center(j));
  }
  d.f /= total_mass(d.grid, d.f);
  return d;
}

inline LiftedDensity lifted_gaussian(int dim, int n, int radius, double mean,
                                     double sigma) {
  LiftedDensity d;
  d.grid = window_grid(dim, n, radius);
  d.f.resize(d.grid.cells());
  auto g1 = [&](double x) {
    double r = (x - mean) / sigma;
    return std::exp(-0.5 * r * r);
  };
  if (dim == 1) {
    for (int i = 0; i < d.grid.m; ++i) d.f[i] = g1(d.grid.center(i));
  } else {
    for (int i = 0; i < d.grid.m; ++i)
      for (int j = 0; j < d.grid.m; ++j)
        d.f[d.grid.flat(i, j)] = g1(d.grid.center(i)) * g1(d.grid.center(j));
  }
  d.f /= total_mass(d.grid, d.f);
  return d;
}

// ---------------------------------------------------------------------------
// finite-volume engine
// ---------------------------------------------------------------------------

namespace fpdetail {

/// Precomputed face/cell coefficient tables for one grid.
struct Stencil {
  FpGrid g;
  // dim 1: faces 0..m (periodic uses 0..m-1, face i between cells i, i+1)
  std::vector<double> beff1, d11;  // axis-1 faces
  std::vector<double> beff2, d22, d21;  // axis-2 faces (dim 2)
  std::vector<double> d12;              // cross term on axis-1 faces (dim 2)
  // cell-centered analytic values
  std::vector<double> bc1, bc2, divd1, divd2;
  std::vector<double> dc11, dc12, dc22;
};

inline Stencil build_stencil(const PeriodicField& fld, const FpGrid& g) {
  Stencil s;
  s.g = g;
  const int m = g.m;
  const double h = g.h;
  if (g.dim == 1) {
    int nf = g.periodic ? m : m + 1;
    s.beff1.resize(nf);
    s.d11.resize(nf);
    for (int i = 0; i < nf; ++i) {
      double xf = g.periodic ? g.x0 + (i + 1) * h : g.x0 + i * h;
      s.beff1[i] = fld.beff(0, xf);
      s.d11[i] = fld.D(0, 0, xf);
    }
    s.bc1.resize(m);
    s.divd1.resize(m);
    s.dc11.resize(m);
    for (int i = 0; i < m; ++i) {
      double xc = g.center(i);
      s.bc1[i] = fld.b(0, xc);
      s.divd1[i] = fld.divD(0, xc);
      s.dc11[i] = fld.D(0, 0, xc);
    }
  } else {
    // axis-1 faces: (nfx) x m ; axis-2 faces: m x (nfy)
    int nf = g.periodic ? m : m + 1;
    s.beff1.resize(nf * m);
    s.d11.resize(nf * m);
    s.d12.resize(nf * m);
    for (int i = 0; i < nf; ++i)
      for (int j = 0; j < m; ++j) {
        double xf = g.periodic ? g.x0 + (i + 1) * h : g.x0 + i * h;
        double yc = g.center(j);
        s.beff1[i * m + j] = fld.beff(0, xf, yc);
        s.d11[i * m + j] = fld.D(0, 0, xf, yc);
        s.d12[i * m + j] = fld.D(0, 1, xf, yc);
      }
    s.beff2.resize(m * nf);
    s.d22.resize(m * nf);
    s.d21.resize(m * nf);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < nf; ++j) {
        double xc = g.center(i);
        double yf = g.periodic ? g.x0 + (j + 1) * h : g.x0 + j * h;
        s.beff2[i * nf + j] = fld.beff(1, xc, yf);
        s.d22[i * nf + j] = fld.D(1, 1, xc, yf);
        s.d21[i * nf + j] = fld.D(1, 0, xc, yf);
      }
    s.bc1.resize(m * m);
    s.bc2.resize(m * m);
    s.divd1.resize(m * m);
    s.divd2.resize(m * m);
    s.dc11.resize(m * m);
    s.dc12.resize(m * m);
    s.dc22.resize(m * m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double x = g.center(i), y = g.center(j);
        int c = g.flat(i, j);
        s.bc1[c] = fld.b(0, x, y);
        s.bc2[c] = fld.b(1, x, y);
        s.divd1[c] = fld.divD(0, x, y);
        s.divd2[c] = fld.divD(1, x, y);
        s.dc11[c] = fld.D(0, 0, x, y);
        s.dc12[c] = fld.D(0, 1, x, y);
        s.dc22[c] = fld.D(1, 1, x, y);
      }
  }
  return s;
}

inline double stability_dt(const Stencil& s) {
  double max_d = 0.0, max_b = 0.0;
  for (double v : s.d11) max_d = std::max(max_d, std::abs(v));
  for (double v : s.d22) max_d = std::max(max_d, std::abs(v));
  for (double v : s.beff1) max_b = std::max(max_b, std::abs(v));
  for (double v : s.beff2) max_b = std::max(max_b, std::abs(v));
  double h = s.g.h;
  return h * h / (2.0 * s.g.dim * max_d + h * max_b);
}

/// df/dt = -div J with face fluxes; returns outward leak rate for absorbing
/// grids (zero for periodic).
inline double apply_generator(const Stencil& s, const Vector& f, Vector& out) {
  const FpGrid& g = s.g;
  const int m = g.m;
  const double h = g.h;
  out.setZero();
  double leak = 0.0;
  if (g.dim == 1) {
    if (g.periodic) {
      for (int i = 0; i < m; ++i) {
        int r = (i + 1) % m;
        double flux =
            s.beff1[i] * 0.5 * (f[i] + f[r]) - s.d11[i] * (f[r] - f[i]) / h;
        out[i] -= flux / h;
        out[r] += flux / h;
      }
    } else {
      // faces 0..m with ghost zero
      double fl = -s.d11[0] * (f[0] - 0.0) / h + s.beff1[0] * 0.5 * f[0];
      out[0] += fl / h;
      leak -= fl;  // outward through the left face is -fl
      for (int i = 0; i + 1 < m; ++i) {
        double flux = s.beff1[i + 1] * 0.5 * (f[i] + f[i + 1]) -
                      s.d11[i + 1] * (f[i + 1] - f[i]) / h;
        out[i] -= flux / h;
        out[i + 1] += flux / h;
      }
      double fr = s.beff1[m] * 0.5 * f[m - 1] - s.d11[m] * (0.0 - f[m - 1]) / h;
      out[m - 1] -= fr / h;
      leak += fr;
    }
  } else {
    auto fat = [&](int i, int j) -> double {
      if (g.periodic) return f[g.flat((i + m) % m, (j + m) % m)];
      if (i < 0 || j < 0 || i >= m || j >= m) return 0.0;
      return f[g.flat(i, j)];
    };
    int nf = g.periodic ? m : m + 1;
    // axis-1 faces: face index i in [0, nf), between cells (i-1, j) and (i, j)
    // for absorbing; periodic face i sits between cells i and i+1.
    for (int i = 0; i < nf; ++i)
      for (int j = 0; j < m; ++j) {
        int li = g.periodic ? i : i - 1;  // left cell index
        int ri = g.periodic ? (i + 1) % m : i;
        double fl = fat(li, j), fr = fat(ri, j);
        double df2 = (fat(li, j + 1) + fat(ri, j + 1) - fat(li, j - 1) -
                      fat(ri, j - 1)) /
                     (4.0 * h);
        int fc = i * m + j;
        double flux = s.beff1[fc] * 0.5 * (fl + fr) -
                      (s.d11[fc] * (fr - fl) / h + s.d12[fc] * df2);
        if (li >= 0 && li < m) out[g.flat(li, j)] -= flux / h;
        else leak -= flux * h;
        if (ri >= 0 && ri < m) out[g.flat(ri, j)] += flux / h;
        else leak += flux * h;
      }
    // axis-2 faces
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < nf; ++j) {
        int lj = g.periodic ? j : j - 1;
        int rj = g.periodic ? (j + 1) % m : j;
        double fl = fat(i, lj), fr = fat(i, rj);
        double df1 = (fat(i + 1, lj) + fat(i + 1, rj) - fat(i - 1, lj) -
                      fat(i - 1, rj)) /
                     (4.0 * h);
        int fc = i * nf + j;
        double flux = s.beff2[fc] * 0.5 * (fl + fr) -
                      (s.d22[fc] * (fr - fl) / h + s.d21[fc] * df1);
        if (lj >= 0 && lj < m) out[g.flat(i, lj)] -= flux / h;
        else leak -= flux * h;
        if (rj >= 0 && rj < m) out[g.flat(i, rj)] += flux / h;
        else leak += flux * h;
      }
  }
  return leak;
}

/// Cell-centered gradient (central; ghost zero outside absorbing windows).
inline void central_gradient(const FpGrid& g, const Vector& f, Vector& g1,
                             Vector& g2) {
  const int m = g.m;
  const double h = g.h;
  if (g.dim == 1) {
    g1.resize(m);
    for (int i = 0; i < m; ++i) {
      double fp = (i + 1 < m) ? f[i + 1] : (g.periodic ? f[0] : 0.0);
      double fm = (i - 1 >= 0) ? f[i - 1] : (g.periodic ? f[m - 1] : 0.0);
      g1[i] = (fp - fm) / (2.0 * h);
    }
  } else {
    auto fat = [&](int i, int j) -> double {
      if (g.periodic) return f[g.flat((i + m) % m, (j + m) % m)];
      if (i < 0 || j < 0 || i >= m || j >= m) return 0.0;
      return f[g.flat(i, j)];
    };
    g1.resize(m * m);
    g2.resize(m * m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        int c = g.flat(i, j);
        g1[c] = (fat(i + 1, j) - fat(i - 1, j)) / (2.0 * h);
        g2[c] = (fat(i, j + 1) - fat(i, j - 1)) / (2.0 * h);
      }
  }
}

/// Thermo bracket vectors: for each cell the vector
///   w = grad(nu)/nu + D^-1 div D - D^-1 b
/// built from a reference measure's log-gradient table (may be analytic).
struct ThermoContext {
  Stencil st;
  // log-gradient of rho (tiled periodically onto the grid), per axis
  Vector rho_lg1, rho_lg2;
  Vector rho_cells;  // rho tiled onto this grid's cells
  bool has_mu = false;
  Vector v1, v2;   // analytic grad g = -D^-1(div D - b) at cells (mu case)
  Vector phi;      // -g at cells
};

inline double dot_dinv(const Stencil& s, int c, double j1, double j2) {
  if (s.g.dim == 1) return j1 * j1 / s.dc11[c];
  double det = s.dc11[c] * s.dc22[c] - s.dc12[c] * s.dc12[c];
  // J^T D^-1 J via adjugate
  return (s.dc22[c] * j1 * j1 - 2.0 * s.dc12[c] * j1 * j2 +
          s.dc11[c] * j2 * j2) /
         det;
}

}  // namespace fpdetail

// ---------------------------------------------------------------------------
// stationary density and entropy production on the torus
// ---------------------------------------------------------------------------

/// Nullspace of the discrete flux-form generator with a normalization row,
/// by sparse LU. Post: stationarity residual <= 1e-10.
inline TorusDensity stationary_density(const PeriodicField& field, int n = 0) {
  PeriodicField fld = validate_field(field);
  if (n <= 0) n = fld.grid_n;
  FpGrid g = torus_grid(fld.dim, n);
  fpdetail::Stencil st = fpdetail::build_stencil(fld, g);
  const int mcells = g.cells();

  // assemble the generator column-by-column through the stencil; the grid is
  // small enough at desk scale that clarity wins over triplet bookkeeping
  const double vol = cell_volume(g);
  std::vector<Eigen::Triplet<double>> trip_sys;
  {
    Vector unit = Vector::Zero(mcells), col(mcells);
    for (int c = 0; c < mcells; ++c) {
      unit[c] = 1.0;
      fpdetail::apply_generator(st, unit, col);
      unit[c] = 0.0;
      for (int r = 0; r + 1 < mcells; ++r)
        if (col[r] != 0.0) trip_sys.emplace_back(r, c, col[r]);
      trip_sys.emplace_back(mcells - 1, c, vol);  // normalization row
    }
  }
  Eigen::SparseMatrix<double> sys(mcells, mcells);
  sys.setFromTriplets(trip_sys.begin(), trip_sys.end());
  sys.makeCompressed();
  Vector rhs = Vector::Zero(mcells);
  rhs[mcells - 1] = 1.0;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(sys);
  if (lu.info() != Eigen::Success)
    fail(ErrorCode::singular_solve, "sparse LU factorization failed");
  Vector rho = lu.solve(rhs);
  if (!rho.allFinite())
    fail(ErrorCode::singular_solve, "stationary solve returned non-finite values");
  Vector resid(mcells);
  fpdetail::apply_generator(st, rho, resid);
  if (resid.lpNorm<Eigen::Infinity>() > 1e-10)
    fail(ErrorCode::singular_solve, "stationary residual exceeds 1e-10");
  TorusDensity d;
  d.grid = g;
  d.f = rho;
  return d;
}

/// Midpoint quadrature of J^T D^-1 J / f with the cell-centered product-rule
/// flux; always >= 0.
inline double torus_epr(const PeriodicField& field, const TorusDensity& den) {
  PeriodicField fld = validate_field(field);
  fpdetail::Stencil st = fpdetail::build_stencil(fld, den.grid);
  Vector g1, g2;
  fpdetail::central_gradient(den.grid, den.f, g1, g2);
  double vol = cell_volume(den.grid);
  double s = 0.0;
  for (int c = 0; c < den.grid.cells(); ++c) {
    double fz = std::max(den.f[c], kLogFloor);
    double j1 = st.dc11[c] * g1[c] + (st.divd1[c] - st.bc1[c]) * den.f[c];
    double j2 = 0.0;
    if (den.grid.dim == 2)
      j2 = st.dc12[c] * g1[c] + st.dc22[c] * g2[c] +
           (st.divd2[c] - st.bc2[c]) * den.f[c];
    if (den.grid.dim == 2) j1 += st.dc12[c] * g2[c];
    s += vol * fpdetail::dot_dinv(st, c, j1, j2) / fz;
  }
  return s;
}

// ---------------------------------------------------------------------------
// curl test and potential reconstruction
// ---------------------------------------------------------------------------

struct CurlReport {
  double max_curl = 0.0;  // 0 for dim 1
  Vector loop;            // loop integrals of v around each torus axis
};

/// v = -D^-1 (div D - b) on nodes x = i h; discrete curl by central
/// differences (dim 2); loop integrals of v along each axis by the
/// rectangle rule (exact for truncated Fourier data).
inline CurlReport curl_check(const PeriodicField& field, int n = 0) {
  PeriodicField fld = validate_field(field);
  if (n <= 0) n = fld.grid_n;
  const double h = 1.0 / n;
  CurlReport rep;
  rep.loop = Vector::Zero(fld.dim);
  auto v_at = [&](double x, double y, int comp) {
    if (fld.dim == 1) return -(fld.divD(0, x) - fld.b(0, x)) / fld.D(0, 0, x);
    double r1 = -(fld.divD(0, x, y) - fld.b(0, x, y));
    double r2 = -(fld.divD(1, x, y) - fld.b(1, x, y));
    double d11 = fld.D(0, 0, x, y), d12 = fld.D(0, 1, x, y),
           d22 = fld.D(1, 1, x, y);
    double det = d11 * d22 - d12 * d12;
    double v1 = (d22 * r1 - d12 * r2) / det;
    double v2 = (-d12 * r1 + d11 * r2) / det;
    return comp == 0 ? v1 : v2;
  };
  if (fld.dim == 1) {
    for (int i = 0; i < n; ++i) rep.loop[0] += h * v_at(i * h, 0.0, 0);
    return rep;
  }
  std::vector<double> v1(n * n), v2(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      v1[i * n + j] = v_at(i * h, j * h, 0);
      v2[i * n + j] = v_at(i * h, j * h, 1);
    }
  auto at = [&](const std::vector<double>& v, int i, int j) {
    return v[((i + n) % n) * n + (j + n) % n];
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double c = (at(v1, i, j + 1) - at(v1, i, j - 1)) / (2 * h) -
                 (at(v2, i + 1, j) - at(v2, i - 1, j)) / (2 * h);
      rep.max_curl = std::max(rep.max_curl, std::abs(c));
    }
  for (int i = 0; i < n; ++i) {
    rep.loop[0] += h * at(v1, i, 0);
    rep.loop[1] += h * at(v2, 0, i);
  }
  return rep;
}

/// Lifted potential g with grad g = v: linear part (loop integral per axis)
/// plus periodic part, by trapezoidal line integration along axis-first
/// paths from the origin.
struct Reconstruction {
  PeriodicField field;
  Vector loop;             // linear coefficients
  double max_curl = 0.0;
  double flux_residual = 0.0;  // max face flux of mu over one period

  double v(int comp, double x, double y = 0.0) const {
    if (field.dim == 1)
      return -(field.divD(0, x) - field.b(0, x)) / field.D(0, 0, x);
    double r1 = -(field.divD(0, x, y) - field.b(0, x, y));
    double r2 = -(field.divD(1, x, y) - field.b(1, x, y));
    double d11 = field.D(0, 0, x, y), d12 = field.D(0, 1, x, y),
           d22 = field.D(1, 1, x, y);
    double det = d11 * d22 - d12 * d12;
    return comp == 0 ? (d22 * r1 - d12 * r2) / det
                     : (-d12 * r1 + d11 * r2) / det;
  }

  /// Trapezoidal integral of v along the axis-first path 0 -> (x,0) -> (x,y),
  /// stepped at h with a fractional last step per leg.
  double g(double x, double y = 0.0, int n = 0) const {
    int nn = n > 0 ? n : field.grid_n;
    double h = 1.0 / nn;
    auto leg = [&](int comp, double from, double to, double ox, double oy) {
      double dir = to >= from ? 1.0 : -1.0;
      double len = std::abs(to - from);
      int steps = static_cast<int>(std::floor(len / h + 1e-12));
      double s = 0.0, pos = from;
      for (int q = 0; q < steps; ++q) {
        double nxt = pos + dir * h;
        double va = comp == 0 ? v(0, pos, oy) : v(1, ox, pos);
        double vb = comp == 0 ? v(0, nxt, oy) : v(1, ox, nxt);
        s += 0.5 * (va + vb) * (nxt - pos);
        pos = nxt;
      }
      if (std::abs(to - pos) > 1e-14) {
        double va = comp == 0 ? v(0, pos, oy) : v(1, ox, pos);
        double vb = comp == 0 ? v(0, to, oy) : v(1, ox, to);
        s += 0.5 * (va + vb) * (to - pos);
      }
      return s;
    };
    double total = leg(0, 0.0, x, 0.0, 0.0);
    if (field.dim == 2) total += leg(1, 0.0, y, x, 0.0);
    return total;
  }
};

inline Reconstruction reconstruct_potential(const PeriodicField& field,
                                            int n = 0) {
  PeriodicField fld = validate_field(field);
  if (n <= 0) n = fld.grid_n;
  const double h = 1.0 / n;
  CurlReport rep = curl_check(fld, n);
  if (rep.max_curl > 10.0 * h * h)
    fail(ErrorCode::curl_obstruction,
         "v = -D^-1(div D - b) is not curl-free; no detailed-balanced measure");
  Reconstruction rec;
  rec.field = fld;
  rec.loop = rep.loop;
  rec.max_curl = rep.max_curl;

  // face-flux residual of mu = e^g over one period, geometric face mean
  double supg = -std::numeric_limits<double>::infinity();
  std::vector<double> gn(fld.dim == 1 ? n : n * n);
  for (int i = 0; i < n; ++i) {
    if (fld.dim == 1) {
      gn[i] = rec.g(i * h, 0.0, n);
      supg = std::max(supg, gn[i]);
    } else {
      for (int j = 0; j < n; ++j) {
        gn[i * n + j] = rec.g(i * h, j * h, n);
        supg = std::max(supg, gn[i * n + j]);
      }
    }
  }
  auto mu_at = [&](int i, int j, double wrap_x, double wrap_y) {
    double gv = fld.dim == 1 ? gn[i] : gn[i * n + j];
    return std::exp(gv + wrap_x * rec.loop[0] +
                    (fld.dim == 2 ? wrap_y * rec.loop[1] : 0.0) - supg);
  };
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < (fld.dim == 2 ? n : 1); ++j) {
      // axis-1 face between node i and i+1 (wrapping adds the linear part)
      int ip = (i + 1) % n;
      double wrap = (i + 1 == n) ? 1.0 : 0.0;
      double xm = (i + 0.5) * h, ym = j * h;
      double mu_a = mu_at(i, j, 0, 0), mu_b = mu_at(ip, j, wrap, 0);
      double grad = (mu_b - mu_a) / h;
      double geo = std::sqrt(mu_a * mu_b);
      double flux = fld.D(0, 0, xm, ym) * grad +
                    (fld.divD(0, xm, ym) - fld.b(0, xm, ym)) * geo;
      if (fld.dim == 2) {
        double dmu2 = (mu_at(i, (j + 1) % n, 0, (j + 1 == n) ? 1 : 0) -
                       mu_at(i, (j - 1 + n) % n, 0, (j == 0) ? -1 : 0)) /
                      (2 * h);
        double dmu2p = (mu_at(ip, (j + 1) % n, wrap, (j + 1 == n) ? 1 : 0) -
                        mu_at(ip, (j - 1 + n) % n, wrap, (j == 0) ? -1 : 0)) /
                       (2 * h);
        flux += fld.D(0, 1, xm, ym) * 0.5 * (dmu2 + dmu2p);
      }
      worst = std::max(worst, std::abs(flux));
      if (fld.dim == 2) {
        int jp = (j + 1) % n;
        double wr2 = (j + 1 == n) ? 1.0 : 0.0;
        double xm2 = i * h, ym2 = (j + 0.5) * h;
        double mu_c = mu_at(i, jp, 0, wr2);
        double grad2 = (mu_c - mu_a) / h;
        double geo2 = std::sqrt(mu_a * mu_c);
        double dmu1 = (mu_at((i + 1) % n, j, (i + 1 == n) ? 1 : 0, 0) -
                       mu_at((i - 1 + n) % n, j, (i == 0) ? -1 : 0, 0)) /
                      (2 * h);
        double dmu1p = (mu_at((i + 1) % n, jp, (i + 1 == n) ? 1 : 0, wr2) -
                        mu_at((i - 1 + n) % n, jp, (i == 0) ? -1 : 0, wr2)) /
                       (2 * h);
        double flux2 = fld.D(1, 1, xm2, ym2) * grad2 +
                       fld.D(1, 0, xm2, ym2) * 0.5 * (dmu1 + dmu1p) +
                       (fld.divD(1, xm2, ym2) - fld.b(1, xm2, ym2)) * geo2;
        worst = std::max(worst, std::abs(flux2));
      }
    }
  rec.flux_residual = worst;
  return rec;
}

// ---------------------------------------------------------------------------
// time evolution with thermodynamic series
// ---------------------------------------------------------------------------

struct FpSample {
  double t = 0.0;
  double e_p = 0.0;
  double dF_rho = kNaN;
  double dF_mu = kNaN;
  double Qhk_rho = kNaN;
  double Qhk_mu = kNaN;
  double F_rho = kNaN;
  double F_mu = kNaN;
  double E = kNaN;
  double S = 0.0;
  double cesaro_ep = 0.0;
  double lost_mass = 0.0;
  double cov00 = kNaN, cov01 = kNaN, cov11 = kNaN;
  double s_bound = kNaN;
};

using FpSeries = std::vector<FpSample>;

/// Max-entropy-at-fixed-covariance bound 0.5 [n + log((2 pi)^n det Sigma)].
inline double gaussian_entropy_bound(const Matrix& cov, int n) {
  if (cov.rows() != n || cov.cols() != n)
    fail(ErrorCode::non_psd, "covariance has wrong shape");
  if ((cov - cov.transpose()).lpNorm<Eigen::Infinity>() >
      1e-10 * std::max(1.0, cov.lpNorm<Eigen::Infinity>()))
    fail(ErrorCode::non_psd, "covariance not symmetric");
  double det = n == 1 ? cov(0, 0) : cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  if (!(det > 0.0) || cov(0, 0) < 0.0)
    fail(ErrorCode::non_psd, "covariance not positive definite");
  return 0.5 * (n + std::log(std::pow(2.0 * M_PI, n) * det));
}

namespace fpdetail {

struct EvolveConfig {
  double t_end = 1.0;
  double dt = 0.0;          // <= 0: 0.9 x stability bound
  int output_every = 0;     // <= 0: ~400 samples
  double leak_abort = 1e-6;
  double neg_abort = -1e-10;
};

/// Shared RK4 driver; thermo recorded on the output grid. rho / mu context
/// entries may be empty (NaN columns).
template <typename Recorder>
inline void rk4_evolve(const Stencil& st, Vector& f, double& lost,
                       const EvolveConfig& cfg, Recorder&& record) {
  double bound = stability_dt(st);
  double dt = cfg.dt > 0.0 ? cfg.dt : 0.9 * bound;
  if (dt > bound * (1.0 + 1e-12))
    fail(ErrorCode::step_too_large,
         "dt exceeds h^2/(2n max|D| + h max|b_eff|)");
  int steps = static_cast<int>(std::ceil(cfg.t_end / dt - 1e-12));
  dt = cfg.t_end / steps;
  int every = cfg.output_every > 0 ? cfg.output_every
                                   : std::max(1, steps / 400);
  const int m = f.size();
  Vector k1(m), k2(m), k3(m), k4(m), tmp(m);
  record(0.0, f, lost);
  for (int s = 1; s <= steps; ++s) {
    double l1 = apply_generator(st, f, k1);
    tmp = f + 0.5 * dt * k1;
    double l2 = apply_generator(st, tmp, k2);
    tmp = f + 0.5 * dt * k2;
    double l3 = apply_generator(st, tmp, k3);
    tmp = f + dt * k3;
    double l4 = apply_generator(st, tmp, k4);
    f += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    lost += dt / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    if (s % every == 0 || s == steps) {
      if (f.minCoeff() < cfg.neg_abort)
        fail(ErrorCode::negative_density, "cell density fell below -1e-10");
      if (lost > cfg.leak_abort)
        fail(ErrorCode::excessive_leak, "window leak exceeded abort threshold");
      record(s * dt, f, lost);
    }
  }
}

struct ThermoTables {
  Vector rho, rho_lg1, rho_lg2;  // reference rho on this grid + log-gradients
  bool has_mu = false;
  Vector v1, v2, phi;            // analytic grad g and phi = -g at cells
};

/// Tile the torus stationary density (and its central log-gradient) onto an
/// arbitrary grid with the same spacing; build mu tables from a
/// reconstruction when available.
inline ThermoTables build_thermo_tables(const FpGrid& grid,
                                        const TorusDensity& rho,
                                        const Reconstruction* rec) {
  ThermoTables tb;
  const int nt = rho.grid.m;
  Vector lg1, lg2;
  central_gradient(rho.grid, rho.f, lg1, lg2);
  const int m = grid.m;
  tb.rho.resize(grid.cells());
  tb.rho_lg1.resize(grid.cells());
  if (grid.dim == 2) tb.rho_lg2.resize(grid.cells());
  auto wrap = [&](int i) { return ((i % nt) + nt) % nt; };
  // cells of any grid with spacing h = 1/n land exactly on torus cells
  double inv_h = 1.0 / grid.h;
  for (int i = 0; i < m; ++i) {
    int ti = wrap(static_cast<int>(std::llround((grid.center(i) * inv_h) - 0.5)));
    if (grid.dim == 1) {
      double r = std::max(rho.f[ti], kLogFloor);
      tb.rho[i] = rho.f[ti];
      tb.rho_lg1[i] = lg1[ti] / r;
    } else {
      for (int j = 0; j < m; ++j) {
        int tj = wrap(static_cast<int>(std::llround((grid.center(j) * inv_h) - 0.5)));
        int c = grid.flat(i, j), tc = rho.grid.flat(ti, tj);
        double r = std::max(rho.f[tc], kLogFloor);
        tb.rho[c] = rho.f[tc];
        tb.rho_lg1[c] = lg1[tc] / r;
        tb.rho_lg2[c] = lg2[tc] / r;
      }
    }
  }
  if (rec) {
    tb.has_mu = true;
    tb.v1.resize(grid.cells());
    tb.phi.resize(grid.cells());
    if (grid.dim == 2) tb.v2.resize(grid.cells());
    for (int i = 0; i < m; ++i) {
      if (grid.dim == 1) {
        double x = grid.center(i);
        tb.v1[i] = rec->v(0, x);
        tb.phi[i] = -rec->g(x, 0.0, grid.n_per_unit);
      } else {
        for (int j = 0; j < m; ++j) {
          double x = grid.center(i), y = grid.center(j);
          int c = grid.flat(i, j);
          tb.v1[c] = rec->v(0, x, y);
          tb.v2[c] = rec->v(1, x, y);
          tb.phi[c] = -rec->g(x, y, grid.n_per_unit);
        }
      }
    }
  }
  return tb;
}

/// One thermo sample; renormalizes by 1/(1 - lost) so entropy/covariance
/// describe the surviving density.
inline FpSample fp_thermo(const Stencil& st, const ThermoTables& tb,
                          const Vector& f, double t, double lost,
                          bool with_moments) {
  const FpGrid& g = st.g;
  FpSample s;
  s.t = t;
  s.lost_mass = lost;
  const double vol = cell_volume(g);
  const double renorm = 1.0 / (1.0 - lost);
  Vector g1, g2;
  central_gradient(g, f, g1, g2);
  double ep = 0, dfr = 0, qr = 0, dfm = 0, ent = 0, frho = 0, energy = 0;
  for (int c = 0; c < g.cells(); ++c) {
    double fc = f[c];
    double fz = std::max(fc, kLogFloor);
    double j1 = st.dc11[c] * g1[c] + (st.divd1[c] - st.bc1[c]) * fc;
    double j2 = 0.0;
    if (g.dim == 2) {
      j1 += st.dc12[c] * g2[c];
      j2 = st.dc12[c] * g1[c] + st.dc22[c] * g2[c] +
           (st.divd2[c] - st.bc2[c]) * fc;
    }
    ep += vol * dot_dinv(st, c, j1, j2) / fz;
    // bracket w = grad(nu)/nu + D^-1 (div D - b); for nu = rho via discrete
    // log-gradient, for nu = mu analytically zero-flux (bracket = v - v).
    double binv1, binv2 = 0.0;
    if (g.dim == 1) {
      binv1 = (st.divd1[c] - st.bc1[c]) / st.dc11[c];
    } else {
      double det = st.dc11[c] * st.dc22[c] - st.dc12[c] * st.dc12[c];
      double r1 = st.divd1[c] - st.bc1[c], r2 = st.divd2[c] - st.bc2[c];
      binv1 = (st.dc22[c] * r1 - st.dc12[c] * r2) / det;
      binv2 = (-st.dc12[c] * r1 + st.dc11[c] * r2) / det;
    }
    dfr -= vol * (j1 * (g1[c] / fz - tb.rho_lg1[c]) +
                  (g.dim == 2 ? j2 * (g2[c] / fz - tb.rho_lg2[c]) : 0.0));
    qr += vol * (j1 * (tb.rho_lg1[c] + binv1) +
                 (g.dim == 2 ? j2 * (tb.rho_lg2[c] + binv2) : 0.0));
    if (tb.has_mu)
      dfm -= vol * (j1 * (g1[c] / fz - tb.v1[c]) +
                    (g.dim == 2 ? j2 * (g2[c] / fz - tb.v2[c]) : 0.0));
    double fr = fc * renorm;
    if (fr > 0.0) {
      double lf = std::log(fr);
      ent -= vol * fr * lf;
      frho += vol * fr * (lf - std::log(std::max(tb.rho[c], kLogFloor)));
    }
    if (tb.has_mu) energy += vol * fr * tb.phi[c];
  }
  s.e_p = ep;
  s.dF_rho = dfr;
  s.Qhk_rho = qr;
  s.F_rho = frho;
  s.S = ent;
  if (tb.has_mu) {
    s.dF_mu = dfm;
    s.Qhk_mu = ep + dfm;  // identically ~0: the mu-bracket vanishes pointwise
    s.E = energy;
    s.F_mu = energy - ent;
  }
  if (with_moments) {
    double m1 = 0, m2 = 0;
    double c00 = 0, c01 = 0, c11 = 0;
    const int m = g.m;
    if (g.dim == 1) {
      for (int i = 0; i < m; ++i) m1 += vol * f[i] * renorm * g.center(i);
      for (int i = 0; i < m; ++i) {
        double d = g.center(i) - m1;
        c00 += vol * f[i] * renorm * d * d;
      }
      c00 += g.h * g.h / 12.0;  // within-cell variance of the piecewise-
                                // constant density; keeps S <= bound exact
      s.cov00 = c00;
      s.s_bound = 0.5 * (1.0 + std::log(2.0 * M_PI * c00));
    } else {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          double w = vol * f[g.flat(i, j)] * renorm;
          m1 += w * g.center(i);
          m2 += w * g.center(j);
        }
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          double w = vol * f[g.flat(i, j)] * renorm;
          double d1 = g.center(i) - m1, d2 = g.center(j) - m2;
          c00 += w * d1 * d1;
          c01 += w * d1 * d2;
          c11 += w * d2 * d2;
        }
      c00 += g.h * g.h / 12.0;
      c11 += g.h * g.h / 12.0;
      s.cov00 = c00;
      s.cov01 = c01;
      s.cov11 = c11;
      double det = c00 * c11 - c01 * c01;
      s.s_bound = 0.5 * (2.0 + std::log(4.0 * M_PI * M_PI * det));
    }
  }
  return s;
}

}  // namespace fpdetail

struct FpEvolveResult {
  FpSeries series;
  Vector final_f;
  double final_lost = 0.0;
  FpGrid grid;
};

/// Torus evolution; series carries the rho-referenced thermo battery.
inline FpEvolveResult evolve_fp_torus(const PeriodicField& field,
                                      const TorusDensity& f0, double t_end,
                                      double dt = 0.0, int output_every = 0,
                                      const TorusDensity* rho_hint = nullptr) {
  PeriodicField fld = validate_field(field);
  fpdetail::Stencil st = fpdetail::build_stencil(fld, f0.grid);
  TorusDensity rho =
      rho_hint ? *rho_hint : stationary_density(fld, f0.grid.n_per_unit);
  fpdetail::ThermoTables tb =
      fpdetail::build_thermo_tables(f0.grid, rho, nullptr);
  FpEvolveResult res;
  res.grid = f0.grid;
  Vector f = f0.f;
  double lost = 0.0;
  fpdetail::EvolveConfig cfg;
  cfg.t_end = t_end;
  cfg.dt = dt;
  cfg.output_every = output_every;
  cfg.leak_abort = std::numeric_limits<double>::infinity();  // periodic
  double integral = 0.0, prev_t = 0.0, prev_ep = 0.0;
  bool first = true;
  fpdetail::rk4_evolve(st, f, lost, cfg, [&](double t, const Vector& fv,
                                             double lv) {
    FpSample smp = fpdetail::fp_thermo(st, tb, fv, t, lv, false);
    if (t > 0.0) {
      integral += first ? smp.e_p * (t - prev_t)
                        : 0.5 * (smp.e_p + prev_ep) * (t - prev_t);
      first = false;
      smp.cesaro_ep = integral / t;
    }
    prev_t = t;
    prev_ep = smp.e_p;
    res.series.push_back(smp);
  });
  res.final_f = f;
  res.final_lost = lost;
  return res;
}

/// Lifted (absorbing-window) evolution; adds covariance, the Gaussian
/// entropy bound, and the mu-referenced quantities when the detailed-balanced
/// measure exists (curl-free drift field).
inline FpEvolveResult evolve_fp_lifted(const PeriodicField& field,
                                       const LiftedDensity& f0, double t_end,
                                       double dt = 0.0, int output_every = 0,
                                       double leak_abort = 1e-6) {
  PeriodicField fld = validate_field(field);
  fpdetail::Stencil st = fpdetail::build_stencil(fld, f0.grid);
  TorusDensity rho = stationary_density(fld, f0.grid.n_per_unit);
  Reconstruction rec;
  bool has_mu = true;
  try {
    rec = reconstruct_potential(fld, f0.grid.n_per_unit);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::curl_obstruction) throw;
    has_mu = false;
  }
  fpdetail::ThermoTables tb =
      fpdetail::build_thermo_tables(f0.grid, rho, has_mu ? &rec : nullptr);
  FpEvolveResult res;
  res.grid = f0.grid;
  Vector f = f0.f;
  double lost = f0.lost_mass;
  fpdetail::EvolveConfig cfg;
  cfg.t_end = t_end;
  cfg.dt = dt;
  cfg.output_every = output_every;
  cfg.leak_abort = leak_abort;
  double integral = 0.0, prev_t = 0.0, prev_ep = 0.0;
  bool first = true;
  fpdetail::rk4_evolve(st, f, lost, cfg, [&](double t, const Vector& fv,
                                             double lv) {
    FpSample smp = fpdetail::fp_thermo(st, tb, fv, t, lv, true);
    if (t > 0.0) {
      integral += first ? smp.e_p * (t - prev_t)
                        : 0.5 * (smp.e_p + prev_ep) * (t - prev_t);
      first = false;
      smp.cesaro_ep = integral / t;
    }
    prev_t = t;
    prev_ep = smp.e_p;
    res.series.push_back(smp);
  });
  res.final_f = f;
  res.final_lost = lost;
  return res;
}

/// Fold a lifted density back onto the torus by summing integer translates.
inline TorusDensity fold_density(const LiftedDensity& d) {
  int n = d.grid.n_per_unit;
  TorusDensity out;
  out.grid = torus_grid(d.grid.dim, n);
  out.f = Vector::Zero(out.grid.cells());
  const int m = d.grid.m;
  auto wrap = [&](int i) { return ((i % n) + n) % n; };
  if (d.grid.dim == 1) {
    for (int i = 0; i < m; ++i) out.f[wrap(i)] += d.f[i];
  } else {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        out.f[out.grid.flat(wrap(i), wrap(j))] += d.f[d.grid.flat(i, j)];
  }
  out.f /= (1.0 - d.lost_mass);
  return out;
}

}  // namespace liftlab

#endif  // LIFTLAB_FOKKER_PLANCK_HPP
