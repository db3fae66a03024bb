#include "vism/pb_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vism/error.hpp"
#include "vism/parallel.hpp"

namespace vism {

ChargeGrid spread_charges(const Molecule& molecule, const Grid& grid) {
  ChargeGrid out{ScalarField(grid)};
  auto& q = out.values;
  for (std::size_t a = 0; a < molecule.atoms.size(); ++a) {
    const auto& atom = molecule.atoms[a];
    int base[3];
    double frac[3];
    for (int d = 0; d < 3; ++d) {
      const double s = (atom.position[d] - grid.origin[d]) / grid.h;
      if (!std::isfinite(s)) throw InputError("atom " + std::to_string(a) + ": non-finite coordinate");
      base[d] = static_cast<int>(std::floor(s));
      frac[d] = s - base[d];
      // An atom sitting exactly on the last node is attributed to the cell below it.
      if (base[d] == grid.dims[d] - 1 && frac[d] == 0.0) {
        base[d] -= 1;
        frac[d] = 1.0;
      }
      if (base[d] < 1 || base[d] + 1 > grid.dims[d] - 2)
        throw InputError("atom " + std::to_string(a) + " is not inside the grid interior");
    }
    for (int c = 0; c < 8; ++c) {
      const int oi = c & 1, oj = (c >> 1) & 1, ok = (c >> 2) & 1;
      const double w = (oi ? frac[0] : 1.0 - frac[0]) * (oj ? frac[1] : 1.0 - frac[1]) *
                       (ok ? frac[2] : 1.0 - frac[2]);
      if (w != 0.0) q.at(base[0] + oi, base[1] + oj, base[2] + ok) += w * atom.charge;
    }
  }
  return out;
}

double debye_kappa(const PhysicalParams& params) {
  if (params.ions.empty()) return 0.0;
  return std::sqrt(params.ions.ionic_strength_term() * params.four_pi_ke() / params.eps_s);
}

double coulomb_potential(const Molecule& molecule, const Vec3& x, double eps, double kappa,
                         double k_e) {
  double acc = 0.0;
  for (const auto& a : molecule.atoms) {
    if (a.charge == 0.0) continue;
    const double r = distance(x, a.position);
    if (!(r > 0.0)) throw DomainError("boundary potential evaluated at an atom centre");
    acc += a.charge * std::exp(-kappa * r) / r;
  }
  return k_e * acc / eps;
}

double boundary_potential(const Molecule& molecule, const Vec3& x, const PhysicalParams& params) {
  return coulomb_potential(molecule, x, params.eps_s, debye_kappa(params), params.k_e);
}

namespace {

ScalarField boundary_from(const Molecule& molecule, const Grid& grid, double eps, double kappa,
                          double k_e) {
  ScalarField g(grid);
  if (!molecule.has_charges()) return g;
  for (std::size_t n = 0; n < grid.size(); ++n)
    if (grid.on_boundary(n)) g[n] = coulomb_potential(molecule, grid.position(n), eps, kappa, k_e);
  return g;
}

void require_same_grid(const ScalarField& a, const Grid& g, const char* what) {
  if (!(a.grid() == g)) throw InputError(std::string(what) + " is not defined on the solver grid");
}

double norm2(std::span<const double> v) { return std::sqrt(parallel::dot(v, v)); }

}  // namespace

ScalarField boundary_values(const Molecule& molecule, const Grid& grid, const PhysicalParams& params) {
  return boundary_from(molecule, grid, params.eps_s, debye_kappa(params), params.k_e);
}

FaceDielectric face_dielectric(const ScalarField& u, const PhysicalParams& params) {
  const Grid& g = u.grid();
  const auto s = g.strides();
  FaceDielectric f;
  f.x.assign(g.size(), 0.0);
  f.y.assign(g.size(), 0.0);
  f.z.assign(g.size(), 0.0);
  std::vector<double>* faces[3] = {&f.x, &f.y, &f.z};
  const auto n_nodes = static_cast<std::ptrdiff_t>(g.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ns = 0; ns < n_nodes; ++ns) {
    const auto n = static_cast<std::size_t>(ns);
    const auto idx = g.ijk(n);
    for (int d = 0; d < 3; ++d) {
      if (idx[d] == g.dims[d] - 1) continue;
      (*faces[d])[n] = dielectric(0.5 * (u[n] + u[n + s[d]]), params);
    }
  }
  return f;
}

void LinearSystem::apply(std::span<const double> x, std::span<double> y) const {
  const auto s = grid.strides();
  const auto n_nodes = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ns = 0; ns < n_nodes; ++ns) {
    const auto n = static_cast<std::size_t>(ns);
    if (dirichlet[n]) {
      y[n] = x[n];
      continue;
    }
    y[n] = diag[n] * x[n] - fx[n] * x[n + s[0]] - fx[n - s[0]] * x[n - s[0]] -
           fy[n] * x[n + s[1]] - fy[n - s[1]] * x[n - s[1]] - fz[n] * x[n + s[2]] -
           fz[n - s[2]] * x[n - s[2]];
  }
}

double LinearSystem::neighbour_coefficient(std::size_t n, int dir) const {
  const auto s = grid.strides();
  const int axis = dir / 2;
  const std::vector<double>& f = axis == 0 ? fx : axis == 1 ? fy : fz;
  if (dir % 2 == 0) {
    if (grid.ijk(n)[axis] == 0) return 0.0;
    return -f[n - s[axis]];
  }
  return -f[n];
}

namespace {

/// Interior residual F(psi) and the norm of the source f. Boundary nodes of
/// psi are used as Dirichlet data.
double nonlinear_residual(const ScalarField& u, const FaceDielectric& eps, const ChargeGrid& charges,
                          const ScalarField& psi, const PhysicalParams& params,
                          std::vector<double>* F_out, double* source_norm) {
  const Grid& g = u.grid();
  const auto s = g.strides();
  const double h = g.h;
  const double fk = params.four_pi_ke();
  const double p = params.p();
  const bool salt = !params.ions.empty();
  std::vector<double> F(g.size(), 0.0), f(g.size(), 0.0);
  const std::vector<double>* faces[3] = {&eps.x, &eps.y, &eps.z};
  const auto n_nodes = static_cast<std::ptrdiff_t>(g.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ns = 0; ns < n_nodes; ++ns) {
    const auto n = static_cast<std::size_t>(ns);
    if (g.on_boundary(n)) continue;
    double flux = 0.0, src = fk * charges.values[n] / h;
    for (int d = 0; d < 3; ++d) {
      const double ep = (*faces[d])[n], em = (*faces[d])[n - s[d]];
      flux += ep * (psi[n] - psi[n + s[d]]) + em * (psi[n] - psi[n - s[d]]);
      if (g.on_boundary(n + s[d])) src += ep * psi[n + s[d]];
      if (g.on_boundary(n - s[d])) src += em * psi[n - s[d]];
    }
    double ionic = 0.0;
    if (salt) {
      const double c = params.q_k - std::pow(std::clamp(u[n], 0.0, 1.0), p);
      ionic = fk * h * h * c * ionic_B_prime(psi[n], params.ions);
    }
    F[n] = flux + ionic - fk * charges.values[n] / h;
    f[n] = src;
  }
  if (source_norm) *source_norm = norm2(f);
  const double r = norm2(F);
  if (F_out) *F_out = std::move(F);
  return r;
}

LinearSystem assemble_with_faces(const ScalarField& u, const FaceDielectric& eps,
                                 const ChargeGrid& charges, const ScalarField& lin,
                                 const PhysicalParams& params) {
  const Grid& g = u.grid();
  const auto s = g.strides();
  const double h = g.h;
  const double fk = params.four_pi_ke();
  const double p = params.p();
  const bool salt = !params.ions.empty();

  LinearSystem sys;
  sys.grid = g;
  sys.diag.assign(g.size(), 0.0);
  sys.rhs.assign(g.size(), 0.0);
  sys.fx = eps.x;
  sys.fy = eps.y;
  sys.fz = eps.z;
  sys.dirichlet.assign(g.size(), 0);
  std::vector<double>* faces[3] = {&sys.fx, &sys.fy, &sys.fz};
  const std::vector<double>* orig[3] = {&eps.x, &eps.y, &eps.z};

  for (std::size_t n = 0; n < g.size(); ++n) sys.dirichlet[n] = g.on_boundary(n) ? 1 : 0;

  const auto n_nodes = static_cast<std::ptrdiff_t>(g.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ns = 0; ns < n_nodes; ++ns) {
    const auto n = static_cast<std::size_t>(ns);
    if (sys.dirichlet[n]) {
      sys.diag[n] = 1.0;
      sys.rhs[n] = lin[n];
      continue;
    }
    double diag = 0.0, rhs = fk * charges.values[n] / h;
    for (int d = 0; d < 3; ++d) {
      const double ep = (*orig[d])[n], em = (*orig[d])[n - s[d]];
      diag += ep + em;
      if (sys.dirichlet[n + s[d]]) rhs += ep * lin[n + s[d]];
      if (sys.dirichlet[n - s[d]]) rhs += em * lin[n - s[d]];
    }
    if (salt) {
      const double c = params.q_k - std::pow(std::clamp(u[n], 0.0, 1.0), p);
      const double b1 = ionic_B_prime(lin[n], params.ions);
      const double b2 = ionic_B_second(lin[n], params.ions);
      diag += fk * h * h * c * b2;
      rhs -= fk * h * h * c * (b1 - b2 * lin[n]);
    }
    sys.diag[n] = diag;
    sys.rhs[n] = rhs;
  }
  // Faces touching a Dirichlet node are already in rhs.
  for (std::size_t n = 0; n < g.size(); ++n) {
    const auto idx = g.ijk(n);
    for (int d = 0; d < 3; ++d) {
      if (idx[d] == g.dims[d] - 1) {
        (*faces[d])[n] = 0.0;
        continue;
      }
      if (sys.dirichlet[n] || sys.dirichlet[n + s[d]]) (*faces[d])[n] = 0.0;
    }
  }
  return sys;
}

}  // namespace

LinearSystem assemble_ppb_system(const ScalarField& u, const ChargeGrid& charges,
                                 const ScalarField& linearization, const PhysicalParams& params) {
  require_same_grid(charges.values, u.grid(), "charge grid");
  require_same_grid(linearization, u.grid(), "linearisation point");
  return assemble_with_faces(u, face_dielectric(u, params), charges, linearization, params);
}

double ppb_residual(const ScalarField& u, const ChargeGrid& charges, const ScalarField& psi,
                    const PhysicalParams& params) {
  require_same_grid(psi, u.grid(), "potential");
  double fnorm = 0.0;
  const double r = nonlinear_residual(u, face_dielectric(u, params), charges, psi, params, nullptr, &fnorm);
  if (fnorm == 0.0) return r;
  return r / fnorm;
}

int conjugate_gradient(const LinearSystem& sys, std::span<double> x, double tol, int max_iter,
                       std::vector<double>* history, double* final_residual) {
  const std::size_t n = sys.diag.size();
  std::vector<double> r(n), z(n), p(n), q(n);
  for (std::size_t i = 0; i < n; ++i)
    if (sys.dirichlet[i]) x[i] = sys.rhs[i];

  std::vector<double> b_int(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (!sys.dirichlet[i]) b_int[i] = sys.rhs[i];
  const double bnorm = norm2(b_int);

  sys.apply(x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = sys.dirichlet[i] ? 0.0 : sys.rhs[i] - q[i];
  double rnorm = norm2(r);
  if (bnorm == 0.0) {
    // Homogeneous system with homogeneous data: the solution is zero.
    if (rnorm == 0.0) {
      if (final_residual) *final_residual = 0.0;
      return 0;
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!sys.dirichlet[i]) x[i] = 0.0;
    if (final_residual) *final_residual = 0.0;
    return 0;
  }
  double rel = rnorm / bnorm;
  if (history) history->push_back(rel);
  if (rel <= tol) {
    if (final_residual) *final_residual = rel;
    return 0;
  }
  for (std::size_t i = 0; i < n; ++i) z[i] = sys.dirichlet[i] ? 0.0 : r[i] / sys.diag[i];
  p = z;
  double rz = parallel::dot(r, z);
  int it = 0;
  while (it < max_iter) {
    ++it;
    sys.apply(p, q);
    for (std::size_t i = 0; i < n; ++i)
      if (sys.dirichlet[i]) q[i] = 0.0;
    const double pq = parallel::dot(p, q);
    if (!(pq > 0.0)) throw SolverError("conjugate gradient breakdown (operator not positive definite)",
                                       history ? *history : std::vector<double>{rel});
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    rel = norm2(r) / bnorm;
    if (history) history->push_back(rel);
    if (rel <= tol) break;
    for (std::size_t i = 0; i < n; ++i) z[i] = sys.dirichlet[i] ? 0.0 : r[i] / sys.diag[i];
    const double rz_new = parallel::dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  if (final_residual) *final_residual = rel;
  if (rel > tol)
    throw SolverError("conjugate gradient did not converge in " + std::to_string(max_iter) +
                          " iterations (relative residual " + std::to_string(rel) + ")",
                      history ? *history : std::vector<double>{rel});
  return it;
}

PBProblem::PBProblem(const Molecule& molecule, const Grid& grid, const PhysicalParams& params,
                     PBOptions options)
    : grid_(grid),
      params_(params),
      options_(options),
      charges_(spread_charges(molecule, grid)),
      boundary_(boundary_values(molecule, grid, params)),
      molecule_(molecule) {
  params_.validate();
  molecule_.validate();
}

namespace {

void check_bound(const ScalarField& psi, double bound, const std::vector<double>& history) {
  double sup = 0.0;
  for (double v : psi.values()) {
    if (!std::isfinite(v)) throw SolverError("non-finite potential", history);
    sup = std::max(sup, std::abs(v));
  }
  if (sup > bound)
    throw SolverError("potential sup-norm " + std::to_string(sup) + " exceeds sanity bound " +
                          std::to_string(bound),
                      history);
}

}  // namespace

PotentialField PBProblem::solve(const ScalarField& u, const ScalarField* initial_guess) const {
  require_same_grid(u, grid_, "interface field");
  PotentialField out;
  out.psi = ScalarField(grid_);
  if (initial_guess) {
    require_same_grid(*initial_guess, grid_, "initial guess");
    out.psi = *initial_guess;
  }
  for (std::size_t n = 0; n < grid_.size(); ++n)
    if (grid_.on_boundary(n)) out.psi[n] = boundary_[n];

  const FaceDielectric eps = face_dielectric(u, params_);

  if (params_.ions.empty()) {
    const LinearSystem sys = assemble_with_faces(u, eps, charges_, out.psi, params_);
    out.iterations = conjugate_gradient(sys, out.psi.values(), options_.tol, options_.max_krylov,
                                        &out.residual_history, &out.residual);
    check_bound(out.psi, options_.psi_bound, out.residual_history);
    return out;
  }

  double fnorm = 0.0;
  std::vector<double> F;
  double res = nonlinear_residual(u, eps, charges_, out.psi, params_, &F, &fnorm);
  const double scale = fnorm > 0.0 ? fnorm : 1.0;
  out.residual_history.push_back(res / scale);
  while (res / scale > options_.tol) {
    if (out.newton_iterations >= options_.max_newton)
      throw SolverError("Newton iteration did not converge in " + std::to_string(options_.max_newton) +
                            " steps (relative residual " + std::to_string(res / scale) + ")",
                        out.residual_history);
    ++out.newton_iterations;
    // Correction form J dx = -F, so the Krylov tolerance is relative to the
    // current nonlinear residual.
    LinearSystem sys = assemble_with_faces(u, eps, charges_, out.psi, params_);
    for (std::size_t n = 0; n < grid_.size(); ++n) sys.rhs[n] = sys.dirichlet[n] ? 0.0 : -F[n];
    const double eta =
        std::clamp(std::max(std::min(0.1, res / scale), 0.1 * options_.tol * scale / res), 1e-14, 0.1);
    std::vector<double> dx(grid_.size(), 0.0);
    out.iterations += conjugate_gradient(sys, dx, eta, options_.max_krylov);

    ScalarField trial(grid_);
    double lambda = 1.0, trial_res = 0.0;
    for (int halving = 0;; ++halving) {
      for (std::size_t n = 0; n < grid_.size(); ++n) trial[n] = out.psi[n] + lambda * dx[n];
      trial_res = nonlinear_residual(u, eps, charges_, trial, params_, &F, nullptr);
      if (trial_res <= res || halving >= 10) break;
      lambda *= 0.5;
    }
    out.psi = std::move(trial);
    res = trial_res;
    out.residual_history.push_back(res / scale);
  }
  out.residual = res / scale;
  check_bound(out.psi, options_.psi_bound, out.residual_history);
  return out;
}

PotentialField PBProblem::solve_reference() const {
  PhysicalParams ref = params_;
  ref.ions.ions.clear();
  const ScalarField u(grid_, 1.0);
  ScalarField psi = boundary_from(molecule_, grid_, params_.eps_m, 0.0, params_.k_e);
  const LinearSystem sys = assemble_with_faces(u, face_dielectric(u, ref), charges_, psi, ref);
  PotentialField out;
  out.iterations =
      conjugate_gradient(sys, psi.values(), options_.tol, options_.max_krylov, &out.residual_history,
                         &out.residual);
  out.psi = std::move(psi);
  check_bound(out.psi, options_.psi_bound, out.residual_history);
  return out;
}

PotentialField solve_ppb(const ScalarField& u, const Molecule& molecule,
                         const PhysicalParams& params, const ScalarField* initial_guess,
                         PBOptions options) {
  return PBProblem(molecule, u.grid(), params, options).solve(u, initial_guess);
}

}  // namespace vism
