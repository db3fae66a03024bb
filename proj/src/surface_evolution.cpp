#include "vism/surface_evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vism/error.hpp"

namespace vism {

void EvolutionConfig::validate() const {
  if (!(dt_factor > 0.0 && dt_factor < 0.5)) throw ConfigError("dt_factor must lie in (0, 0.5)");
  if (!(grad_floor > 0.0)) throw ConfigError("grad_floor must be positive");
  if (steps_per_coupling < 1) throw ConfigError("steps_per_coupling must be >= 1");
  if (max_total_steps < 0) throw ConfigError("max_total_steps must be >= 0");
  if (!(convergence_tol > 0.0)) throw ConfigError("convergence_tol must be positive");
}

InterfaceField initial_interface(const Molecule& molecule, double probe_radius,
                                 std::shared_ptr<const DomainMasks> masks, InitialProfile profile) {
  const Grid& g = masks->grid;
  InterfaceField f{ScalarField(g), masks};
  for (std::size_t n : masks->solute) f.u[n] = 1.0;
  for (std::size_t n : masks->mixing) {
    if (profile == InitialProfile::Constant) {
      f.u[n] = 0.5;
      continue;
    }
    const Vec3 x = g.position(n);
    double d = std::numeric_limits<double>::max();
    for (const auto& a : molecule.atoms) d = std::min(d, distance(x, a.position) - a.radius);
    // The SAS distance is the vdW distance shifted by the probe radius.
    f.u[n] = std::clamp(1.0 - d / probe_radius, 0.0, 1.0);
  }
  return f;
}

ScalarField driving_potential(const ScalarField* psi, const ScalarField& vdw,
                              const PhysicalParams& params) {
  const Grid& g = vdw.grid();
  ScalarField V(g);
  const double field_coeff = (params.eps_s - params.eps_m) / (2.0 * params.four_pi_ke());
  const bool salt = !params.ions.empty();
  if (psi && !(psi->grid() == g)) throw InputError("potential and vdW field live on different grids");
  const auto n_nodes = static_cast<std::ptrdiff_t>(g.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ns = 0; ns < n_nodes; ++ns) {
    const auto n = static_cast<std::size_t>(ns);
    double v = params.pressure - params.rho_s * vdw[n];
    if (psi) {
      if (salt) v += ionic_B((*psi)[n], params.ions);
      v += field_coeff * gradient_squared(*psi, n);
    }
    V[n] = v;
  }
  return V;
}

double stable_time_step(const InterfaceField& field, const ScalarField& V,
                        const EvolutionConfig& cfg, const PhysicalParams& params) {
  const double h = field.u.grid().h;
  double dt = std::numeric_limits<double>::infinity();
  if (params.gamma > 0.0) dt = h * h / (params.gamma * params.q_k);
  double vmax = 0.0;
  for (std::size_t n : field.masks->mixing) vmax = std::max(vmax, -V[n]);
  if (vmax > 0.0) dt = std::min(dt, h / (params.p() * vmax));
  if (!std::isfinite(dt)) dt = h * h;
  return cfg.dt_factor * dt;
}

namespace {

struct RateParts {
  double diffusion = 0.0;
  double mobility = 0.0;  // |grad u|^{2-q} with the floored gradient
};

RateParts rate_parts(const ScalarField& u, std::size_t n, const EvolutionConfig& cfg,
                     const PhysicalParams& params) {
  const Grid& g = u.grid();
  const auto s = g.strides();
  const double h = g.h;
  const double q = params.q_k;
  const double c = u[n];

  const double ux = (u[n + s[0]] - u[n - s[0]]) / (2.0 * h);
  const double uy = (u[n + s[1]] - u[n - s[1]]) / (2.0 * h);
  const double uz = (u[n + s[2]] - u[n - s[2]]) / (2.0 * h);
  const double h2 = h * h;
  const double uxx = (u[n + s[0]] - 2.0 * c + u[n - s[0]]) / h2;
  const double uyy = (u[n + s[1]] - 2.0 * c + u[n - s[1]]) / h2;
  const double uzz = (u[n + s[2]] - 2.0 * c + u[n - s[2]]) / h2;
  const auto cross = [&](std::size_t a, std::size_t b) {
    return (u[n + a + b] - u[n + a - b] - u[n - a + b] + u[n - a - b]) / (4.0 * h2);
  };
  const double uxy = cross(s[0], s[1]);
  const double uxz = cross(s[0], s[2]);
  const double uyz = cross(s[1], s[2]);

  const double ux2 = ux * ux, uy2 = uy * uy, uz2 = uz * uz;
  const double G = std::max(ux2 + uy2 + uz2, cfg.grad_floor);

  RateParts r;
  r.diffusion =
      params.gamma * q *
          (((q - 1.0) * ux2 + uy2 + uz2) * uxx + (ux2 + (q - 1.0) * uy2 + uz2) * uyy +
           (ux2 + uy2 + (q - 1.0) * uz2) * uzz) /
          G -
      params.gamma * (2.0 - q) * q * (2.0 * ux * uy * uxy + 2.0 * ux * uz * uxz + 2.0 * uy * uz * uyz) / G;
  r.mobility = std::pow(G, 0.5 * (2.0 - q));
  return r;
}

// Root of v + a v^r = b on (0, b] for a > 0, b > 0, 0 < r <= 1. The left side
// is increasing and concave, so Newton is safeguarded by a bracket.
double solve_prox(double a, double b, double r) {
  constexpr double v_min = 1e-300;
  if (v_min + a * std::pow(v_min, r) >= b) return 0.0;
  double lo = v_min, hi = b;
  double v = b;
  for (int it = 0; it < 200; ++it) {
    const double vr = std::pow(v, r);
    const double f = v + a * vr - b;
    if (f > 0.0) hi = v; else lo = v;
    if (hi - lo <= 1e-15 * hi) break;
    double next = v - f / (1.0 + a * r * vr / v);
    if (!(next > lo && next < hi)) next = std::sqrt(lo * hi);
    if (next == v) break;
    v = next;
  }
  return v;
}

}  // namespace

double evolution_rate(const ScalarField& u, std::size_t n, double V, const EvolutionConfig& cfg,
                      const PhysicalParams& params) {
  const RateParts r = rate_parts(u, n, cfg, params);
  const double p = params.p();
  return r.diffusion - r.mobility * p * std::pow(std::max(u[n], 0.0), p - 1.0) * V;
}

StepResult evolution_step(const InterfaceField& field, const ScalarField& V,
                          const EvolutionConfig& cfg, const PhysicalParams& params, double dt) {
  StepResult out{field, 0.0};
  const auto& mixing = field.masks->mixing;
  const auto count = static_cast<std::ptrdiff_t>(mixing.size());
  const double p = params.p();
  std::vector<double> next(mixing.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t m = 0; m < count; ++m) {
    const std::size_t n = mixing[static_cast<std::size_t>(m)];
    const RateParts r = rate_parts(field.u, n, cfg, params);
    const double c = field.u[n];
    const double b = c + dt * r.diffusion;
    const double a = dt * r.mobility * p * V[n];
    double v;
    if (V[n] > 0.0) {
      // Convex part of the volume term taken implicitly.
      v = b > 0.0 ? solve_prox(a, b, p - 1.0) : b;
    } else {
      v = b - a * std::pow(std::max(c, 0.0), p - 1.0);
    }
    next[static_cast<std::size_t>(m)] = v;
  }
  for (std::size_t m = 0; m < mixing.size(); ++m) {
    const std::size_t n = mixing[m];
    if (!std::isfinite(next[m])) {
      const auto [i, j, k] = field.u.grid().ijk(n);
      throw NumericalError("non-finite interface update at node (" + std::to_string(i) + ", " +
                           std::to_string(j) + ", " + std::to_string(k) + "), u = " +
                           std::to_string(field.u[n]) + ", V = " + std::to_string(V[n]));
    }
    out.max_du = std::max(out.max_du, std::abs(next[m] - field.u[n]));
    out.field.u[n] = next[m];
  }
  return out;
}

StepResult evolution_step(const InterfaceField& field, const ScalarField& V,
                          const EvolutionConfig& cfg, const PhysicalParams& params) {
  return evolution_step(field, V, cfg, params, stable_time_step(field, V, cfg, params));
}

void enforce_constraints_in_place(InterfaceField& field) {
  for (std::size_t n : field.masks->mixing) field.u[n] = std::clamp(field.u[n], 0.0, 1.0);
  for (std::size_t n : field.masks->solute) field.u[n] = 1.0;
  for (std::size_t n : field.masks->solvent) field.u[n] = 0.0;
}

InterfaceField enforce_constraints(InterfaceField field) {
  enforce_constraints_in_place(field);
  return field;
}

std::size_t constraint_violations(const InterfaceField& field) {
  std::size_t bad = 0;
  for (std::size_t n : field.masks->mixing)
    if (!(field.u[n] >= 0.0 && field.u[n] <= 1.0)) ++bad;
  for (std::size_t n : field.masks->solute)
    if (field.u[n] != 1.0) ++bad;
  for (std::size_t n : field.masks->solvent)
    if (field.u[n] != 0.0) ++bad;
  return bad;
}

double tv_integral(const InterfaceField& field, double q, double grad_floor) {
  const double h3 = std::pow(field.u.grid().h, 3);
  const double base = std::pow(grad_floor, 0.5 * q);
  double acc = 0.0;
  for (std::size_t n : field.masks->support) {
    const double g2 = std::max(gradient_squared(field.u, n), grad_floor);
    acc += std::pow(g2, 0.5 * q) - base;
  }
  return acc * h3;
}

double frozen_energy(const InterfaceField& field, const ScalarField& V, const PhysicalParams& params,
                     double grad_floor) {
  const double h3 = std::pow(field.u.grid().h, 3);
  const double p = params.p();
  double vol = 0.0;
  for (std::size_t n : field.masks->mixing) vol += std::pow(field.u[n], p) * V[n];
  return params.gamma * tv_integral(field, params.q_k, grad_floor) + vol * h3;
}

EvolutionResult evolve_to_quasi_steady(const InterfaceField& field, const ScalarField& V,
                                       const EvolutionConfig& cfg, const PhysicalParams& params,
                                       int max_steps) {
  if (max_steps < 0) max_steps = cfg.max_total_steps;
  EvolutionResult res;
  res.field = field;
  double dt = stable_time_step(field, V, cfg, params);
  double energy = cfg.monitor_descent ? frozen_energy(field, V, params, cfg.grad_floor) : 0.0;
  int consecutive = 0;
  std::vector<double> previous;
  const auto& mixing = field.masks->mixing;
  for (int step = 0; step < max_steps; ++step) {
    previous.resize(mixing.size());
    for (std::size_t m = 0; m < mixing.size(); ++m) previous[m] = res.field.u[mixing[m]];

    StepResult sr = evolution_step(res.field, V, cfg, params, dt);
    enforce_constraints_in_place(sr.field);
    res.field = std::move(sr.field);
    ++res.steps;

    double max_du = 0.0;
    for (std::size_t m = 0; m < mixing.size(); ++m)
      max_du = std::max(max_du, std::abs(res.field.u[mixing[m]] - previous[m]));
    res.last_max_du = max_du;

    if (cfg.audit_constraints) res.constraint_violations += constraint_violations(res.field);

    if (cfg.monitor_descent) {
      const double next = frozen_energy(res.field, V, params, cfg.grad_floor);
      res.energy_trace.push_back(next);
      if (next > energy + cfg.descent_slack * std::abs(energy)) {
        ++res.energy_increases;
        if (++consecutive >= 3) {
          dt *= 0.5;
          ++res.dt_halvings;
          consecutive = 0;
        }
      } else {
        consecutive = 0;
      }
      energy = next;
    }

    if (max_du < cfg.convergence_tol) {
      res.converged = true;
      break;
    }
  }
  res.final_dt = dt;
  return res;
}

}  // namespace vism
