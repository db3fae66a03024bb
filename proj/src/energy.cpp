#include "vism/energy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vism/error.hpp"
#include "vism/parallel.hpp"

namespace vism {

double solute_volume(const ScalarField& u, double p) {
  std::vector<double> w(u.size());
  for (std::size_t n = 0; n < u.size(); ++n) w[n] = std::pow(std::clamp(u[n], 0.0, 1.0), p);
  return parallel::sum(w) * std::pow(u.grid().h, 3);
}

double solvent_weighted_integral(const InterfaceField& field, const ScalarField& f,
                                 const PhysicalParams& params) {
  const double p = params.p();
  const auto& masks = *field.masks;
  std::vector<double> w(field.u.size(), 0.0);
  for (std::size_t n = 0; n < w.size(); ++n) {
    if (masks.region[n] == Region::Solute) continue;
    w[n] = (1.0 - std::pow(std::clamp(field.u[n], 0.0, 1.0), p)) * f[n];
  }
  return params.rho_s * parallel::sum(w) * std::pow(field.u.grid().h, 3);
}

NonpolarEnergy nonpolar_energy(const InterfaceField& field, const ScalarField& vdw,
                               const PhysicalParams& params, double grad_floor) {
  NonpolarEnergy e;
  e.tv = params.gamma * tv_integral(field, params.q_k, grad_floor);
  e.pressure_volume = params.pressure * solute_volume(field.u, params.p());
  e.repulsive = e.tv + e.pressure_volume;
  e.attractive = solvent_weighted_integral(field, vdw, params);
  return e;
}

PolarTerms polar_terms(const ScalarField& u, const ScalarField& psi, const ChargeGrid& charges,
                       const PhysicalParams& params) {
  const Grid& g = u.grid();
  if (!(psi.grid() == g) || !(charges.values.grid() == g))
    throw InputError("polar energy: fields live on different grids");
  const double h = g.h;
  const double face_scale = h / (2.0 * params.four_pi_ke());
  const FaceDielectric eps = face_dielectric(u, params);
  const auto s = g.strides();
  const bool salt = !params.ions.empty();
  const double p = params.p();

  std::vector<double> fixed(g.size()), diel(g.size()), ionic(g.size(), 0.0), flux(g.size(), 0.0);
  const auto n_nodes = static_cast<std::ptrdiff_t>(g.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ns = 0; ns < n_nodes; ++ns) {
    const auto n = static_cast<std::size_t>(ns);
    const auto idx = g.ijk(n);
    fixed[n] = charges.values[n] * psi[n];
    const std::vector<double>* faces[3] = {&eps.x, &eps.y, &eps.z};
    double d = 0.0;
    for (int a = 0; a < 3; ++a) {
      if (idx[a] + 1 < g.dims[a]) {
        const double dp = psi[n + s[a]] - psi[n];
        d += (*faces[a])[n] * dp * dp;
      }
    }
    diel[n] = -face_scale * d;
    const bool boundary = g.on_boundary(n);
    if (boundary) {
      double f = 0.0;
      for (int a = 0; a < 3; ++a) {
        if (idx[a] + 1 < g.dims[a]) f += (*faces[a])[n] * (psi[n] - psi[n + s[a]]);
        if (idx[a] > 0) f += (*faces[a])[n - s[a]] * (psi[n] - psi[n - s[a]]);
      }
      flux[n] = face_scale * psi[n] * f;
    } else if (salt) {
      const double c = params.q_k - std::pow(std::clamp(u[n], 0.0, 1.0), p);
      ionic[n] = -h * h * h * c * ionic_B(psi[n], params.ions);
    }
  }
  PolarTerms t;
  t.fixed_charge = parallel::sum(fixed);
  t.dielectric = parallel::sum(diel);
  t.ionic = parallel::sum(ionic);
  t.boundary_flux = parallel::sum(flux);
  return t;
}

double reference_polar_energy(const PBProblem& problem) {
  if (!problem.charges().values.all_finite()) throw InputError("non-finite charge grid");
  bool any = false;
  for (double q : problem.charges().values.data()) any = any || q != 0.0;
  if (!any) return 0.0;
  PhysicalParams ref = problem.params();
  ref.ions.ions.clear();
  const PotentialField r = problem.solve_reference();
  return polar_terms(ScalarField(problem.grid(), 1.0), r.psi, problem.charges(), ref).sum();
}

PolarTerms polar_energy(const ScalarField& u, const ScalarField& psi, const ChargeGrid& charges,
                        const PhysicalParams& params, PolarOptions opts) {
  if (opts.check_residual) {
    const double r = ppb_residual(u, charges, psi, params);
    if (!(r <= opts.residual_tol))
      throw StalePotentialError("potential does not solve the field equation for this interface "
                                "(relative residual " + std::to_string(r) + ")");
  }
  return polar_terms(u, psi, charges, params);
}

EnergyReport total_energy(const InterfaceField& field, const ScalarField& psi,
                          const ChargeGrid& charges, const ScalarField& vdw,
                          const PhysicalParams& params, double reference, double grad_floor,
                          PolarOptions opts) {
  EnergyReport r = nonpolar_report(field, vdw, params, grad_floor);
  const PolarTerms t = polar_energy(field.u, psi, charges, params, opts);
  r.fixed_charge = t.fixed_charge;
  r.dielectric = t.dielectric;
  r.ionic = t.ionic;
  r.boundary_flux = t.boundary_flux;
  r.reference = reference;
  r.polar = t.sum() - reference;
  r.total = r.repulsive + r.attractive + r.polar;
  return r;
}

EnergyReport nonpolar_report(const InterfaceField& field, const ScalarField& vdw,
                             const PhysicalParams& params, double grad_floor) {
  const NonpolarEnergy np = nonpolar_energy(field, vdw, params, grad_floor);
  EnergyReport r;
  r.tv = np.tv;
  r.pressure_volume = np.pressure_volume;
  r.repulsive = np.repulsive;
  r.attractive = np.attractive;
  r.vdw = np.attractive;
  r.total = r.repulsive + r.attractive;
  return r;
}

}  // namespace vism
