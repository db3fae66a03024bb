#include "vism/coupling.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "vism/error.hpp"

namespace vism {

void CouplingConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(alpha_prime > 0.0 && alpha_prime < 1.0)) throw ConfigError("alpha_prime must lie in (0, 1)");
  if (!(outer_tol > 0.0)) throw ConfigError("outer_tol must be positive");
  if (!(du_tol > 0.0)) throw ConfigError("du_tol must be positive");
  if (max_outer < 1) throw ConfigError("max_outer must be >= 1");
  if (!(grid.h > 0.0)) throw ConfigError("grid spacing h must be positive");
  if (!(grid.pad >= 0.0)) throw ConfigError("pad must be non-negative");
  if (!(grid.probe_radius > 0.0)) throw ConfigError("probe_radius must be positive");
  if (!(pb.tol > 0.0)) throw ConfigError("pb tol must be positive");
}

namespace {

void blend(ScalarField& old_field, const ScalarField& new_field, double w) {
  auto& a = old_field.data();
  const auto& b = new_field.data();
  for (std::size_t n = 0; n < a.size(); ++n) a[n] = w * b[n] + (1.0 - w) * a[n];
}

}  // namespace

Solution self_consistent_solve(const Molecule& molecule, const PhysicalParams& params,
                               const CouplingConfig& cfg, const EvolutionConfig& evo,
                               const SolveStart* start) {
  molecule.validate();
  params.validate();
  cfg.validate();
  evo.validate();
  for (const auto& a : molecule.atoms) params.lj.at(a.type);

  const Grid grid = build_grid(molecule, cfg.grid.h, cfg.grid.pad, cfg.grid.probe_radius);
  auto masks =
      std::make_shared<const DomainMasks>(classify_domains(molecule, cfg.grid.probe_radius, grid));

  Solution sol;
  sol.params = params;
  sol.vdw = vdw_field(molecule, params.lj, grid);

  InterfaceField field;
  if (start && start->u) {
    if (!(start->u->grid() == grid)) throw InputError("starting interface lives on a different grid");
    field = InterfaceField{*start->u, masks};
    enforce_constraints_in_place(field);
  } else {
    field = initial_interface(molecule, cfg.grid.probe_radius, masks, cfg.init);
    if (cfg.warm_start_nonpolar) {
      const ScalarField V0 = driving_potential(nullptr, sol.vdw, params);
      EvolutionResult warm = evolve_to_quasi_steady(field, V0, evo, params);
      sol.evolution_steps += warm.steps;
      sol.frozen_energy_increases += warm.energy_increases;
      sol.dt_halvings += warm.dt_halvings;
      sol.constraint_violations += warm.constraint_violations;
      field = std::move(warm.field);
    }
  }

  std::optional<PBProblem> problem;
  std::optional<ScalarField> psi_old;
  if (!cfg.nonpolar) {
    problem.emplace(molecule, grid, params, cfg.pb);
    sol.charges = problem->charges();
    sol.reference = reference_polar_energy(*problem);
    if (start && start->psi) {
      if (!(start->psi->grid() == grid)) throw InputError("starting potential lives on a different grid");
      psi_old = *start->psi;
    }
  } else {
    sol.charges = ChargeGrid{ScalarField(grid)};
    sol.psi.psi = ScalarField(grid);
  }

  double e_prev = std::numeric_limits<double>::quiet_NaN();
  double last_du = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_outer; ++it) {
    sol.outer_iterations = it;
    PotentialField pf;
    if (problem) {
      try {
        pf = problem->solve(field.u, psi_old ? &*psi_old : nullptr);
      } catch (const SolverError& e) {
        throw SolverError("outer iteration " + std::to_string(it) + ": " + e.what(),
                          e.residual_history());
      }
      ++sol.pb_solves;
      sol.report = total_energy(field, pf.psi, sol.charges, sol.vdw, params, sol.reference,
                                evo.grad_floor, cfg.polar);
    } else {
      sol.report = nonpolar_report(field, sol.vdw, params, evo.grad_floor);
    }
    const double e = sol.report.total;
    if (!std::isfinite(e)) throw NumericalError("non-finite total energy at outer iteration " + std::to_string(it));
    sol.trace.push_back({it, e, it == 1 ? 0.0 : last_du, pf.residual});

    if (it > 1) {
      if (e > e_prev + cfg.increase_slack * std::abs(e_prev)) ++sol.energy_increases;
      if (std::abs(e - e_prev) <= cfg.outer_tol * std::abs(e) && last_du <= cfg.du_tol) {
        sol.converged = true;
        if (problem) sol.psi = std::move(pf);
        break;
      }
    }

    const ScalarField* psi_drive = nullptr;
    if (problem) {
      if (psi_old) {
        blend(*psi_old, pf.psi, cfg.alpha_prime);
      } else {
        psi_old = pf.psi;
      }
      psi_drive = &*psi_old;
      sol.psi = std::move(pf);
    }
    const ScalarField V = driving_potential(psi_drive, sol.vdw, params);

    EvolutionConfig inner = evo;
    inner.audit_constraints = inner.audit_constraints || cfg.audit_constraints;
    EvolutionResult er = evolve_to_quasi_steady(field, V, inner, params, evo.steps_per_coupling);
    sol.evolution_steps += er.steps;
    sol.frozen_energy_increases += er.energy_increases;
    sol.dt_halvings += er.dt_halvings;
    sol.constraint_violations += er.constraint_violations;

    double du = 0.0;
    for (std::size_t n : masks->mixing) {
      const double next = cfg.alpha * er.field.u[n] + (1.0 - cfg.alpha) * field.u[n];
      du = std::max(du, std::abs(next - field.u[n]));
      field.u[n] = next;
    }
    if (cfg.audit_constraints) sol.constraint_violations += constraint_violations(field);
    last_du = du;
    e_prev = e;
  }

  if (!sol.converged) {
    // Leave the report consistent with the returned interface.
    if (problem) {
      sol.psi = problem->solve(field.u, psi_old ? &*psi_old : nullptr);
      ++sol.pb_solves;
      sol.report = total_energy(field, sol.psi.psi, sol.charges, sol.vdw, params, sol.reference,
                                evo.grad_floor, cfg.polar);
    } else {
      sol.report = nonpolar_report(field, sol.vdw, params, evo.grad_floor);
    }
  }
  sol.u = std::move(field);
  return sol;
}

void write_trace(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "outer_iter total_energy max_du pb_residual\n";
  const auto old = os.precision(12);
  for (const auto& r : trace)
    os << r.outer_iter << ' ' << r.total << ' ' << r.max_du << ' ' << r.pb_residual << '\n';
  os.precision(old);
}

}  // namespace vism
