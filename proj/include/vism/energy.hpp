#pragma once

// Discrete solvation free energy on the node grid (weight h^3 per node).
//
// Nonpolar part:
//   repulsive  = gamma * sum |grad u|^q h^3 + P_h * sum u^p h^3
//   attractive = rho_s * sum_{outside solute} (1 - u^p) U^vdW h^3
//
// Polar part: the field functional
//   sum q psi - (h / 8 pi k_e) sum_faces eps_f (dpsi)^2 - h^3 sum (q_k - u^p) B(psi)
// plus the Dirichlet flux term that makes it equal 1/2 sum q psi at a
// salt-free solution, minus the same quantity for the vacuum reference
// (u = 1 everywhere, no ions). The subtraction cancels the grid self-energy
// of the point charges.

#include "vism/grid.hpp"
#include "vism/pb_solver.hpp"
#include "vism/physics.hpp"
#include "vism/surface_evolution.hpp"

namespace vism {

struct EnergyReport {
  double repulsive = 0.0;
  double attractive = 0.0;
  double polar = 0.0;
  double total = 0.0;

  double tv = 0.0;               // gamma * TV_q
  double pressure_volume = 0.0;  // P_h * sum u^p h^3
  double vdw = 0.0;              // equals attractive
  double fixed_charge = 0.0;     // sum q psi
  double dielectric = 0.0;       // -(h / 8 pi k_e) sum eps_f dpsi^2
  double ionic = 0.0;            // -h^3 sum (q_k - u^p) B(psi)
  double boundary_flux = 0.0;
  double reference = 0.0;        // vacuum value of the four terms above
};

struct NonpolarEnergy {
  double repulsive = 0.0;
  double attractive = 0.0;
  double tv = 0.0;
  double pressure_volume = 0.0;
};

/// sum u^p h^3 over all nodes.
double solute_volume(const ScalarField& u, double p);

/// rho_s * sum over non-solute nodes of (1 - u^p) f h^3.
double solvent_weighted_integral(const InterfaceField& field, const ScalarField& f,
                                 const PhysicalParams& params);

NonpolarEnergy nonpolar_energy(const InterfaceField& field, const ScalarField& vdw,
                               const PhysicalParams& params, double grad_floor = 1e-10);

/// The four pieces of the polar functional for one (u, psi) pair.
struct PolarTerms {
  double fixed_charge = 0.0;
  double dielectric = 0.0;
  double ionic = 0.0;
  double boundary_flux = 0.0;

  double sum() const { return fixed_charge + dielectric + ionic + boundary_flux; }
};

/// Evaluates the polar functional pieces without any consistency check.
PolarTerms polar_terms(const ScalarField& u, const ScalarField& psi, const ChargeGrid& charges,
                       const PhysicalParams& params);

/// Polar value of the vacuum reference state of `problem`.
double reference_polar_energy(const PBProblem& problem);

struct PolarOptions {
  /// Largest accepted relative residual of psi in the field equation.
  double residual_tol = 1e-4;
  bool check_residual = true;
};

/// Polar energy of u relative to the vacuum reference. Throws
/// StalePotentialError when psi does not solve the field equation for u.
PolarTerms polar_energy(const ScalarField& u, const ScalarField& psi, const ChargeGrid& charges,
                        const PhysicalParams& params, PolarOptions opts = {});

/// Full report. `reference` is subtracted from the polar sum.
EnergyReport total_energy(const InterfaceField& field, const ScalarField& psi,
                          const ChargeGrid& charges, const ScalarField& vdw,
                          const PhysicalParams& params, double reference,
                          double grad_floor = 1e-10, PolarOptions opts = {});

/// Report without electrostatics (all polar entries zero).
EnergyReport nonpolar_report(const InterfaceField& field, const ScalarField& vdw,
                             const PhysicalParams& params, double grad_floor = 1e-10);

}  // namespace vism
