#pragma once

// Self-consistent alternation of interface relaxation and field solves with
// under-relaxation of both iterates.

#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "vism/energy.hpp"
#include "vism/grid.hpp"
#include "vism/pb_solver.hpp"
#include "vism/physics.hpp"
#include "vism/surface_evolution.hpp"

namespace vism {

struct CouplingConfig {
  double alpha = 0.5;        // u <- alpha u_new + (1 - alpha) u_old
  double alpha_prime = 0.5;  // psi <- alpha' psi_new + (1 - alpha') psi_old
  double outer_tol = 1e-5;   // relative change of the total energy
  double du_tol = 1e-3;      // max |u change| over the last outer iteration
  int max_outer = 200;
  bool warm_start_nonpolar = true;
  InitialProfile init = InitialProfile::Ramp;
  /// Skip all field solves; V carries only the nonpolar terms.
  bool nonpolar = false;
  /// Count constraint violations after every evolution step and blend.
  bool audit_constraints = false;
  /// Relative energy rise between outer iterations counted as an increase.
  double increase_slack = 1e-6;
  GridConfig grid;
  PBOptions pb;
  PolarOptions polar;

  void validate() const;
};

struct TraceRow {
  int outer_iter = 0;
  double total = 0.0;
  double max_du = 0.0;       // change of u in the preceding outer iteration
  double pb_residual = 0.0;
};

/// Optional starting point: both fields must live on the grid the solve
/// builds for the molecule.
struct SolveStart {
  std::optional<ScalarField> u;
  std::optional<ScalarField> psi;
};

struct Solution {
  InterfaceField u;
  PotentialField psi;
  EnergyReport report;
  std::vector<TraceRow> trace;
  bool converged = false;

  int outer_iterations = 0;
  int evolution_steps = 0;
  int pb_solves = 0;
  int energy_increases = 0;         // outer iterations with total rising above the slack
  int frozen_energy_increases = 0;  // summed over all evolution runs
  int dt_halvings = 0;
  std::size_t constraint_violations = 0;

  ScalarField vdw;
  ChargeGrid charges;
  double reference = 0.0;
  PhysicalParams params;
};

Solution self_consistent_solve(const Molecule& molecule, const PhysicalParams& params,
                               const CouplingConfig& cfg, const EvolutionConfig& evo,
                               const SolveStart* start = nullptr);

/// Writes `outer_iter total_energy max_du pb_residual` rows.
void write_trace(std::ostream& os, const std::vector<TraceRow>& trace);

}  // namespace vism
