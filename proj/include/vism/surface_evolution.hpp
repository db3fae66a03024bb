#pragma once

// Explicit pseudo-time relaxation of the characteristic field u toward the
// stationary condition
//
//   gamma q div(|grad u|^{q-2} grad u) - p u^{p-1} V = 0   in the mixing band,
//
// with u pinned to 1 in the solute and 0 in the solvent and clipped to [0, 1].

#include <memory>

#include "vism/grid.hpp"
#include "vism/physics.hpp"

namespace vism {

struct EvolutionConfig {
  double dt_factor = 0.1;
  double grad_floor = 1e-10;
  int steps_per_coupling = 50;
  int max_total_steps = 20000;
  double convergence_tol = 1e-6;  // on max |du| per step
  /// Evaluate the frozen-potential energy every step and halve dt after
  /// three consecutive increases.
  bool monitor_descent = true;
  double descent_slack = 1e-8;  // relative
  /// Check the feasibility constraints after every step and count
  /// violations.
  bool audit_constraints = false;

  void validate() const;
};

struct InterfaceField {
  ScalarField u;
  std::shared_ptr<const DomainMasks> masks;
};

enum class InitialProfile { Ramp, Constant };

/// Feasible starting field: 1 on solute, 0 on solvent, and on mixing nodes
/// either a linear ramp in the normalised distance between the vdW and SAS
/// surfaces or the constant 0.5.
InterfaceField initial_interface(const Molecule& molecule, double probe_radius,
                                 std::shared_ptr<const DomainMasks> masks, InitialProfile profile);

/// V = P_h - rho_s U^vdW + B(psi) + (eps_s - eps_m)/(8 pi k_e) |grad psi|^2.
/// Passing psi == nullptr gives the non-electrostatic potential.
ScalarField driving_potential(const ScalarField* psi, const ScalarField& vdw,
                              const PhysicalParams& params);

/// Pseudo-time step: dt_factor * min(h^2 / (gamma q), h / (p max(-V) on the
/// mixing band)). Only negative V enters the second bound because the
/// positive part of the drive is stepped implicitly.
double stable_time_step(const InterfaceField& field, const ScalarField& V,
                        const EvolutionConfig& cfg, const PhysicalParams& params);

/// Time derivative of u at one mixing node (expanded anisotropic-diffusion
/// form plus the descent drive term).
double evolution_rate(const ScalarField& u, std::size_t n, double V, const EvolutionConfig& cfg,
                      const PhysicalParams& params);

struct StepResult {
  InterfaceField field;
  double max_du = 0.0;
};

/// One update on the mixing nodes: diffusion and the V <= 0 part of the drive
/// explicitly, the V > 0 part (convex in u) by a per-node proximal solve of
///   v + dt |grad u|^{2-q} p V v^{p-1} = u + dt * diffusion.
/// Fixed points are those of evolution_rate. The result is not clipped.
StepResult evolution_step(const InterfaceField& field, const ScalarField& V,
                          const EvolutionConfig& cfg, const PhysicalParams& params, double dt);
StepResult evolution_step(const InterfaceField& field, const ScalarField& V,
                          const EvolutionConfig& cfg, const PhysicalParams& params);

/// Clip to [0, 1] and re-pin solute/solvent nodes.
InterfaceField enforce_constraints(InterfaceField field);
void enforce_constraints_in_place(InterfaceField& field);

/// Number of nodes violating 0 <= u <= 1, u = 1 on solute or u = 0 on solvent.
std::size_t constraint_violations(const InterfaceField& field);

/// sum over the gradient support of [max(|grad u|^2, floor)^{q/2} - floor^{q/2}] h^3:
/// the W^{1,q} surrogate of the total variation, zero on flat regions.
double tv_integral(const InterfaceField& field, double q, double grad_floor);

/// gamma * tv + sum_mixing u^p V h^3: the part of the energy that changes
/// with u when the potential is frozen (up to a u-independent constant).
double frozen_energy(const InterfaceField& field, const ScalarField& V, const PhysicalParams& params,
                     double grad_floor);

struct EvolutionResult {
  InterfaceField field;
  bool converged = false;
  int steps = 0;
  double last_max_du = 0.0;
  double final_dt = 0.0;
  int energy_increases = 0;      // steps where frozen energy rose by more than the slack
  int dt_halvings = 0;
  std::size_t constraint_violations = 0;  // audited after every step
  std::vector<double> energy_trace;       // frozen energy after each step, if monitored
};

/// Repeats evolution_step + enforce_constraints until max|du| <
/// cfg.convergence_tol or `max_steps` steps (cfg.max_total_steps when
/// negative) have been taken.
EvolutionResult evolve_to_quasi_steady(const InterfaceField& field, const ScalarField& V,
                                       const EvolutionConfig& cfg, const PhysicalParams& params,
                                       int max_steps = -1);

}  // namespace vism
