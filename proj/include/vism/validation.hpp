#pragma once

// Analytic and convergence checks: the Born ion, sweeps over q_k and N,
// observed order of grid refinement and the diffuse-interface fraction.

#include <iosfwd>
#include <string>
#include <vector>

#include "vism/coupling.hpp"

namespace vism {

/// -(k_e q^2 / 2) (1/eps_m - 1/eps_s) / R.
double born_energy_analytical(double q, double R, double eps_m, double eps_s,
                              double k_e = units::coulomb);

/// Sharp ball indicator used for the Born checks: 1 where |x - c| <= R + h/2.
/// The half-cell dilation offsets the inward shift of the effective
/// dielectric boundary caused by averaging u across faces.
ScalarField sharp_ball_indicator(const Grid& grid, const Vec3& center, double R);

struct BornPoint {
  double h = 0.0;
  double energy = 0.0;
  double analytic = 0.0;
  double rel_error = 0.0;  // (energy - analytic) / analytic
  int iterations = 0;
};

struct BornConfig {
  double charge = 1.0;
  double radius = 2.0;
  double pad = 6.0;
  std::vector<double> h_list{1.0, 0.5, 0.25};
  PBOptions pb;
};

/// Polar energy of a point charge at the centre of a sharp dielectric ball
/// (evolution disabled, no ions).
BornPoint born_sharp_solve(const BornConfig& cfg, const PhysicalParams& params, double h);

struct BornStudy {
  std::vector<BornPoint> points;
  double order = 0.0;  // observed order against the analytic value
};

BornStudy born_refinement(const BornConfig& cfg, const PhysicalParams& params);

/// Least-squares slope of log|error| against log h. Non-positive errors are
/// dropped; fewer than two remaining points is an error.
double richardson_order(const std::vector<double>& h, const std::vector<double>& errors);

struct SweepEntry {
  double axis = 0.0;
  double total = 0.0;
  double diff = 0.0;  // |total - previous total|; 0 for the first entry
  bool converged = false;
  std::string error;  // non-empty if the solve failed
};

struct SweepResult {
  std::string axis_name;
  std::vector<SweepEntry> entries;

  bool ok() const;
  /// Successive diffs (from the second one on) strictly decreasing.
  bool diffs_strictly_decreasing() const;
  /// (max - min) / |mean| over successful entries.
  double relative_spread() const;
};

/// Self-consistent solve for each q_k. The list must decrease strictly
/// toward 1 and stay inside (1, eps_s / (eps_s - eps_m)).
SweepResult q_sweep(const Molecule& molecule, const PhysicalParams& params,
                    const std::vector<double>& q_list, const CouplingConfig& cfg,
                    const EvolutionConfig& evo);

/// Same with N varied (p = 2N / (2N - 1)); the list must be strictly monotone.
SweepResult n_sweep(const Molecule& molecule, const PhysicalParams& params,
                    const std::vector<int>& n_list, const CouplingConfig& cfg,
                    const EvolutionConfig& evo);

/// Fraction of mixing nodes with lo < u < hi.
double diffuseness_check(const InterfaceField& field, double lo, double hi);

/// p u^{p-1} at every node; tends to 1 on (0, 1) as N grows.
ScalarField drive_factor(const ScalarField& u, double p);

/// `axis_value total_energy diff` rows.
void write_sweep_csv(std::ostream& os, const SweepResult& sweep);
/// `h energy analytic rel_error` rows.
void write_born_csv(std::ostream& os, const BornStudy& study);

}  // namespace vism
