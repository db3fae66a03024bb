#pragma once

// Parameter fitting against experimental solvation energies: with u and psi
// frozen the model energy is affine in (gamma, P_h, eps per type), so each
// outer iteration solves every molecule, assembles the affine rows and runs
// non-negative least squares on them.

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vism/coupling.hpp"

namespace vism {

struct NNLSResult {
  Eigen::VectorXd x;
  double objective = 0.0;  // 0.5 * ||Ax - b||^2
  int iterations = 0;
};

/// Lawson-Hanson active-set solver for min ||Ax - b|| subject to x >= 0.
/// Zero columns are pinned to 0.
NNLSResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iter = 0);

/// Affine model of the total energy on frozen fields:
///   E = a_tv * gamma + a_vol * P_h + sum_tag a_eps[tag] * eps[tag] + offset.
struct DesignRow {
  double a_tv = 0.0;
  double a_vol = 0.0;
  std::map<std::string, double> a_eps;  // every type present in the molecule
  double offset = 0.0;                  // polar energy

  double predict(double gamma, double pressure, const LJParams& lj) const;
};

/// Throws FitError for unconverged solutions.
DesignRow energy_design_row(const Solution& solution, const Molecule& molecule,
                            const PhysicalParams& params, double grad_floor = 1e-10);

struct FitEntry {
  std::string name;
  Molecule molecule;
  double dG = 0.0;  // experimental, kcal/mol
};

struct FitDataset {
  std::vector<FitEntry> entries;
  /// Solve nonpolar-only (no field solves) for every entry.
  bool nonpolar = false;

  void validate() const;
};

struct FitConfig {
  bool fit_gamma = true;
  bool fit_pressure = true;
  std::vector<std::string> fit_tags;  // empty: every tag present in the dataset
  double param_tol = 1e-3;            // relative change per parameter
  double param_abs_tol = 1e-8;        // used for parameters at or near 0
  int max_fit_iters = 30;
  double rms_noise = 1e-4;            // kcal/mol
  int max_rms_increases = 3;          // consecutive rises above the noise that abort
  CouplingConfig coupling;
  EvolutionConfig evolution;
};

struct FitIteration {
  int iteration = 0;
  double rms = 0.0;  // of the current parameters against the data
  double gamma = 0.0;
  double pressure = 0.0;
  std::map<std::string, double> eps;
};

struct FitState {
  double gamma = 0.0;
  double pressure = 0.0;
  std::map<std::string, double> eps;
  int iterations = 0;
  bool converged = false;
  double rms = 0.0;  // model RMS after the last parameter update, on frozen fields
  std::vector<FitIteration> history;
  std::vector<std::string> warnings;
  std::vector<std::string> excluded;
  std::vector<double> predicted;  // per used entry, from the last frozen rows
  int pb_solves = 0;

  static FitState from_params(const PhysicalParams& params);
  void apply(PhysicalParams& params) const;
};

FitState fit_parameters(const FitDataset& dataset, const FitState& init,
                        const PhysicalParams& params, const FitConfig& cfg);

}  // namespace vism
