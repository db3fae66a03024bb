#pragma once

// Finite-difference solver for the perturbed Poisson-Boltzmann equation
//
//   div(eps(u) grad psi) - 4 pi k_e (q_k - u^p) B'(psi) = -4 pi k_e rho_m
//
// on the node grid, psi = psi_inf on the outer boundary. The 4 pi k_e factor
// carries the unit conversion so psi comes out in kcal/(mol e).
//
// Discretisation: 7-point conservative stencil with face dielectric
// eps(0.5 * (u_a + u_b)); fixed charges spread trilinearly; Dirichlet nodes
// eliminated so the stored operator is symmetric. Salt-free problems are a
// single Jacobi-preconditioned CG solve; the ionic term is handled by damped
// Newton around the previous iterate.

#include <optional>
#include <vector>

#include "vism/grid.hpp"
#include "vism/physics.hpp"

namespace vism {

struct ChargeGrid {
  ScalarField values;  // e per node
};

ChargeGrid spread_charges(const Molecule& molecule, const Grid& grid);

/// Screened Coulomb sum sum_i k_e q_i exp(-kappa r_i) / (eps_s r_i) with the
/// Debye parameter of the bulk ions (kappa = 0 without salt).
double boundary_potential(const Molecule& molecule, const Vec3& x, const PhysicalParams& params);

/// Same sum for an arbitrary homogeneous dielectric and screening length.
double coulomb_potential(const Molecule& molecule, const Vec3& x, double eps, double kappa,
                         double k_e);

double debye_kappa(const PhysicalParams& params);

/// Boundary nodes carry psi_inf, interior nodes are zero.
ScalarField boundary_values(const Molecule& molecule, const Grid& grid, const PhysicalParams& params);

/// Symmetric 7-point operator. Face coefficients are stored on the lower
/// node of each face (fx[n] couples n and n + x); faces touching a Dirichlet
/// node are folded into `rhs` and stored as zero. Dirichlet rows are the
/// identity with rhs = boundary value.
struct LinearSystem {
  Grid grid;
  std::vector<double> diag;
  std::vector<double> fx, fy, fz;
  std::vector<double> rhs;
  std::vector<std::uint8_t> dirichlet;

  void apply(std::span<const double> x, std::span<double> y) const;
  /// Off-diagonal entry between n and its neighbour in direction `dir`
  /// (0..5 = -x, +x, -y, +y, -z, +z), as it appears in the matrix.
  double neighbour_coefficient(std::size_t n, int dir) const;
};

/// Face dielectric eps(mean of u across the face) for the three face
/// families; index n holds the face between n and n + e_d. Entries on the
/// last layer of each axis are unused and set to zero.
struct FaceDielectric {
  std::vector<double> x, y, z;
};
FaceDielectric face_dielectric(const ScalarField& u, const PhysicalParams& params);

/// Assembles the linear system. Dirichlet data are read from the boundary
/// nodes of `linearization`; with ions present the ionic term is linearised
/// around `linearization` (Newton).
LinearSystem assemble_ppb_system(const ScalarField& u, const ChargeGrid& charges,
                                 const ScalarField& linearization, const PhysicalParams& params);

struct PBOptions {
  double tol = 1e-6;
  int max_krylov = 20000;
  int max_newton = 50;
  /// Runtime sanity bound on sup|psi|; exceeding it is a solver error.
  double psi_bound = 1e7;
};

struct PotentialField {
  ScalarField psi;
  int iterations = 0;         // total Krylov iterations
  int newton_iterations = 0;  // 0 for salt-free solves
  double residual = 0.0;      // final relative residual of the field equation
  std::vector<double> residual_history;
};

/// Relative residual ||F(psi)|| / ||f|| of the nonlinear field equation over
/// interior nodes, where f collects fixed charges and Dirichlet data.
double ppb_residual(const ScalarField& u, const ChargeGrid& charges, const ScalarField& psi,
                    const PhysicalParams& params);

/// Jacobi-preconditioned conjugate gradients. Throws SolverError when the
/// relative residual does not reach `tol` within `max_iter` iterations.
int conjugate_gradient(const LinearSystem& sys, std::span<double> x, double tol, int max_iter,
                       std::vector<double>* history = nullptr, double* final_residual = nullptr);

/// Per-molecule state of the field solve: grid, spread charges and boundary
/// data are built once and reused for every interface profile.
class PBProblem {
 public:
  PBProblem(const Molecule& molecule, const Grid& grid, const PhysicalParams& params,
            PBOptions options = {});

  const Grid& grid() const { return grid_; }
  const ChargeGrid& charges() const { return charges_; }
  const ScalarField& boundary() const { return boundary_; }
  const PhysicalParams& params() const { return params_; }
  const PBOptions& options() const { return options_; }

  PotentialField solve(const ScalarField& u, const ScalarField* initial_guess = nullptr) const;

  /// Homogeneous solute dielectric everywhere, no mobile ions, Coulomb
  /// boundary data with eps_m: the gas-phase reference state.
  PotentialField solve_reference() const;

 private:
  Grid grid_;
  PhysicalParams params_;
  PBOptions options_;
  ChargeGrid charges_;
  ScalarField boundary_;
  Molecule molecule_;
};

PotentialField solve_ppb(const ScalarField& u, const Molecule& molecule,
                         const PhysicalParams& params, const ScalarField* initial_guess = nullptr,
                         PBOptions options = {});

}  // namespace vism
