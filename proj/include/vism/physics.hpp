#pragma once

// Closed-form physics: Lennard-Jones and its WCA attractive part, the
// dispersion field, the mobile-ion term B and the mixture dielectric.
//
// Units throughout: Angstrom, kcal/mol, elementary charge. The potential psi
// is carried in kcal/(mol e).

#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "vism/grid.hpp"

namespace vism {

namespace units {
/// Coulomb constant, kcal Angstrom / (mol e^2).
inline constexpr double coulomb = 332.0716;
/// k_B T at 298 K, kcal/mol.
inline constexpr double kT_298 = 0.5922;
/// mol/L -> particles per cubic Angstrom.
inline constexpr double molar_to_number_density = 6.02214e-4;
}  // namespace units

struct LJEntry {
  double eps = 0.0;    // well depth, kcal/mol
  double sigma = 1.0;  // Angstrom
};

/// Solute-solvent LJ parameters keyed by atom type tag.
struct LJParams {
  std::map<std::string, LJEntry> table;

  const LJEntry& at(const std::string& tag) const;
  bool contains(const std::string& tag) const { return table.count(tag) != 0; }
};

struct Ion {
  double c_inf = 0.0;   // number density, 1/Angstrom^3
  double charge = 0.0;  // e
};

struct IonSpecies {
  std::vector<Ion> ions;
  double beta = 1.0 / units::kT_298;  // mol/kcal

  bool empty() const;
  /// Non-negative concentrations and sum_j c_j q_j = 0.
  void validate() const;
  /// beta * sum_j c_j q_j^2 (1/(Angstrom^3 kcal/mol)).
  double ionic_strength_term() const;
};

struct PhysicalParams {
  double gamma = 0.0746;     // kcal/(mol A^2)
  double pressure = 0.0090;  // P_h, kcal/(mol A^3)
  double rho_s = 0.03341;    // 1/A^3
  double eps_m = 1.0;
  double eps_s = 80.0;
  int N = 40;                // p = 2N/(2N-1)
  double q_k = 1.00001;
  double k_e = units::coulomb;
  IonSpecies ions;
  LJParams lj;

  double p() const { return 2.0 * N / (2.0 * N - 1.0); }
  /// Upper end of the admissible open interval for q_k.
  double q_upper() const { return eps_s / (eps_s - eps_m); }
  /// 4 pi k_e: converts charge densities to the right-hand side of the
  /// dielectric equation in these units.
  double four_pi_ke() const { return 4.0 * std::numbers::pi * k_e; }
  void validate() const;
};

/// The default type table: carbon-like "C" with the published well depth
/// and hydrogen-like "H" with zero well depth.
LJParams default_lj_params();

double lj_potential(double r, double eps, double sigma);
double wca_attractive(double r, double eps, double sigma);

/// U^vdW(x) = sum_i wca_attractive(|x - x_i|, eps_i, sigma_i); the distance
/// is clamped to h/2 at nodes coinciding with an atom centre.
ScalarField vdw_field(const Molecule& molecule, const LJParams& lj, const Grid& grid);

/// Same sum restricted to atoms of one type, evaluated with unit well depth.
/// The full field is linear in the well depths: U = sum_tag eps_tag * U_tag.
ScalarField vdw_unit_field(const Molecule& molecule, const LJParams& lj, const std::string& tag,
                           const Grid& grid);

/// Largest |beta q_j s| fed to exp() before saturating.
inline constexpr double ionic_exponent_clamp = 40.0;

/// B(s) = beta^-1 sum_j c_j (exp(-beta q_j s) - 1). `clamped` is set when an
/// exponent hit the saturation bound.
double ionic_B(double s, const IonSpecies& ions, bool* clamped = nullptr);
/// B'(s) = -sum_j c_j q_j exp(-beta q_j s).
double ionic_B_prime(double s, const IonSpecies& ions, bool* clamped = nullptr);
/// B''(s) = beta sum_j c_j q_j^2 exp(-beta q_j s).
double ionic_B_second(double s, const IonSpecies& ions, bool* clamped = nullptr);

/// eps(u) = u^p eps_m + (1 - u^p) eps_s with u clamped to [0, 1].
double dielectric(double u, const PhysicalParams& params);
ScalarField dielectric(const ScalarField& u, const PhysicalParams& params);

}  // namespace vism
