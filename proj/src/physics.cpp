#include "vism/physics.hpp"

#include <algorithm>
#include <cmath>

#include "vism/error.hpp"

namespace vism {

const LJEntry& LJParams::at(const std::string& tag) const {
  const auto it = table.find(tag);
  if (it == table.end()) throw ConfigError("no LJ parameters for atom type '" + tag + "'");
  return it->second;
}

bool IonSpecies::empty() const {
  return std::all_of(ions.begin(), ions.end(), [](const Ion& i) { return i.c_inf == 0.0; });
}

void IonSpecies::validate() const {
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  double net = 0.0, scale = 0.0;
  for (const auto& ion : ions) {
    if (!(ion.c_inf >= 0.0)) throw ConfigError("ion concentrations must be non-negative");
    net += ion.c_inf * ion.charge;
    scale += std::abs(ion.c_inf * ion.charge);
  }
  if (std::abs(net) > 1e-10 * std::max(scale, 1e-300))
    throw ConfigError("ion species violate electroneutrality (sum c_j q_j != 0)");
}

double IonSpecies::ionic_strength_term() const {
  double s = 0.0;
  for (const auto& ion : ions) s += ion.c_inf * ion.charge * ion.charge;
  return beta * s;
}

void PhysicalParams::validate() const {
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  if (!(pressure >= 0.0)) throw ConfigError("pressure must be non-negative");
  if (!(rho_s >= 0.0)) throw ConfigError("rho_s must be non-negative");
  if (!(eps_m > 0.0) || !(eps_s > eps_m)) throw ConfigError("need 0 < eps_m < eps_s");
  if (N < 2) throw ConfigError("N must be an integer > 1");
  if (!(q_k > 1.0) || !(q_k < q_upper()))
    throw ConfigError("q_k must lie in (1, eps_s/(eps_s - eps_m))");
  if (!(k_e > 0.0)) throw ConfigError("k_e must be positive");
  ions.validate();
  for (const auto& [tag, e] : lj.table) {
    if (!(e.eps >= 0.0)) throw ConfigError("negative well depth for type '" + tag + "'");
    if (!(e.sigma > 0.0)) throw ConfigError("non-positive sigma for type '" + tag + "'");
  }
}

LJParams default_lj_params() {
  LJParams lj;
  lj.table["C"] = {0.486, 3.325};
  lj.table["H"] = {0.0, 2.825};
  return lj;
}

double lj_potential(double r, double eps, double sigma) {
  if (!(r > 0.0)) throw DomainError("lj_potential: r must be positive");
  const double s6 = std::pow(sigma / r, 6);
  return 4.0 * eps * (s6 * s6 - s6);
}

double wca_attractive(double r, double eps, double sigma) {
  if (!(r > 0.0)) throw DomainError("wca_attractive: r must be positive");
  const double r_min = std::pow(2.0, 1.0 / 6.0) * sigma;
  return r < r_min ? -eps : lj_potential(r, eps, sigma);
}

namespace {

ScalarField wca_sum(const Molecule& molecule, const LJParams& lj, const Grid& grid,
                    const std::string* only_tag) {
  struct Site {
    Vec3 x;
    double eps, sigma;
  };
  std::vector<Site> sites;
  for (const auto& a : molecule.atoms) {
    const auto& e = lj.at(a.type);
    if (only_tag && a.type != *only_tag) continue;
    sites.push_back({a.position, only_tag ? 1.0 : e.eps, e.sigma});
  }
  ScalarField out(grid);
  auto& v = out.data();
  const double r_floor = 0.5 * grid.h;
  const auto n_nodes = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < n_nodes; ++n) {
    const Vec3 x = grid.position(static_cast<std::size_t>(n));
    double acc = 0.0;
    for (const auto& s : sites) acc += wca_attractive(std::max(distance(x, s.x), r_floor), s.eps, s.sigma);
    v[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

}  // namespace

ScalarField vdw_field(const Molecule& molecule, const LJParams& lj, const Grid& grid) {
  return wca_sum(molecule, lj, grid, nullptr);
}

ScalarField vdw_unit_field(const Molecule& molecule, const LJParams& lj, const std::string& tag,
                           const Grid& grid) {
  return wca_sum(molecule, lj, grid, &tag);
}

namespace {

double clamped_exponent(double x, bool* clamped) {
  if (x > ionic_exponent_clamp) {
    if (clamped) *clamped = true;
    return ionic_exponent_clamp;
  }
  if (x < -ionic_exponent_clamp) {
    if (clamped) *clamped = true;
    return -ionic_exponent_clamp;
  }
  return x;
}

}  // namespace

double ionic_B(double s, const IonSpecies& ions, bool* clamped) {
  double acc = 0.0;
  for (const auto& ion : ions.ions) {
    if (ion.c_inf == 0.0) continue;
    acc += ion.c_inf * std::expm1(clamped_exponent(-ions.beta * ion.charge * s, clamped));
  }
  return acc / ions.beta;
}

double ionic_B_prime(double s, const IonSpecies& ions, bool* clamped) {
  double acc = 0.0;
  for (const auto& ion : ions.ions) {
    if (ion.c_inf == 0.0) continue;
    acc -= ion.c_inf * ion.charge * std::exp(clamped_exponent(-ions.beta * ion.charge * s, clamped));
  }
  return acc;
}

double ionic_B_second(double s, const IonSpecies& ions, bool* clamped) {
  double acc = 0.0;
  for (const auto& ion : ions.ions) {
    if (ion.c_inf == 0.0) continue;
    acc += ion.c_inf * ion.charge * ion.charge *
           std::exp(clamped_exponent(-ions.beta * ion.charge * s, clamped));
  }
  return ions.beta * acc;
}

double dielectric(double u, const PhysicalParams& params) {
  const double up = std::pow(std::clamp(u, 0.0, 1.0), params.p());
  return up * params.eps_m + (1.0 - up) * params.eps_s;
}

ScalarField dielectric(const ScalarField& u, const PhysicalParams& params) {
  ScalarField out(u.grid());
  for (std::size_t n = 0; n < u.size(); ++n) out[n] = dielectric(u[n], params);
  return out;
}

}  // namespace vism
