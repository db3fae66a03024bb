#include "vism/validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "vism/error.hpp"

namespace vism {

double born_energy_analytical(double q, double R, double eps_m, double eps_s, double k_e) {
  if (!(R > 0.0)) throw DomainError("Born radius must be positive");
  if (!(eps_m > 0.0) || !(eps_s > 0.0)) throw DomainError("dielectric constants must be positive");
  return -0.5 * k_e * q * q * (1.0 / eps_m - 1.0 / eps_s) / R;
}

ScalarField sharp_ball_indicator(const Grid& grid, const Vec3& center, double R) {
  ScalarField u(grid);
  const double r = R + 0.5 * grid.h;
  for (std::size_t n = 0; n < grid.size(); ++n) u[n] = distance(grid.position(n), center) <= r ? 1.0 : 0.0;
  return u;
}

BornPoint born_sharp_solve(const BornConfig& cfg, const PhysicalParams& params, double h) {
  PhysicalParams p = params;
  p.ions.ions.clear();
  Molecule m;
  m.atoms.push_back({{0.0, 0.0, 0.0}, cfg.charge, cfg.radius, "ion"});
  const Grid grid = build_grid(m, h, cfg.pad, 0.0);
  const ScalarField u = sharp_ball_indicator(grid, {0.0, 0.0, 0.0}, cfg.radius);
  PBProblem problem(m, grid, p, cfg.pb);
  const PotentialField pf = problem.solve(u);
  BornPoint pt;
  pt.h = h;
  pt.energy = polar_energy(u, pf.psi, problem.charges(), p).sum() - reference_polar_energy(problem);
  pt.analytic = born_energy_analytical(cfg.charge, cfg.radius, p.eps_m, p.eps_s, p.k_e);
  pt.rel_error = pt.analytic != 0.0 ? (pt.energy - pt.analytic) / pt.analytic : pt.energy;
  pt.iterations = pf.iterations;
  return pt;
}

BornStudy born_refinement(const BornConfig& cfg, const PhysicalParams& params) {
  BornStudy study;
  std::vector<double> hs, errs;
  for (double h : cfg.h_list) {
    study.points.push_back(born_sharp_solve(cfg, params, h));
    hs.push_back(h);
    errs.push_back(std::abs(study.points.back().energy - study.points.back().analytic));
  }
  study.order = hs.size() >= 2 ? richardson_order(hs, errs) : std::numeric_limits<double>::quiet_NaN();
  return study;
}

double richardson_order(const std::vector<double>& h, const std::vector<double>& errors) {
  if (h.size() != errors.size()) throw InputError("richardson_order: length mismatch");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(h[i] > 0.0)) throw DomainError("richardson_order: spacings must be positive");
    if (errors[i] > 0.0 && std::isfinite(errors[i])) {
      x.push_back(std::log(h[i]));
      y.push_back(std::log(errors[i]));
    }
  }
  if (x.size() < 2) throw DomainError("richardson_order: fewer than two usable points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw DomainError("richardson_order: spacings are all equal");
  return sxy / sxx;
}

bool SweepResult::ok() const {
  return !entries.empty() &&
         std::all_of(entries.begin(), entries.end(), [](const SweepEntry& e) { return e.error.empty(); });
}

bool SweepResult::diffs_strictly_decreasing() const {
  for (std::size_t i = 2; i < entries.size(); ++i)
    if (!(entries[i].diff < entries[i - 1].diff)) return false;
  return true;
}

double SweepResult::relative_spread() const {
  double lo = std::numeric_limits<double>::max(), hi = -lo, sum = 0.0;
  int n = 0;
  for (const auto& e : entries) {
    if (!e.error.empty()) continue;
    lo = std::min(lo, e.total);
    hi = std::max(hi, e.total);
    sum += e.total;
    ++n;
  }
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  const double mean = sum / n;
  return mean != 0.0 ? (hi - lo) / std::abs(mean) : hi - lo;
}

namespace {

template <class Setter>
SweepResult run_sweep(const std::string& name, const std::vector<double>& axis, const Molecule& molecule,
                      const PhysicalParams& params, const CouplingConfig& cfg, const EvolutionConfig& evo,
                      Setter set) {
  SweepResult out;
  out.axis_name = name;
  for (double a : axis) {
    SweepEntry e;
    e.axis = a;
    try {
      PhysicalParams p = params;
      set(p, a);
      const Solution s = self_consistent_solve(molecule, p, cfg, evo);
      e.total = s.report.total;
      e.converged = s.converged;
    } catch (const Error& ex) {
      e.error = ex.what();
      e.total = std::numeric_limits<double>::quiet_NaN();
    }
    if (!out.entries.empty()) e.diff = std::abs(e.total - out.entries.back().total);
    out.entries.push_back(e);
  }
  return out;
}

}  // namespace

SweepResult q_sweep(const Molecule& molecule, const PhysicalParams& params,
                    const std::vector<double>& q_list, const CouplingConfig& cfg,
                    const EvolutionConfig& evo) {
  if (q_list.empty()) throw ConfigError("q sweep needs at least one value");
  for (std::size_t i = 0; i < q_list.size(); ++i) {
    if (!(q_list[i] > 1.0 && q_list[i] < params.q_upper()))
      throw ConfigError("q_k = " + std::to_string(q_list[i]) + " outside (1, eps_s/(eps_s - eps_m))");
    if (i > 0 && !(q_list[i] < q_list[i - 1])) throw ConfigError("q list must decrease strictly");
  }
  return run_sweep("q_k", q_list, molecule, params, cfg, evo, [](PhysicalParams& p, double q) { p.q_k = q; });
}

SweepResult n_sweep(const Molecule& molecule, const PhysicalParams& params,
                    const std::vector<int>& n_list, const CouplingConfig& cfg,
                    const EvolutionConfig& evo) {
  if (n_list.empty()) throw ConfigError("N sweep needs at least one value");
  std::vector<double> axis;
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] < 2) throw ConfigError("N must be >= 2");
    axis.push_back(n_list[i]);
  }
  bool up = true, down = true;
  for (std::size_t i = 1; i < axis.size(); ++i) {
    up = up && axis[i] > axis[i - 1];
    down = down && axis[i] < axis[i - 1];
  }
  if (!up && !down) throw ConfigError("N list must be strictly monotone");
  return run_sweep("N", axis, molecule, params, cfg, evo,
                   [](PhysicalParams& p, double n) { p.N = static_cast<int>(n); });
}

double diffuseness_check(const InterfaceField& field, double lo, double hi) {
  if (!(0.0 < lo && lo < hi && hi < 1.0)) throw DomainError("diffuseness bounds must satisfy 0 < lo < hi < 1");
  const auto& mixing = field.masks->mixing;
  if (mixing.empty()) throw DomainError("empty mixing region");
  std::size_t count = 0;
  for (std::size_t n : mixing)
    if (field.u[n] > lo && field.u[n] < hi) ++count;
  return static_cast<double>(count) / static_cast<double>(mixing.size());
}

ScalarField drive_factor(const ScalarField& u, double p) {
  ScalarField out(u.grid());
  for (std::size_t n = 0; n < u.size(); ++n) out[n] = p * std::pow(std::max(u[n], 0.0), p - 1.0);
  return out;
}

void write_sweep_csv(std::ostream& os, const SweepResult& sweep) {
  const auto old = os.precision(12);
  os << "axis_value total_energy diff\n";
  for (std::size_t i = 0; i < sweep.entries.size(); ++i) {
    const auto& e = sweep.entries[i];
    os << e.axis << ' ' << e.total << ' ';
    if (i == 0) os << "nan"; else os << e.diff;
    os << '\n';
  }
  os.precision(old);
}

void write_born_csv(std::ostream& os, const BornStudy& study) {
  const auto old = os.precision(12);
  os << "h energy analytic rel_error\n";
  for (const auto& p : study.points)
    os << p.h << ' ' << p.energy << ' ' << p.analytic << ' ' << p.rel_error << '\n';
  os.precision(old);
}

}  // namespace vism
