#include "vism/grid.hpp"

#include <algorithm>
#include <limits>

#include "vism/error.hpp"

namespace vism {

Grid::Grid(Vec3 origin_, std::array<int, 3> dims_, double h_)
    : origin(origin_), dims(dims_), h(h_) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("grid spacing must be positive");
  for (int d : dims)
    if (d < 3) throw ConfigError("grid needs at least 3 nodes per axis");
}

ScalarField::ScalarField(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw InputError("field length " + std::to_string(values_.size()) +
                     " does not match grid node count " + std::to_string(grid_.size()));
}

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double Molecule::total_charge() const {
  double q = 0.0;
  for (const auto& a : atoms) q += a.charge;
  return q;
}

bool Molecule::has_charges() const {
  return std::any_of(atoms.begin(), atoms.end(), [](const Atom& a) { return a.charge != 0.0; });
}

void Molecule::validate() const {
  if (atoms.empty()) throw InputError("molecule has no atoms");
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const auto& a = atoms[i];
    for (double c : a.position)
      if (!std::isfinite(c)) throw InputError("atom " + std::to_string(i) + ": non-finite coordinate");
    if (!(a.radius > 0.0) || !std::isfinite(a.radius))
      throw InputError("atom " + std::to_string(i) + ": radius must be positive");
    if (!std::isfinite(a.charge)) throw InputError("atom " + std::to_string(i) + ": non-finite charge");
  }
}

DomainMasks DomainMasks::from_labels(const Grid& grid, std::vector<Region> labels) {
  if (labels.size() != grid.size()) throw InputError("label count does not match grid");
  DomainMasks m;
  m.grid = grid;
  m.region = std::move(labels);
  const auto s = grid.strides();
  for (std::size_t n = 0; n < grid.size(); ++n) {
    switch (m.region[n]) {
      case Region::Solute: m.solute.push_back(n); break;
      case Region::Solvent: m.solvent.push_back(n); break;
      case Region::Mixing: m.mixing.push_back(n); break;
    }
    const auto [i, j, k] = grid.ijk(n);
    const Region self = m.region[n];
    bool active = self == Region::Mixing;
    const int idx[3] = {i, j, k};
    for (int d = 0; d < 3 && !active; ++d) {
      if (idx[d] > 0) {
        const Region r = m.region[n - s[d]];
        active = active || r != self || r == Region::Mixing;
      }
      if (idx[d] < grid.dims[d] - 1) {
        const Region r = m.region[n + s[d]];
        active = active || r != self || r == Region::Mixing;
      }
    }
    if (active) m.support.push_back(n);
  }
  return m;
}

Grid build_grid(const Molecule& molecule, double h, double pad, double probe_radius) {
  molecule.validate();
  if (!(h > 0.0)) throw ConfigError("grid spacing h must be positive");
  if (!(pad >= 0.0)) throw ConfigError("pad must be non-negative");
  if (!(probe_radius >= 0.0)) throw ConfigError("probe radius must be non-negative");

  Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
          std::numeric_limits<double>::max()};
  Vec3 hi{-lo[0], -lo[1], -lo[2]};
  double rmax = 0.0;
  for (const auto& a : molecule.atoms) {
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], a.position[d]);
      hi[d] = std::max(hi[d], a.position[d]);
    }
    rmax = std::max(rmax, a.radius);
  }
  const double margin = rmax + probe_radius + pad;
  Vec3 origin{};
  std::array<int, 3> dims{};
  for (int d = 0; d < 3; ++d) {
    const double half = 0.5 * (hi[d] - lo[d]) + margin;
    const int half_cells = std::max(1, static_cast<int>(std::ceil(half / h - 1e-12)));
    dims[d] = 2 * half_cells + 1;
    origin[d] = 0.5 * (lo[d] + hi[d]) - half_cells * h;
  }
  return Grid(origin, dims, h);
}

ScalarField signed_distance_union_balls(const Molecule& molecule, double radius_offset,
                                        const Grid& grid) {
  if (!(radius_offset >= 0.0)) throw ConfigError("radius offset must be non-negative");
  ScalarField out(grid);
  auto& v = out.data();
  const auto n_nodes = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < n_nodes; ++n) {
    const Vec3 x = grid.position(static_cast<std::size_t>(n));
    double best = std::numeric_limits<double>::max();
    for (const auto& a : molecule.atoms)
      best = std::min(best, distance(x, a.position) - (a.radius + radius_offset));
    v[static_cast<std::size_t>(n)] = best;
  }
  return out;
}

DomainMasks classify_domains(const Molecule& molecule, double probe_radius, const Grid& grid) {
  molecule.validate();
  if (!(probe_radius > 0.0)) throw ConfigError("probe radius must be positive");
  const ScalarField vdw = signed_distance_union_balls(molecule, 0.0, grid);
  const ScalarField sas = signed_distance_union_balls(molecule, probe_radius, grid);

  std::vector<Region> labels(grid.size(), Region::Mixing);
  for (std::size_t n = 0; n < grid.size(); ++n) {
    if (grid.on_boundary(n)) {
      if (sas[n] < 0.0)
        throw ConfigError("solvent-accessible surface reaches the grid boundary; increase pad");
      labels[n] = Region::Solvent;
    } else if (vdw[n] <= 0.0) {
      labels[n] = Region::Solute;
    } else if (sas[n] >= 0.0) {
      labels[n] = Region::Solvent;
    }
  }

  // Every atom centre must fall in a cell touching a solute node.
  for (std::size_t a = 0; a < molecule.atoms.size(); ++a) {
    const auto& p = molecule.atoms[a].position;
    int base[3];
    for (int d = 0; d < 3; ++d) {
      base[d] = static_cast<int>(std::floor((p[d] - grid.origin[d]) / grid.h));
      if (base[d] < 0 || base[d] >= grid.dims[d] - 1)
        throw ConfigError("atom " + std::to_string(a) + " lies outside the grid");
    }
    bool found = false;
    for (int c = 0; c < 8 && !found; ++c)
      found = labels[grid.index(base[0] + (c & 1), base[1] + ((c >> 1) & 1),
                                base[2] + ((c >> 2) & 1))] == Region::Solute;
    if (!found)
      throw ConfigError("grid too coarse: atom " + std::to_string(a) +
                        " has no solute node in its cell");
  }

  auto masks = DomainMasks::from_labels(grid, std::move(labels));
  if (masks.solvent.empty() || masks.solute.empty())
    throw ConfigError("domain decomposition left an empty solute or solvent region");
  return masks;
}

Vec3 gradient(const ScalarField& f, std::size_t n) {
  const Grid& g = f.grid();
  const auto s = g.strides();
  const auto idx = g.ijk(n);
  Vec3 out{};
  for (int d = 0; d < 3; ++d) {
    if (idx[d] == 0)
      out[d] = (f[n + s[d]] - f[n]) / g.h;
    else if (idx[d] == g.dims[d] - 1)
      out[d] = (f[n] - f[n - s[d]]) / g.h;
    else
      out[d] = (f[n + s[d]] - f[n - s[d]]) / (2.0 * g.h);
  }
  return out;
}

}  // namespace vism
