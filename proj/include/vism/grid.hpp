#pragma once

// Uniform 3-D lattice, scalar fields on it, the solute description and the
// three-way split of the box into pure solute, pure solvent and mixing band.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vism {

using Vec3 = std::array<double, 3>;

inline double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Uniform node-centred grid. Node (i, j, k) sits at origin + h * (i, j, k).
/// Flat storage is row-major with the z index fastest:
///   index(i, j, k) = (i * ny + j) * nz + k.
struct Grid {
  Vec3 origin{0.0, 0.0, 0.0};
  std::array<int, 3> dims{3, 3, 3};
  double h = 1.0;

  Grid() = default;
  Grid(Vec3 origin_, std::array<int, 3> dims_, double h_);

  std::size_t size() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k;
  }
  std::array<int, 3> ijk(std::size_t n) const {
    const int k = static_cast<int>(n % dims[2]);
    const std::size_t rest = n / dims[2];
    return {static_cast<int>(rest / dims[1]), static_cast<int>(rest % dims[1]), k};
  }
  Vec3 position(int i, int j, int k) const {
    return {origin[0] + h * i, origin[1] + h * j, origin[2] + h * k};
  }
  Vec3 position(std::size_t n) const {
    const auto [i, j, k] = ijk(n);
    return position(i, j, k);
  }
  bool on_boundary(int i, int j, int k) const {
    return i == 0 || j == 0 || k == 0 || i == dims[0] - 1 || j == dims[1] - 1 ||
           k == dims[2] - 1;
  }
  bool on_boundary(std::size_t n) const {
    const auto [i, j, k] = ijk(n);
    return on_boundary(i, j, k);
  }
  /// Flat-index offsets of the +x, +y, +z neighbours.
  std::array<std::size_t, 3> strides() const {
    return {static_cast<std::size_t>(dims[1]) * dims[2], static_cast<std::size_t>(dims[2]), 1};
  }

  bool operator==(const Grid&) const = default;
};

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const Grid& grid, double fill = 0.0)
      : grid_(grid), values_(grid.size(), fill) {}
  ScalarField(const Grid& grid, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t n) { return values_[n]; }
  double operator[](std::size_t n) const { return values_[n]; }
  double& at(int i, int j, int k) { return values_[grid_.index(i, j, k)]; }
  double at(int i, int j, int k) const { return values_[grid_.index(i, j, k)]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }

  bool all_finite() const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

struct Atom {
  Vec3 position{};
  double charge = 0.0;  // e
  double radius = 0.0;  // vdW radius, Angstrom
  std::string type;     // key into the LJ table
};

struct Molecule {
  std::vector<Atom> atoms;

  double total_charge() const;
  bool has_charges() const;
  /// Throws InputError on empty molecules, non-finite positions or
  /// non-positive radii.
  void validate() const;
};

enum class Region : std::uint8_t { Solute = 0, Solvent = 1, Mixing = 2 };

/// Per-node region labels with cached index lists.
struct DomainMasks {
  Grid grid;
  std::vector<Region> region;
  std::vector<std::size_t> solute;
  std::vector<std::size_t> solvent;
  std::vector<std::size_t> mixing;
  /// Nodes at which a central-difference gradient of a feasible u can be
  /// nonzero: the node or one of its six neighbours carries a different
  /// label, or one of them is a mixing node.
  std::vector<std::size_t> support;

  /// Rebuilds the index lists from `labels`; no geometric checks.
  static DomainMasks from_labels(const Grid& grid, std::vector<Region> labels);

  Region at(std::size_t n) const { return region[n]; }
};

struct GridConfig {
  double h = 0.5;              // Angstrom
  double pad = 6.0;            // Angstrom beyond the solvent-accessible surface
  double probe_radius = 0.65;  // Angstrom
};

/// Bounding box of the atoms, expanded on every side by
/// max radius + probe + pad, covered by an odd node count per axis so the
/// box centre is a node.
Grid build_grid(const Molecule& molecule, double h, double pad, double probe_radius = 0.65);

/// min_i (|x - x_i| - (r_i + radius_offset)) at every node.
ScalarField signed_distance_union_balls(const Molecule& molecule, double radius_offset,
                                        const Grid& grid);

DomainMasks classify_domains(const Molecule& molecule, double probe_radius, const Grid& grid);

/// Partial derivatives of `f` at node n: central differences in the
/// interior, one-sided on the grid boundary.
Vec3 gradient(const ScalarField& f, std::size_t n);

inline double gradient_squared(const ScalarField& f, std::size_t n) {
  const Vec3 g = gradient(f, n);
  return g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
}

}  // namespace vism
