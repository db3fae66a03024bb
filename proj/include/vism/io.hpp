#pragma once

// File formats: molecules, LJ tables, fit manifests, the flat key = value run
// configuration, field dumps and the JSON reports.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vism/coupling.hpp"
#include "vism/fitting.hpp"
#include "vism/validation.hpp"

namespace vism {

/// `x y z charge radius type` per line; `#` starts a comment.
Molecule parse_molecule(std::istream& in, const std::string& source = "<input>");
Molecule read_molecule(const std::filesystem::path& path);

/// `tag eps sigma` per line; entries are added to (and override) `lj`.
void parse_lj_table(std::istream& in, LJParams& lj, const std::string& source = "<input>");

/// `molecule_path dG` per line, paths relative to the manifest's directory.
/// A line reading `nonpolar` flags the dataset for nonpolar-only solves.
FitDataset read_manifest(const std::filesystem::path& path);

struct RunConfig {
  std::filesystem::path molecule;
  std::filesystem::path out = ".";
  bool dump_fields = false;
  bool csv = false;
  int threads = 0;

  PhysicalParams params;
  CouplingConfig coupling;
  EvolutionConfig evolution;
  FitConfig fit;
  BornConfig born;
  std::vector<double> q_list{1.01, 1.001, 1.0001, 1.00001, 1.000001};
  std::vector<int> n_list{5, 10, 20, 40};

  RunConfig();
  /// Range checks on every section; throws ConfigError.
  void validate() const;
};

/// Flat `key = value` text: numbers, true/false, bare or quoted strings and
/// one-line arrays `[a, b, c]`. `#` starts a comment. Unknown keys and
/// malformed values are ConfigErrors naming the line.
void parse_config(std::istream& in, RunConfig& cfg, const std::string& source = "<input>");
void read_config(const std::filesystem::path& path, RunConfig& cfg);
/// Every key with its effective value, in the format parse_config reads.
void write_config(std::ostream& os, const RunConfig& cfg);

/// Binary dump: text header `VISMFIELD v1`, `dims`, `origin`, `spacing`
/// lines, then the values as little-endian doubles in storage order.
void write_field_binary(std::ostream& os, const ScalarField& f);
ScalarField read_field_binary(std::istream& is);
/// `i j k value` rows.
void write_field_csv(std::ostream& os, const ScalarField& f);

/// Writes to a temporary file next to `path` and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string energy_json(const Solution& solution);
std::string fit_json(const FitState& state);

}  // namespace vism
