// vism: command-line driver.
//
//   vism solve   --molecule mol.xyzr [--config run.conf] [--out dir] [--dump-fields] [--csv]
//   vism fit     manifest.txt [--config run.conf] [--out dir]
//   vism sweep-q --molecule mol.xyzr [--config run.conf] [--out dir]
//   vism sweep-n --molecule mol.xyzr [--config run.conf] [--out dir]
//   vism born    [--config run.conf] [--out dir]
//
// Exit codes: 0 success, 2 not converged, 1 error, 64 usage.

#include <cstdlib>
#include <iomanip>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "vism/error.hpp"
#include "vism/io.hpp"
#include "vism/parallel.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 64;

struct Common {
  std::string config;
  std::string molecule;
  std::string out;
  int threads = -1;
  bool csv = false;
  bool dump_fields = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_molecule) {
  cmd->add_option("--config", c.config, "flat key = value configuration file");
  auto* mol = cmd->add_option("--molecule", c.molecule, "molecule file (x y z charge radius type)");
  if (needs_molecule) mol->description("molecule file (x y z charge radius type); required");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--threads", c.threads, "worker threads (0 = all cores)");
  cmd->add_flag("--csv", c.csv, "write field dumps as i j k value text");
  cmd->add_flag("--dump-fields", c.dump_fields, "write u and psi field dumps");
}

vism::RunConfig load(const Common& c) {
  vism::RunConfig cfg;
  if (!c.config.empty()) vism::read_config(c.config, cfg);
  if (!c.molecule.empty()) cfg.molecule = c.molecule;
  if (!c.out.empty()) cfg.out = c.out;
  if (c.csv) cfg.csv = true;
  if (c.dump_fields) cfg.dump_fields = true;

  int threads = cfg.threads;
  if (const int env = vism::parallel::threads_from_env(); env > 0) threads = env;
  if (c.threads >= 0) threads = c.threads;
  cfg.threads = threads;
  cfg.validate();
  vism::parallel::set_threads(threads);
  fs::create_directories(cfg.out);
  return cfg;
}

vism::Molecule molecule_of(const vism::RunConfig& cfg) {
  if (cfg.molecule.empty()) throw vism::InputError("no molecule given (--molecule or 'molecule' key)");
  return vism::read_molecule(cfg.molecule);
}

std::string config_text(const vism::RunConfig& cfg) {
  std::ostringstream os;
  vism::write_config(os, cfg);
  return os.str();
}

void dump(const vism::RunConfig& cfg, const std::string& stem, const vism::ScalarField& f) {
  std::ostringstream os;
  if (cfg.csv) {
    vism::write_field_csv(os, f);
    vism::write_file_atomic(cfg.out / (stem + ".csv"), os.str());
  } else {
    vism::write_field_binary(os, f);
    vism::write_file_atomic(cfg.out / (stem + ".field"), os.str());
  }
}

int cmd_solve(const Common& c) {
  const vism::RunConfig cfg = load(c);
  const vism::Molecule mol = molecule_of(cfg);
  const vism::Solution s = vism::self_consistent_solve(mol, cfg.params, cfg.coupling, cfg.evolution);
  vism::write_trace(std::cerr, s.trace);
  vism::write_file_atomic(cfg.out / "energy.json", vism::energy_json(s));
  vism::write_file_atomic(cfg.out / "effective.conf", config_text(cfg));
  if (cfg.dump_fields) {
    dump(cfg, "u", s.u.u);
    dump(cfg, "psi", s.psi.psi);
  }
  std::cout << std::setprecision(10) << "total " << s.report.total << " repulsive " << s.report.repulsive
            << " attractive " << s.report.attractive << " polar " << s.report.polar
            << (s.converged ? " converged" : " not-converged") << '\n';
  return s.converged ? 0 : 2;
}

int cmd_fit(const Common& c, const std::string& manifest) {
  const vism::RunConfig cfg = load(c);
  const vism::FitDataset ds = vism::read_manifest(manifest);
  vism::PhysicalParams params = cfg.params;
  const vism::FitState st = vism::fit_parameters(ds, vism::FitState::from_params(params), params, cfg.fit);
  for (const auto& w : st.warnings) std::cerr << "warning: " << w << '\n';
  vism::write_file_atomic(cfg.out / "fit.json", vism::fit_json(st));
  std::cout << std::setprecision(10) << "gamma " << st.gamma << " pressure " << st.pressure;
  for (const auto& [t, e] : st.eps) std::cout << " eps." << t << ' ' << e;
  std::cout << " rms " << st.rms << (st.converged ? " converged" : " not-converged") << '\n';
  return st.converged ? 0 : 2;
}

int finish_sweep(const vism::RunConfig& cfg, const vism::SweepResult& r, const std::string& file) {
  std::ostringstream os;
  vism::write_sweep_csv(os, r);
  vism::write_file_atomic(cfg.out / file, os.str());
  std::cout << os.str();
  bool all_converged = true;
  for (const auto& e : r.entries) {
    if (!e.error.empty()) std::cerr << "error: " << r.axis_name << " = " << e.axis << ": " << e.error << '\n';
    all_converged = all_converged && e.converged;
  }
  if (!r.ok()) return 1;
  return all_converged ? 0 : 2;
}

int cmd_sweep_q(const Common& c) {
  const vism::RunConfig cfg = load(c);
  const auto r = vism::q_sweep(molecule_of(cfg), cfg.params, cfg.q_list, cfg.coupling, cfg.evolution);
  return finish_sweep(cfg, r, "sweep_q.csv");
}

int cmd_sweep_n(const Common& c) {
  const vism::RunConfig cfg = load(c);
  const auto r = vism::n_sweep(molecule_of(cfg), cfg.params, cfg.n_list, cfg.coupling, cfg.evolution);
  return finish_sweep(cfg, r, "sweep_n.csv");
}

int cmd_born(const Common& c) {
  vism::RunConfig cfg = load(c);
  cfg.born.pb = cfg.coupling.pb;
  const vism::BornStudy study = vism::born_refinement(cfg.born, cfg.params);
  std::ostringstream os;
  vism::write_born_csv(os, study);
  vism::write_file_atomic(cfg.out / "born.csv", os.str());
  std::cout << os.str() << "order " << study.order << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational implicit-solvent free energies on a grid"};
  app.name("vism");
  app.require_subcommand(1);

  Common common;
  std::string manifest;
  auto* solve = app.add_subcommand("solve", "self-consistent solve of one molecule");
  add_common(solve, common, true);
  auto* fit = app.add_subcommand("fit", "fit gamma, P_h and well depths to a manifest");
  add_common(fit, common, false);
  fit->add_option("manifest", manifest, "lines of 'molecule_path dG'")->required();
  auto* sq = app.add_subcommand("sweep-q", "total energy over the q_list values");
  add_common(sq, common, true);
  auto* sn = app.add_subcommand("sweep-n", "total energy over the n_list values");
  add_common(sn, common, true);
  auto* born = app.add_subcommand("born", "Born ion check over born_h_list");
  add_common(born, common, false);

  if (argc > 1 && argv[1][0] != '-') {
    const std::string sub = argv[1];
    if (sub != "solve" && sub != "fit" && sub != "sweep-q" && sub != "sweep-n" && sub != "born") {
      std::cerr << "error: unknown subcommand '" << sub << "'\n\n" << app.help();
      return kExitUsage;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*solve) return cmd_solve(common);
    if (*fit) return cmd_fit(common, manifest);
    if (*sq) return cmd_sweep_q(common);
    if (*sn) return cmd_sweep_n(common);
    if (*born) return cmd_born(common);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cerr << app.help();
  return kExitUsage;
}
