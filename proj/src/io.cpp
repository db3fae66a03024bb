#include "vism/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "vism/error.hpp"

namespace vism {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string where(const std::string& source, int line) { return source + ":" + std::to_string(line) + ": "; }

double to_double(const std::string& tok, const std::string& ctx) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw InputError(ctx + "expected a number, got '" + tok + "'");
  }
  if (used != tok.size() || !std::isfinite(v)) throw InputError(ctx + "expected a number, got '" + tok + "'");
  return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

}  // namespace

Molecule parse_molecule(std::istream& in, const std::string& source) {
  Molecule m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    std::istringstream ss(body);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    const std::string ctx = where(source, lineno);
    if (tok.size() != 6)
      throw InputError(ctx + "expected 'x y z charge radius type', got " + std::to_string(tok.size()) + " fields");
    Atom a;
    for (int d = 0; d < 3; ++d) a.position[d] = to_double(tok[d], ctx);
    a.charge = to_double(tok[3], ctx);
    a.radius = to_double(tok[4], ctx);
    if (!(a.radius > 0.0)) throw InputError(ctx + "radius must be positive");
    a.type = tok[5];
    m.atoms.push_back(a);
  }
  if (m.atoms.empty()) throw InputError(source + ": no atoms");
  return m;
}

Molecule read_molecule(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_molecule(in, path.string());
}

void parse_lj_table(std::istream& in, LJParams& lj, const std::string& source) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    std::istringstream ss(body);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    const std::string ctx = where(source, lineno);
    if (tok.size() != 3) throw InputError(ctx + "expected 'tag eps sigma'");
    LJEntry e{to_double(tok[1], ctx), to_double(tok[2], ctx)};
    if (e.eps < 0.0 || !(e.sigma > 0.0)) throw InputError(ctx + "need eps >= 0 and sigma > 0");
    lj.table[tok[0]] = e;
  }
}

FitDataset read_manifest(const std::filesystem::path& path) {
  auto in = open_input(path);
  FitDataset ds;
  const auto dir = path.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const std::string ctx = where(path.string(), lineno);
    if (body == "nonpolar") {
      ds.nonpolar = true;
      continue;
    }
    std::istringstream ss(body);
    std::string mol, dg, extra;
    if (!(ss >> mol >> dg) || (ss >> extra)) throw InputError(ctx + "expected 'molecule_path dG'");
    std::filesystem::path mp(mol);
    if (mp.is_relative()) mp = dir / mp;
    ds.entries.push_back({mol, read_molecule(mp), to_double(dg, ctx)});
  }
  if (ds.entries.empty()) throw InputError(path.string() + ": manifest has no entries");
  return ds;
}

RunConfig::RunConfig() {
  params.lj = default_lj_params();
  fit.coupling = coupling;
  fit.evolution = evolution;
}

void RunConfig::validate() const {
  params.validate();
  coupling.validate();
  evolution.validate();
  if (threads < 0) throw ConfigError("threads must be >= 0");
  if (!(born.radius > 0.0)) throw ConfigError("born_radius must be positive");
  for (double h : born.h_list)
    if (!(h > 0.0)) throw ConfigError("born_h_list entries must be positive");
  if (!(fit.param_tol > 0.0)) throw ConfigError("param_tol must be positive");
  if (fit.max_fit_iters < 1) throw ConfigError("max_fit_iters must be >= 1");
}

namespace {

struct Value {
  std::string raw;
  bool array = false;
  std::vector<std::string> items;
};

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

Value parse_value(const std::string& text, const std::string& ctx) {
  Value v;
  v.raw = text;
  if (text.empty()) throw ConfigError(ctx + "missing value");
  if (text.front() == '[') {
    if (text.back() != ']') throw ConfigError(ctx + "unterminated array");
    v.array = true;
    std::string inner = trim(text.substr(1, text.size() - 2));
    std::stringstream ss(inner);
    for (std::string item; std::getline(ss, item, ',');) {
      item = trim(item);
      if (item.empty()) throw ConfigError(ctx + "empty array element");
      v.items.push_back(unquote(item));
    }
  }
  return v;
}

double num(const Value& v, const std::string& ctx) {
  if (v.array) throw ConfigError(ctx + "expected a number, got an array");
  try {
    return to_double(v.raw, ctx);
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
}

int integer(const Value& v, const std::string& ctx) {
  const double d = num(v, ctx);
  if (d != std::floor(d) || std::abs(d) > 1e9) throw ConfigError(ctx + "expected an integer, got '" + v.raw + "'");
  return static_cast<int>(d);
}

bool boolean(const Value& v, const std::string& ctx) {
  if (v.raw == "true") return true;
  if (v.raw == "false") return false;
  throw ConfigError(ctx + "expected true or false, got '" + v.raw + "'");
}

std::string str(const Value& v, const std::string& ctx) {
  if (v.array) throw ConfigError(ctx + "expected a string, got an array");
  return unquote(v.raw);
}

std::vector<double> num_list(const Value& v, const std::string& ctx) {
  if (!v.array) throw ConfigError(ctx + "expected an array");
  std::vector<double> out;
  for (const auto& item : v.items) out.push_back(num(Value{item, false, {}}, ctx));
  return out;
}

std::vector<std::string> str_list(const Value& v, const std::string& ctx) {
  if (!v.array) throw ConfigError(ctx + "expected an array");
  return v.items;
}

InitialProfile profile_from(const std::string& s, const std::string& ctx) {
  if (s == "ramp") return InitialProfile::Ramp;
  if (s == "constant") return InitialProfile::Constant;
  throw ConfigError(ctx + "init must be 'ramp' or 'constant'");
}

void apply_key(RunConfig& c, const std::string& key, const Value& v, const std::string& ctx,
               std::map<std::string, std::pair<double, double>>& ion_buf) {
  auto& p = c.params;
  auto& cp = c.coupling;
  auto& ev = c.evolution;
  if (key == "molecule") c.molecule = str(v, ctx);
  else if (key == "out") c.out = str(v, ctx);
  else if (key == "dump_fields") c.dump_fields = boolean(v, ctx);
  else if (key == "csv") c.csv = boolean(v, ctx);
  else if (key == "threads") c.threads = integer(v, ctx);
  else if (key == "gamma") p.gamma = num(v, ctx);
  else if (key == "pressure") p.pressure = num(v, ctx);
  else if (key == "rho_s") p.rho_s = num(v, ctx);
  else if (key == "eps_m") p.eps_m = num(v, ctx);
  else if (key == "eps_s") p.eps_s = num(v, ctx);
  else if (key == "N") p.N = integer(v, ctx);
  else if (key == "q_k") p.q_k = num(v, ctx);
  else if (key == "k_e") p.k_e = num(v, ctx);
  else if (key == "beta") p.ions.beta = num(v, ctx);
  else if (key == "lj_file") {
    const std::filesystem::path path = str(v, ctx);
    auto in = open_input(path);
    parse_lj_table(in, p.lj, path.string());
  } else if (key.rfind("lj.", 0) == 0) {
    const auto dot = key.rfind('.');
    const std::string tag = key.substr(3, dot - 3);
    const std::string field = key.substr(dot + 1);
    if (tag.empty() || dot <= 3) throw ConfigError(ctx + "malformed key '" + key + "'");
    auto& e = p.lj.table[tag];
    if (field == "eps") e.eps = num(v, ctx);
    else if (field == "sigma") e.sigma = num(v, ctx);
    else throw ConfigError(ctx + "unknown key '" + key + "'");
  } else if (key.rfind("ion.", 0) == 0) {
    const auto dot = key.rfind('.');
    const std::string name = key.substr(4, dot - 4);
    const std::string field = key.substr(dot + 1);
    if (name.empty() || dot <= 4) throw ConfigError(ctx + "malformed key '" + key + "'");
    auto& slot = ion_buf.try_emplace(name, std::numeric_limits<double>::quiet_NaN(),
                                     std::numeric_limits<double>::quiet_NaN()).first->second;
    if (field == "concentration") slot.first = num(v, ctx) * units::molar_to_number_density;
    else if (field == "number_density") slot.first = num(v, ctx);
    else if (field == "charge") slot.second = num(v, ctx);
    else throw ConfigError(ctx + "unknown key '" + key + "'");
  }
  else if (key == "h") cp.grid.h = num(v, ctx);
  else if (key == "pad") cp.grid.pad = num(v, ctx);
  else if (key == "probe_radius") cp.grid.probe_radius = num(v, ctx);
  else if (key == "dt_factor") ev.dt_factor = num(v, ctx);
  else if (key == "grad_floor") ev.grad_floor = num(v, ctx);
  else if (key == "steps_per_coupling") ev.steps_per_coupling = integer(v, ctx);
  else if (key == "max_total_steps") ev.max_total_steps = integer(v, ctx);
  else if (key == "convergence_tol") ev.convergence_tol = num(v, ctx);
  else if (key == "monitor_descent") ev.monitor_descent = boolean(v, ctx);
  else if (key == "descent_slack") ev.descent_slack = num(v, ctx);
  else if (key == "audit_constraints") {
    ev.audit_constraints = boolean(v, ctx);
    cp.audit_constraints = ev.audit_constraints;
  }
  else if (key == "alpha") cp.alpha = num(v, ctx);
  else if (key == "alpha_prime") cp.alpha_prime = num(v, ctx);
  else if (key == "outer_tol") cp.outer_tol = num(v, ctx);
  else if (key == "du_tol") cp.du_tol = num(v, ctx);
  else if (key == "max_outer") cp.max_outer = integer(v, ctx);
  else if (key == "warm_start_nonpolar") cp.warm_start_nonpolar = boolean(v, ctx);
  else if (key == "init") cp.init = profile_from(str(v, ctx), ctx);
  else if (key == "nonpolar") cp.nonpolar = boolean(v, ctx);
  else if (key == "increase_slack") cp.increase_slack = num(v, ctx);
  else if (key == "pb_tol") cp.pb.tol = num(v, ctx);
  else if (key == "max_krylov") cp.pb.max_krylov = integer(v, ctx);
  else if (key == "max_newton") cp.pb.max_newton = integer(v, ctx);
  else if (key == "psi_bound") cp.pb.psi_bound = num(v, ctx);
  else if (key == "residual_tol") cp.polar.residual_tol = num(v, ctx);
  else if (key == "fit_gamma") c.fit.fit_gamma = boolean(v, ctx);
  else if (key == "fit_pressure") c.fit.fit_pressure = boolean(v, ctx);
  else if (key == "fit_tags") c.fit.fit_tags = str_list(v, ctx);
  else if (key == "param_tol") c.fit.param_tol = num(v, ctx);
  else if (key == "param_abs_tol") c.fit.param_abs_tol = num(v, ctx);
  else if (key == "max_fit_iters") c.fit.max_fit_iters = integer(v, ctx);
  else if (key == "q_list") c.q_list = num_list(v, ctx);
  else if (key == "n_list") {
    c.n_list.clear();
    for (double d : num_list(v, ctx)) {
      if (d != std::floor(d)) throw ConfigError(ctx + "n_list entries must be integers");
      c.n_list.push_back(static_cast<int>(d));
    }
  }
  else if (key == "born_charge") c.born.charge = num(v, ctx);
  else if (key == "born_radius") c.born.radius = num(v, ctx);
  else if (key == "born_pad") c.born.pad = num(v, ctx);
  else if (key == "born_h_list") c.born.h_list = num_list(v, ctx);
  else throw ConfigError(ctx + "unknown key '" + key + "'");
}

}  // namespace

void parse_config(std::istream& in, RunConfig& cfg, const std::string& source) {
  std::string line;
  int lineno = 0;
  std::map<std::string, std::pair<double, double>> ions;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const std::string ctx = where(source, lineno);
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(ctx + "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) throw ConfigError(ctx + "missing key");
    apply_key(cfg, key, parse_value(trim(body.substr(eq + 1)), ctx), ctx, ions);
  }
  if (!ions.empty()) {
    cfg.params.ions.ions.clear();
    for (const auto& [name, cq] : ions) {
      if (std::isnan(cq.first) || std::isnan(cq.second))
        throw ConfigError(source + ": ion '" + name + "' needs a concentration and a charge");
      cfg.params.ions.ions.push_back({cq.first, cq.second});
    }
  }
  // Solves inside a fit use the same solver settings as a single solve.
  cfg.fit.coupling = cfg.coupling;
  cfg.fit.evolution = cfg.evolution;
}

void read_config(const std::filesystem::path& path, RunConfig& cfg) {
  auto in = open_input(path);
  parse_config(in, cfg, path.string());
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <class T>
std::string list(const std::vector<T>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    if constexpr (std::is_same_v<T, std::string>) s += '"' + v[i] + '"';
    else s += fmt(static_cast<double>(v[i]));
  }
  return s + "]";
}

const char* tf(bool b) { return b ? "true" : "false"; }

}  // namespace

void write_config(std::ostream& os, const RunConfig& c) {
  const auto& p = c.params;
  const auto& cp = c.coupling;
  const auto& ev = c.evolution;
  if (!c.molecule.empty()) os << "molecule = \"" << c.molecule.string() << "\"\n";
  os << "out = \"" << c.out.string() << "\"\n";
  os << "dump_fields = " << tf(c.dump_fields) << "\ncsv = " << tf(c.csv) << "\nthreads = " << c.threads << "\n";
  os << "gamma = " << fmt(p.gamma) << "\npressure = " << fmt(p.pressure) << "\nrho_s = " << fmt(p.rho_s)
     << "\neps_m = " << fmt(p.eps_m) << "\neps_s = " << fmt(p.eps_s) << "\nN = " << p.N
     << "\nq_k = " << fmt(p.q_k) << "\nk_e = " << fmt(p.k_e) << "\nbeta = " << fmt(p.ions.beta) << "\n";
  for (const auto& [tag, e] : p.lj.table)
    os << "lj." << tag << ".eps = " << fmt(e.eps) << "\nlj." << tag << ".sigma = " << fmt(e.sigma) << "\n";
  for (std::size_t i = 0; i < p.ions.ions.size(); ++i) {
    const auto& ion = p.ions.ions[i];
    os << "ion." << i << ".number_density = " << fmt(ion.c_inf) << "\n";
    os << "ion." << i << ".charge = " << fmt(ion.charge) << "\n";
  }
  os << "h = " << fmt(cp.grid.h) << "\npad = " << fmt(cp.grid.pad) << "\nprobe_radius = " << fmt(cp.grid.probe_radius) << "\n";
  os << "dt_factor = " << fmt(ev.dt_factor) << "\ngrad_floor = " << fmt(ev.grad_floor)
     << "\nsteps_per_coupling = " << ev.steps_per_coupling << "\nmax_total_steps = " << ev.max_total_steps
     << "\nconvergence_tol = " << fmt(ev.convergence_tol) << "\nmonitor_descent = " << tf(ev.monitor_descent)
     << "\ndescent_slack = " << fmt(ev.descent_slack) << "\naudit_constraints = " << tf(ev.audit_constraints || cp.audit_constraints) << "\n";
  os << "alpha = " << fmt(cp.alpha) << "\nalpha_prime = " << fmt(cp.alpha_prime) << "\nouter_tol = " << fmt(cp.outer_tol)
     << "\ndu_tol = " << fmt(cp.du_tol) << "\nmax_outer = " << cp.max_outer
     << "\nwarm_start_nonpolar = " << tf(cp.warm_start_nonpolar)
     << "\ninit = " << (cp.init == InitialProfile::Ramp ? "\"ramp\"" : "\"constant\"")
     << "\nnonpolar = " << tf(cp.nonpolar) << "\nincrease_slack = " << fmt(cp.increase_slack) << "\n";
  os << "pb_tol = " << fmt(cp.pb.tol) << "\nmax_krylov = " << cp.pb.max_krylov << "\nmax_newton = " << cp.pb.max_newton
     << "\npsi_bound = " << fmt(cp.pb.psi_bound) << "\nresidual_tol = " << fmt(cp.polar.residual_tol) << "\n";
  os << "fit_gamma = " << tf(c.fit.fit_gamma) << "\nfit_pressure = " << tf(c.fit.fit_pressure)
     << "\nfit_tags = " << list(c.fit.fit_tags) << "\nparam_tol = " << fmt(c.fit.param_tol)
     << "\nparam_abs_tol = " << fmt(c.fit.param_abs_tol) << "\nmax_fit_iters = " << c.fit.max_fit_iters << "\n";
  os << "q_list = " << list(c.q_list) << "\nn_list = " << list(c.n_list) << "\n";
  os << "born_charge = " << fmt(c.born.charge) << "\nborn_radius = " << fmt(c.born.radius)
     << "\nborn_pad = " << fmt(c.born.pad) << "\nborn_h_list = " << list(c.born.h_list) << "\n";
}

void write_field_binary(std::ostream& os, const ScalarField& f) {
  const Grid& g = f.grid();
  os << "VISMFIELD v1\n"
     << "dims " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2] << '\n'
     << "origin " << fmt(g.origin[0]) << ' ' << fmt(g.origin[1]) << ' ' << fmt(g.origin[2]) << '\n'
     << "spacing " << fmt(g.h) << '\n';
  std::vector<char> buf(f.size() * 8);
  for (std::size_t n = 0; n < f.size(); ++n) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(f[n]);
    for (int b = 0; b < 8; ++b) buf[n * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

ScalarField read_field_binary(std::istream& is) {
  std::string line;
  auto expect = [&](const char* tag) {
    if (!std::getline(is, line)) throw InputError("field dump: truncated header");
    std::istringstream ss(line);
    std::string t;
    ss >> t;
    if (t != tag) throw InputError(std::string("field dump: expected '") + tag + "' line");
    return std::string(line.substr(t.size()));
  };
  if (!std::getline(is, line) || line != "VISMFIELD v1") throw InputError("field dump: bad magic line");
  std::istringstream dims(expect("dims")), origin(expect("origin")), spacing(expect("spacing"));
  std::array<int, 3> d{};
  Vec3 o{};
  double h = 0.0;
  if (!(dims >> d[0] >> d[1] >> d[2]) || !(origin >> o[0] >> o[1] >> o[2]) || !(spacing >> h))
    throw InputError("field dump: malformed header");
  const Grid g(o, d, h);
  std::vector<char> buf(g.size() * 8);
  if (!is.read(buf.data(), static_cast<std::streamsize>(buf.size()))) throw InputError("field dump: truncated data");
  std::vector<double> values(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[n * 8 + b])) << (8 * b);
    values[n] = std::bit_cast<double>(bits);
  }
  return ScalarField(g, std::move(values));
}

void write_field_csv(std::ostream& os, const ScalarField& f) {
  const Grid& g = f.grid();
  os << "i j k value\n" << std::setprecision(17);
  for (std::size_t n = 0; n < f.size(); ++n) {
    const auto [i, j, k] = g.ijk(n);
    os << i << ' ' << j << ' ' << k << ' ' << f[n] << '\n';
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw InputError("write failed for " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string energy_json(const Solution& s) {
  using nlohmann::ordered_json;
  const auto& r = s.report;
  ordered_json j;
  j["converged"] = s.converged;
  j["report"] = {{"repulsive", r.repulsive}, {"attractive", r.attractive}, {"polar", r.polar},
                 {"total", r.total}, {"tv", r.tv}, {"pressure_volume", r.pressure_volume},
                 {"vdw", r.vdw}, {"fixed_charge", r.fixed_charge}, {"dielectric", r.dielectric},
                 {"ionic", r.ionic}, {"boundary_flux", r.boundary_flux}, {"reference", r.reference}};
  j["outer_iterations"] = s.outer_iterations;
  j["evolution_steps"] = s.evolution_steps;
  j["pb_solves"] = s.pb_solves;
  j["energy_increases"] = s.energy_increases;
  j["constraint_violations"] = s.constraint_violations;
  j["final_max_du"] = s.trace.empty() ? 0.0 : s.trace.back().max_du;
  j["final_pb_residual"] = s.psi.residual;
  ordered_json trace = ordered_json::array();
  for (const auto& t : s.trace)
    trace.push_back({{"outer_iter", t.outer_iter}, {"total_energy", t.total}, {"max_du", t.max_du},
                     {"pb_residual", t.pb_residual}});
  j["trace"] = trace;
  return j.dump(2) + "\n";
}

std::string fit_json(const FitState& s) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["converged"] = s.converged;
  j["iterations"] = s.iterations;
  j["rms"] = s.rms;
  j["parameters"] = {{"gamma", s.gamma}, {"pressure", s.pressure}};
  ordered_json eps = ordered_json::object();
  for (const auto& [t, e] : s.eps) eps[t] = e;
  j["parameters"]["eps"] = eps;
  ordered_json hist = ordered_json::array();
  for (const auto& h : s.history) {
    ordered_json he = ordered_json::object();
    for (const auto& [t, e] : h.eps) he[t] = e;
    hist.push_back({{"iteration", h.iteration}, {"rms", h.rms}, {"gamma", h.gamma}, {"pressure", h.pressure}, {"eps", he}});
  }
  j["history"] = hist;
  j["predicted"] = s.predicted;
  j["excluded"] = s.excluded;
  j["warnings"] = s.warnings;
  j["pb_solves"] = s.pb_solves;
  return j.dump(2) + "\n";
}

}  // namespace vism
