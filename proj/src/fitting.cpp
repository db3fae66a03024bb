#include "vism/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "vism/error.hpp"

namespace vism {

NNLSResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iter) {
  const Eigen::Index m = A.rows(), n = A.cols();
  if (m < 1 || n < 1) throw InputError("nnls: empty system");
  if (b.size() != m) throw InputError("nnls: right-hand side length does not match rows");
  if (!A.allFinite() || !b.allFinite()) throw InputError("nnls: non-finite entries");
  if (max_iter <= 0) max_iter = 30 * static_cast<int>(n) + 30;

  const double tol = 10.0 * std::numeric_limits<double>::epsilon() *
                     std::max<double>(1.0, A.cwiseAbs().maxCoeff()) * static_cast<double>(std::max(m, n));
  std::vector<bool> usable(n), passive(n, false);
  for (Eigen::Index j = 0; j < n; ++j) usable[j] = A.col(j).squaredNorm() > 0.0;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  NNLSResult res;

  auto solve_free = [&](const std::vector<bool>& free) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (free[j]) idx.push_back(j);
    Eigen::MatrixXd Ap(m, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) Ap.col(static_cast<Eigen::Index>(c)) = A.col(idx[c]);
    const Eigen::VectorXd sp = Ap.colPivHouseholderQr().solve(b);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    for (std::size_t c = 0; c < idx.size(); ++c) s[idx[c]] = sp[static_cast<Eigen::Index>(c)];
    return s;
  };

  Eigen::VectorXd w = A.transpose() * (b - A * x);
  while (res.iterations < max_iter) {
    Eigen::Index t = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[j] || !usable[j]) continue;
      if (w[j] > best) {
        best = w[j];
        t = j;
      }
    }
    if (t < 0) break;
    passive[t] = true;
    ++res.iterations;

    for (;;) {
      Eigen::VectorXd s = solve_free(passive);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && s[j] <= 0.0) feasible = false;
      if (feasible) {
        x = s;
        break;
      }
      double alpha = std::numeric_limits<double>::max();
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && s[j] <= 0.0) alpha = std::min(alpha, x[j] / (x[j] - s[j]));
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && x[j] <= tol) {
          passive[j] = false;
          x[j] = 0.0;
        }
      }
      if (++res.iterations >= max_iter) break;
    }
    w = A.transpose() * (b - A * x);
  }
  res.x = x;
  res.objective = 0.5 * (A * x - b).squaredNorm();
  return res;
}

double DesignRow::predict(double gamma, double pressure, const LJParams& lj) const {
  double e = a_tv * gamma + a_vol * pressure + offset;
  for (const auto& [tag, a] : a_eps) e += a * lj.at(tag).eps;
  return e;
}

DesignRow energy_design_row(const Solution& solution, const Molecule& molecule,
                            const PhysicalParams& params, double grad_floor) {
  if (!solution.converged) throw FitError("design row requested for an unconverged solution");
  const Grid& g = solution.u.u.grid();
  DesignRow row;
  row.a_tv = tv_integral(solution.u, params.q_k, grad_floor);
  row.a_vol = solute_volume(solution.u.u, params.p());
  std::set<std::string> tags;
  for (const auto& a : molecule.atoms) tags.insert(a.type);
  for (const auto& tag : tags)
    row.a_eps[tag] = solvent_weighted_integral(solution.u, vdw_unit_field(molecule, params.lj, tag, g), params);
  row.offset = solution.report.polar;
  return row;
}

void FitDataset::validate() const {
  if (entries.empty()) throw FitError("empty fit dataset");
  for (const auto& e : entries) {
    if (!std::isfinite(e.dG)) throw FitError("entry " + e.name + ": non-finite experimental energy");
    e.molecule.validate();
  }
}

FitState FitState::from_params(const PhysicalParams& params) {
  FitState s;
  s.gamma = params.gamma;
  s.pressure = params.pressure;
  for (const auto& [tag, e] : params.lj.table) s.eps[tag] = e.eps;
  return s;
}

void FitState::apply(PhysicalParams& params) const {
  params.gamma = gamma;
  params.pressure = pressure;
  for (const auto& [tag, e] : eps) params.lj.table[tag].eps = e;
}

namespace {

bool close(double a, double b, double rel, double abs) {
  return std::abs(a - b) <= std::max(rel * std::max(std::abs(a), std::abs(b)), abs);
}

}  // namespace

FitState fit_parameters(const FitDataset& dataset, const FitState& init,
                        const PhysicalParams& params, const FitConfig& cfg) {
  dataset.validate();
  if (cfg.max_fit_iters < 1) throw ConfigError("max_fit_iters must be >= 1");

  std::vector<std::string> tags = cfg.fit_tags;
  if (tags.empty()) {
    std::set<std::string> present;
    for (const auto& e : dataset.entries)
      for (const auto& a : e.molecule.atoms) present.insert(a.type);
    tags.assign(present.begin(), present.end());
  }
  const std::size_t n_params = (cfg.fit_gamma ? 1 : 0) + (cfg.fit_pressure ? 1 : 0) + tags.size();
  if (n_params == 0) throw FitError("no parameters selected for fitting");

  FitState state = init;
  for (const auto& t : tags)
    if (!state.eps.count(t)) state.eps[t] = params.lj.at(t).eps;

  CouplingConfig ccfg = cfg.coupling;
  ccfg.nonpolar = ccfg.nonpolar || dataset.nonpolar;

  int rises = 0;
  double last_rms = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_fit_iters; ++it) {
    PhysicalParams p = params;
    state.apply(p);
    p.validate();

    std::vector<DesignRow> rows;
    std::vector<double> targets, totals;
    state.excluded.clear();
    for (const auto& entry : dataset.entries) {
      try {
        Solution s = self_consistent_solve(entry.molecule, p, ccfg, cfg.evolution);
        state.pb_solves += s.pb_solves;
        if (!s.converged) {
          state.excluded.push_back(entry.name);
          state.warnings.push_back("iteration " + std::to_string(it) + ": " + entry.name +
                                   " did not converge; excluded");
          continue;
        }
        rows.push_back(energy_design_row(s, entry.molecule, p, cfg.evolution.grad_floor));
        targets.push_back(entry.dG);
        totals.push_back(s.report.total);
      } catch (const Error& e) {
        state.excluded.push_back(entry.name);
        state.warnings.push_back("iteration " + std::to_string(it) + ": " + entry.name + ": " + e.what());
      }
    }
    if (rows.size() < n_params)
      throw FitError("only " + std::to_string(rows.size()) + " usable entries for " +
                     std::to_string(n_params) + " fitted parameters");

    double ss = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) ss += (totals[i] - targets[i]) * (totals[i] - targets[i]);
    const double rms = std::sqrt(ss / static_cast<double>(rows.size()));
    state.history.push_back({it, rms, state.gamma, state.pressure, state.eps});
    if (rms > last_rms + cfg.rms_noise) {
      if (++rises >= cfg.max_rms_increases) {
        std::ostringstream msg;
        msg << "fit RMS increased " << rises << " times in a row; history:";
        for (const auto& h : state.history) msg << ' ' << h.rms;
        throw FitError(msg.str());
      }
    } else {
      rises = 0;
    }
    last_rms = rms;

    const auto m = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd A(m, static_cast<Eigen::Index>(n_params));
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const DesignRow& r = rows[static_cast<std::size_t>(i)];
      double fixed = r.offset;
      Eigen::Index c = 0;
      if (cfg.fit_gamma) A(i, c++) = r.a_tv; else fixed += r.a_tv * state.gamma;
      if (cfg.fit_pressure) A(i, c++) = r.a_vol; else fixed += r.a_vol * state.pressure;
      for (const auto& t : tags) {
        const auto f = r.a_eps.find(t);
        A(i, c++) = f == r.a_eps.end() ? 0.0 : f->second;
      }
      for (const auto& [t, a] : r.a_eps)
        if (std::find(tags.begin(), tags.end(), t) == tags.end()) fixed += a * state.eps.at(t);
      b[i] = targets[static_cast<std::size_t>(i)] - fixed;
    }
    const NNLSResult sol = nnls(A, b);

    FitState next = state;
    Eigen::Index c = 0;
    if (cfg.fit_gamma) next.gamma = sol.x[c++];
    if (cfg.fit_pressure) next.pressure = sol.x[c++];
    for (const auto& t : tags) next.eps[t] = sol.x[c++];

    bool done = close(next.gamma, state.gamma, cfg.param_tol, cfg.param_abs_tol) &&
                close(next.pressure, state.pressure, cfg.param_tol, cfg.param_abs_tol);
    for (const auto& t : tags) done = done && close(next.eps[t], state.eps[t], cfg.param_tol, cfg.param_abs_tol);

    const Eigen::VectorXd pred = A * sol.x - b;
    next.predicted.clear();
    for (Eigen::Index i = 0; i < m; ++i) next.predicted.push_back(pred[i] + targets[static_cast<std::size_t>(i)]);
    next.rms = std::sqrt(pred.squaredNorm() / static_cast<double>(m));
    next.iterations = it;
    state = std::move(next);
    if (done) {
      state.converged = true;
      break;
    }
  }
  return state;
}

}  // namespace vism
