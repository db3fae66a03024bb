#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "vism/error.hpp"
#include "vism/fitting.hpp"

using namespace vism;

namespace {

// Minimum of 0.5 ||Ax - b||^2 over x >= 0 by trying every free set.
Eigen::VectorXd brute_force_nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const auto n = A.cols();
  Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
  double best_obj = 0.5 * b.squaredNorm();
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j)
      if (mask & (1 << j)) cols.push_back(j);
    Eigen::MatrixXd As(A.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) As.col(static_cast<Eigen::Index>(c)) = A.col(cols[c]);
    const Eigen::VectorXd xs = As.householderQr().solve(b);
    if ((xs.array() < 0.0).any()) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (std::size_t c = 0; c < cols.size(); ++c) x[cols[c]] = xs[static_cast<Eigen::Index>(c)];
    const double obj = 0.5 * (A * x - b).squaredNorm();
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

PhysicalParams default_params() {
  PhysicalParams p;
  p.lj = default_lj_params();
  return p;
}

Molecule atom(double r, double q = 0.0, std::string type = "C") {
  Molecule m;
  m.atoms.push_back({{0.0, 0.0, 0.0}, q, r, std::move(type)});
  return m;
}

FitConfig quick_config() {
  FitConfig c;
  c.coupling.grid.pad = 2.0;
  c.param_tol = 1e-4;
  return c;
}

double total_for(const Molecule& m, const PhysicalParams& p, const FitConfig& c, bool nonpolar) {
  CouplingConfig cc = c.coupling;
  cc.nonpolar = nonpolar;
  const Solution s = self_consistent_solve(m, p, cc, c.evolution);
  REQUIRE(s.converged);
  return s.report.total;
}

}  // namespace

TEST_CASE("nnls small cases") {
  SUBCASE("projection onto the orthant") {
    const NNLSResult r = nnls(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(1.0, -1.0));
    CHECK(r.x[0] == doctest::Approx(1.0));
    CHECK(r.x[1] == 0.0);
    CHECK(r.objective == doctest::Approx(0.5));
  }
  SUBCASE("feasible right-hand side") {
    const Eigen::Vector3d b(0.5, 2.0, 0.0);
    const NNLSResult r = nnls(Eigen::MatrixXd::Identity(3, 3), b);
    for (int i = 0; i < 3; ++i) CHECK(r.x[i] == doctest::Approx(b[i]));
  }
  SUBCASE("zero columns are pinned") {
    Eigen::MatrixXd A(3, 2);
    A << 1.0, 0.0, 2.0, 0.0, -1.0, 0.0;
    const NNLSResult r = nnls(A, Eigen::Vector3d(1.0, 2.0, -1.0));
    CHECK(r.x[0] == doctest::Approx(1.0));
    CHECK(r.x[1] == 0.0);
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS(nnls(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0)), InputError);
    CHECK_THROWS_AS(nnls(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector3d(1, 2, 3)), InputError);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2);
    A(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(nnls(A, Eigen::Vector2d(1, 1)), InputError);
  }
}

TEST_CASE("nnls agrees with exhaustive search and satisfies KKT") {
  std::mt19937 rng(2024);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::MatrixXd A(5, 3);
    Eigen::VectorXd b(5);
    for (int i = 0; i < 5; ++i) {
      b[i] = N(rng);
      for (int j = 0; j < 3; ++j) A(i, j) = N(rng);
    }
    const NNLSResult r = nnls(A, b);
    const Eigen::VectorXd ref = brute_force_nnls(A, b);
    for (int j = 0; j < 3; ++j) REQUIRE(r.x[j] == doctest::Approx(ref[j]).epsilon(1e-8).scale(1.0));
    const Eigen::VectorXd grad = A.transpose() * (A * r.x - b);
    for (int j = 0; j < 3; ++j) {
      REQUIRE(r.x[j] >= 0.0);
      REQUIRE(grad[j] >= -1e-10);
      REQUIRE(std::abs(r.x[j] * grad[j]) <= 1e-10);
    }
  }
}

TEST_CASE("design row on a polar solve") {
  const PhysicalParams p = default_params();
  Molecule m;
  m.atoms = {{{-1.0, 0.0, 0.0}, 0.3, 1.7, "C"}, {{1.0, 0.0, 0.0}, -0.3, 1.7, "C"}};
  CouplingConfig c;
  c.grid.pad = 3.0;
  const EvolutionConfig evo;
  const Solution s = self_consistent_solve(m, p, c, evo);
  REQUIRE(s.converged);
  const DesignRow row = energy_design_row(s, m, p);

  CHECK(row.predict(p.gamma, p.pressure, p.lj) == doctest::Approx(s.report.total).epsilon(1e-10));
  CHECK(row.a_tv * p.gamma == doctest::Approx(s.report.tv).epsilon(1e-12));
  CHECK(row.a_vol * p.pressure == doctest::Approx(s.report.pressure_volume).epsilon(1e-12));
  CHECK(row.a_eps.size() == 1);
  CHECK(row.a_eps.at("C") == doctest::Approx(s.report.attractive / p.lj.at("C").eps).epsilon(1e-12));
  CHECK(row.offset == s.report.polar);
  CHECK(row.predict(2.0 * p.gamma, p.pressure, p.lj) - row.predict(p.gamma, p.pressure, p.lj) ==
        doctest::Approx(row.a_tv * p.gamma).epsilon(1e-10));

  Solution bad = s;
  bad.converged = false;
  CHECK_THROWS_AS(energy_design_row(bad, m, p), FitError);
}

TEST_CASE("dataset validation") {
  FitDataset d;
  CHECK_THROWS_AS(d.validate(), FitError);
  d.entries.push_back({"x", atom(1.5), std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(d.validate(), FitError);
}

TEST_CASE("state round trip through parameters") {
  PhysicalParams p = default_params();
  FitState s = FitState::from_params(p);
  CHECK(s.gamma == p.gamma);
  CHECK(s.eps.at("C") == p.lj.at("C").eps);
  s.gamma = 0.1;
  s.eps["C"] = 0.2;
  s.apply(p);
  CHECK(p.gamma == 0.1);
  CHECK(p.lj.at("C").eps == 0.2);
}

TEST_CASE("single free parameter") {
  const PhysicalParams p = default_params();
  FitConfig c = quick_config();
  c.fit_gamma = false;
  c.fit_pressure = false;
  c.fit_tags = {"C"};
  FitDataset d;
  d.nonpolar = true;
  d.entries.push_back({"one", atom(1.9), 1.0});
  const FitState s = fit_parameters(d, FitState::from_params(p), p, c);
  CHECK(s.converged);
  CHECK(s.pb_solves == 0);
  REQUIRE(s.predicted.size() == 1);
  CHECK(s.predicted[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(s.gamma == p.gamma);
  CHECK(s.pressure == p.pressure);

  PhysicalParams fitted = p;
  s.apply(fitted);
  CHECK(total_for(atom(1.9), fitted, c, true) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("nonpolar round trip, row order and an unused tag") {
  PhysicalParams truth = default_params();
  truth.lj.table["H"].eps = 0.0;
  FitConfig c = quick_config();
  FitDataset d;
  d.nonpolar = true;
  std::vector<Molecule> mols{atom(1.4), atom(2.6), atom(1.9)};
  Molecule ch;
  ch.atoms = {{{0, 0, 0}, 0.0, 2.0, "C"}, {{1.4, 0, 0}, 0.0, 1.2, "H"}};
  mols.push_back(ch);
  for (std::size_t i = 0; i < mols.size(); ++i)
    d.entries.push_back({"m" + std::to_string(i), mols[i], total_for(mols[i], truth, c, true)});

  PhysicalParams start = truth;
  start.gamma *= 1.3;
  start.pressure *= 0.7;
  start.lj.table["C"].eps *= 1.2;
  start.lj.table["H"].eps = 0.2;
  const FitState s = fit_parameters(d, FitState::from_params(start), start, c);
  REQUIRE(s.converged);
  CHECK(s.pb_solves == 0);
  CHECK(s.gamma == doctest::Approx(truth.gamma).epsilon(0.01));
  CHECK(s.pressure == doctest::Approx(truth.pressure).epsilon(0.01));
  CHECK(s.eps.at("C") == doctest::Approx(truth.lj.at("C").eps).epsilon(0.01));
  CHECK(s.eps.at("H") < 1e-3);
  CHECK(s.rms < 1e-3);
  for (std::size_t i = 1; i < s.history.size(); ++i)
    CHECK(s.history[i].rms <= s.history[i - 1].rms + c.rms_noise);

  FitDataset reversed = d;
  std::reverse(reversed.entries.begin(), reversed.entries.end());
  const FitState r = fit_parameters(reversed, FitState::from_params(start), start, c);
  CHECK(r.gamma == doctest::Approx(s.gamma).epsilon(c.param_tol * 10));
  CHECK(r.pressure == doctest::Approx(s.pressure).epsilon(c.param_tol * 10));
  CHECK(r.eps.at("C") == doctest::Approx(s.eps.at("C")).epsilon(c.param_tol * 10));
}

TEST_CASE("failed entries are excluded") {
  const PhysicalParams p = default_params();
  FitConfig c = quick_config();
  c.fit_gamma = false;
  c.fit_pressure = false;
  c.fit_tags = {"C"};
  c.max_fit_iters = 1;
  FitDataset d;
  d.nonpolar = true;
  d.entries.push_back({"good", atom(1.9), 0.5});
  d.entries.push_back({"bad", atom(1.9, 0.0, "Xe"), 0.5});
  const FitState s = fit_parameters(d, FitState::from_params(p), p, c);
  REQUIRE(s.excluded.size() == 1);
  CHECK(s.excluded[0] == "bad");
  CHECK_FALSE(s.warnings.empty());

  FitConfig c2 = c;
  c2.fit_gamma = true;
  c2.fit_pressure = true;
  CHECK_THROWS_AS(fit_parameters(d, FitState::from_params(p), p, c2), FitError);
}
