#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <sstream>

#include "vism/error.hpp"
#include "vism/validation.hpp"

using namespace vism;

namespace {

PhysicalParams default_params() {
  PhysicalParams p;
  p.lj = default_lj_params();
  return p;
}

Molecule neutral_atom() {
  Molecule m;
  m.atoms.push_back({{0.0, 0.0, 0.0}, 0.0, 1.9, "C"});
  return m;
}

CouplingConfig quick() {
  CouplingConfig c;
  c.grid.pad = 2.0;
  c.nonpolar = true;
  return c;
}

// Planar ramp in x: 1 at the left, 0 at the right, `cells` mixing layers.
InterfaceField planar_ramp(int cells) {
  const Grid g({0, 0, 0}, {cells + 4, 3, 3}, 1.0);
  std::vector<Region> labels(g.size());
  ScalarField u(g);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const int i = g.ijk(n)[0];
    if (i <= 1) {
      labels[n] = Region::Solute;
      u[n] = 1.0;
    } else if (i >= cells + 2) {
      labels[n] = Region::Solvent;
    } else {
      labels[n] = Region::Mixing;
      u[n] = 1.0 - (i - 1.5) / cells;
    }
  }
  return {u, std::make_shared<const DomainMasks>(DomainMasks::from_labels(g, labels))};
}

}  // namespace

TEST_CASE("analytic Born energy") {
  CHECK(born_energy_analytical(1.0, 2.0, 1.0, 80.0) == doctest::Approx(-81.98017625).epsilon(1e-10));
  CHECK(born_energy_analytical(1.0, 2.0, 4.0, 4.0) == 0.0);
  CHECK(born_energy_analytical(0.0, 2.0, 1.0, 80.0) == 0.0);
  CHECK(born_energy_analytical(2.0, 1.5, 2.0, 78.5) ==
        doctest::Approx(4.0 * born_energy_analytical(1.0, 1.5, 2.0, 78.5)));
  CHECK(born_energy_analytical(-1.0, 2.0, 1.0, 80.0) == born_energy_analytical(1.0, 2.0, 1.0, 80.0));
  CHECK_THROWS_AS(born_energy_analytical(1.0, 0.0, 1.0, 80.0), DomainError);
  CHECK_THROWS_AS(born_energy_analytical(1.0, 2.0, 0.0, 80.0), DomainError);
}

TEST_CASE("sharp ball indicator") {
  const Grid g({-3, -3, -3}, {13, 13, 13}, 0.5);
  const ScalarField u = sharp_ball_indicator(g, {0, 0, 0}, 2.0);
  CHECK(u.at(6, 6, 6) == 1.0);
  CHECK(u.at(10, 6, 6) == 1.0);  // 2.0
  CHECK(u.at(11, 6, 6) == 0.0);  // 2.5 > R + h/2
  CHECK(u.at(9, 9, 6) == 1.0);   // 2.12
  CHECK(u.at(10, 9, 6) == 0.0);  // 2.5
  const ScalarField coarse = sharp_ball_indicator(Grid({-4, -4, -4}, {9, 9, 9}, 1.0), {0, 0, 0}, 2.0);
  CHECK(coarse.at(6, 4, 4) == 1.0);  // 2.0
  CHECK(coarse.at(6, 5, 4) == 1.0);  // 2.24 < 2.5
  CHECK(coarse.at(7, 4, 4) == 0.0);
}

TEST_CASE("observed order") {
  const std::vector<double> h{1.0, 0.5, 0.25, 0.125};
  std::vector<double> e2, e1;
  for (double x : h) {
    e2.push_back(3.0 * x * x);
    e1.push_back(0.2 * x);
  }
  CHECK(richardson_order(h, e2) == doctest::Approx(2.0));
  CHECK(richardson_order(h, e1) == doctest::Approx(1.0));
  CHECK(richardson_order(h, {3.0, 0.0, 0.1875, -1.0}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(richardson_order(h, {1.0, 0.0, 0.0, 0.0}), DomainError);
  CHECK_THROWS_AS(richardson_order({1.0, 0.5}, {1.0}), InputError);
}

TEST_CASE("sharp-mode Born solve") {
  const PhysicalParams p;
  BornConfig cfg;
  const BornPoint pt = born_sharp_solve(cfg, p, 0.5);
  CHECK(pt.analytic == doctest::Approx(-81.98017625));
  CHECK(std::abs(pt.rel_error) < 0.02);
  CHECK(pt.rel_error == doctest::Approx((pt.energy - pt.analytic) / pt.analytic));
  CHECK(pt.iterations > 0);

  cfg.h_list = {1.0, 0.5};
  const BornStudy study = born_refinement(cfg, p);
  REQUIRE(study.points.size() == 2);
  CHECK(std::abs(study.points[1].rel_error) < std::abs(study.points[0].rel_error));
  std::ostringstream os;
  write_born_csv(os, study);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "h energy analytic rel_error");
  double h, e, a, r;
  in >> h >> e >> a >> r;
  CHECK(h == 1.0);
  CHECK(r == doctest::Approx(study.points[0].rel_error));
}

TEST_CASE("sweep argument checks") {
  const PhysicalParams p = default_params();
  const Molecule m = neutral_atom();
  const EvolutionConfig evo;
  CHECK_THROWS_AS(q_sweep(m, p, {}, quick(), evo), ConfigError);
  CHECK_THROWS_AS(q_sweep(m, p, {1.001, 1.01}, quick(), evo), ConfigError);
  CHECK_THROWS_AS(q_sweep(m, p, {1.5}, quick(), evo), ConfigError);
  CHECK_THROWS_AS(q_sweep(m, p, {1.0}, quick(), evo), ConfigError);
  CHECK_THROWS_AS(n_sweep(m, p, {5, 5}, quick(), evo), ConfigError);
  CHECK_THROWS_AS(n_sweep(m, p, {5, 10, 7}, quick(), evo), ConfigError);
  CHECK_THROWS_AS(n_sweep(m, p, {1, 5}, quick(), evo), ConfigError);
}

TEST_CASE("degenerate and short sweeps") {
  const PhysicalParams p = default_params();
  const Molecule m = neutral_atom();
  const EvolutionConfig evo;

  const SweepResult one = q_sweep(m, p, {1.001}, quick(), evo);
  REQUIRE(one.entries.size() == 1);
  CHECK(one.ok());
  CHECK(one.entries[0].diff == 0.0);
  CHECK(one.diffs_strictly_decreasing());

  const SweepResult single_n = n_sweep(m, p, {10}, quick(), evo);
  CHECK(single_n.relative_spread() == 0.0);

  const SweepResult ns = n_sweep(m, p, {5, 40}, quick(), evo);
  REQUIRE(ns.ok());
  CHECK(ns.relative_spread() < 0.005);
  CHECK(ns.entries[1].diff == doctest::Approx(std::abs(ns.entries[1].total - ns.entries[0].total)));

  std::ostringstream os;
  write_sweep_csv(os, ns);
  std::istringstream in(os.str());
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  CHECK(header == "axis_value total_energy diff");
  CHECK(first.substr(first.rfind(' ') + 1) == "nan");
  CHECK(second.rfind("40 ", 0) == 0);

  SUBCASE("failing entries are recorded, not thrown") {
    Molecule bad = m;
    bad.atoms[0].type = "Xe";
    const SweepResult r = q_sweep(bad, p, {1.01, 1.001}, quick(), evo);
    CHECK_FALSE(r.ok());
    CHECK(r.entries[0].error.find("Xe") != std::string::npos);
  }
}

TEST_CASE("sweep summaries") {
  SweepResult s;
  s.entries = {{1.01, -10.0, 0.0, true, ""}, {1.001, -10.5, 0.5, true, ""}, {1.0001, -10.55, 0.05, true, ""}};
  CHECK(s.ok());
  CHECK(s.diffs_strictly_decreasing());
  CHECK(s.relative_spread() == doctest::Approx(0.55 / (31.05 / 3.0)));
  s.entries.push_back({1.00001, -10.6, 0.05, true, ""});
  CHECK_FALSE(s.diffs_strictly_decreasing());
  s.entries.back().error = "solver failed";
  CHECK_FALSE(s.ok());
}

TEST_CASE("diffuse fraction") {
  SUBCASE("binary profile") {
    InterfaceField f = planar_ramp(10);
    for (std::size_t n : f.masks->mixing) f.u[n] = f.u[n] > 0.5 ? 1.0 : 0.0;
    CHECK(diffuseness_check(f, 0.05, 0.95) == 0.0);
  }
  SUBCASE("linear ramp") {
    const InterfaceField f = planar_ramp(100);
    CHECK(diffuseness_check(f, 0.2, 0.6) == doctest::Approx(0.4).epsilon(0.03));
    CHECK(diffuseness_check(f, 0.1, 0.7) >= diffuseness_check(f, 0.2, 0.6));
    CHECK_THROWS_AS(diffuseness_check(f, 0.6, 0.2), DomainError);
    CHECK_THROWS_AS(diffuseness_check(f, 0.0, 0.5), DomainError);
  }
  SUBCASE("empty band") {
    const Grid g({0, 0, 0}, {3, 3, 3}, 1.0);
    const InterfaceField f{ScalarField(g),
                           std::make_shared<const DomainMasks>(DomainMasks::from_labels(
                               g, std::vector<Region>(g.size(), Region::Solvent)))};
    CHECK_THROWS_AS(diffuseness_check(f, 0.1, 0.9), DomainError);
  }
}

TEST_CASE("drive factor tends to one") {
  const Grid g({0, 0, 0}, {3, 3, 3}, 1.0);
  ScalarField u(g);
  for (std::size_t n = 0; n < g.size(); ++n) u[n] = 0.05 + 0.9 * static_cast<double>(n) / 26.0;
  double prev = 1e300;
  for (int N : {5, 10, 20, 40, 1000}) {
    const double p = 2.0 * N / (2.0 * N - 1.0);
    const ScalarField f = drive_factor(u, p);
    double worst = 0.0;
    for (double v : f.values()) worst = std::max(worst, std::abs(v - 1.0));
    CHECK(worst < prev);
    prev = worst;
  }
  CHECK(prev < 5e-3);
}
