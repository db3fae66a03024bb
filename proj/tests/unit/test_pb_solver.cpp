#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "vism/error.hpp"
#include "vism/pb_solver.hpp"
#include "vism/validation.hpp"

using namespace vism;

namespace {

Molecule charge_at(Vec3 x, double q, double r = 1.5) {
  Molecule m;
  m.atoms.push_back({x, q, r, "C"});
  return m;
}

IonSpecies salt(double molar) {
  IonSpecies s;
  const double c = molar * units::molar_to_number_density;
  s.ions = {{c, 1.0}, {c, -1.0}};
  return s;
}

ScalarField random_u(const Grid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  ScalarField u(g);
  for (std::size_t n = 0; n < g.size(); ++n) u[n] = U(rng);
  return u;
}

Eigen::MatrixXd dense(const LinearSystem& sys) {
  const auto n = sys.grid.size();
  Eigen::MatrixXd A(n, n);
  std::vector<double> e(n, 0.0), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    sys.apply(e, col);
    for (std::size_t i = 0; i < n; ++i) A(i, j) = col[i];
    e[j] = 0.0;
  }
  return A;
}

}  // namespace

TEST_CASE("trilinear charge spreading") {
  const Grid g({0.0, 0.0, 0.0}, {7, 7, 7}, 1.0);
  SUBCASE("on a node") {
    const ChargeGrid c = spread_charges(charge_at({3.0, 2.0, 4.0}, -0.7), g);
    CHECK(c.values.at(3, 2, 4) == -0.7);
    double rest = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) rest += std::abs(c.values[n]);
    CHECK(rest == doctest::Approx(0.7));
  }
  SUBCASE("cell centre splits into eighths") {
    const ChargeGrid c = spread_charges(charge_at({2.5, 2.5, 2.5}, 0.8), g);
    for (int i = 2; i <= 3; ++i)
      for (int j = 2; j <= 3; ++j)
        for (int k = 2; k <= 3; ++k) CHECK(c.values.at(i, j, k) == doctest::Approx(0.1));
  }
  SUBCASE("total is conserved") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> X(1.0, 5.0), Q(-1.0, 1.0);
    Molecule m;
    double total = 0.0;
    for (int a = 0; a < 20; ++a) {
      m.atoms.push_back({{X(rng), X(rng), X(rng)}, Q(rng), 1.0, "C"});
      total += m.atoms.back().charge;
    }
    const ChargeGrid c = spread_charges(m, g);
    double s = 0.0;
    for (double v : c.values.values()) s += v;
    CHECK(s == doctest::Approx(total).epsilon(1e-13));
  }
  SUBCASE("outside the interior") {
    CHECK_THROWS_AS(spread_charges(charge_at({0.5, 3.0, 3.0}, 1.0), g), InputError);
    CHECK_THROWS_AS(spread_charges(charge_at({3.0, 3.0, 9.0}, 1.0), g), InputError);
  }
}

TEST_CASE("boundary potential") {
  PhysicalParams p;
  const Molecule m = charge_at({0.0, 0.0, 0.0}, 1.0);
  CHECK(boundary_potential(m, {10.0, 0.0, 0.0}, p) == doctest::Approx(0.4150895).epsilon(1e-9));
  CHECK(boundary_potential(charge_at({0, 0, 0}, 0.0), {3.0, 0.0, 0.0}, p) == 0.0);
  CHECK_THROWS_AS(boundary_potential(m, {0.0, 0.0, 0.0}, p), DomainError);

  Molecule two = m;
  two.atoms.push_back({{1.0, 2.0, 0.0}, -0.4, 1.5, "C"});
  const Vec3 x{4.0, -3.0, 2.0};
  CHECK(boundary_potential(two, x, p) ==
        doctest::Approx(boundary_potential(m, x, p) +
                        boundary_potential(charge_at({1.0, 2.0, 0.0}, -0.4), x, p)));

  SUBCASE("screened by salt") {
    p.ions = salt(0.1);
    const double kappa = std::sqrt(p.ions.beta * 2.0 * 0.1 * units::molar_to_number_density * 4.0 *
                                   std::numbers::pi * p.k_e / p.eps_s);
    CHECK(debye_kappa(p) == doctest::Approx(kappa));
    CHECK(1.0 / kappa == doctest::Approx(9.6).epsilon(0.02));  // Debye length at 0.1 M
    CHECK(boundary_potential(m, {10.0, 0.0, 0.0}, p) ==
          doctest::Approx(0.4150895 * std::exp(-10.0 * kappa)).epsilon(1e-9));
  }
}

TEST_CASE("assembled operator") {
  PhysicalParams p;
  const Grid g({-2.0, -2.0, -2.0}, {5, 5, 5}, 1.0);
  const Molecule m = charge_at({0.3, -0.2, 0.1}, 1.0);
  const ChargeGrid q = spread_charges(m, g);

  SUBCASE("uniform u gives a scaled Laplacian") {
    const ScalarField u(g, 0.0);
    const LinearSystem sys = assemble_ppb_system(u, q, ScalarField(g), p);
    const std::size_t c = g.index(2, 2, 2);
    CHECK(sys.diag[c] == doctest::Approx(6.0 * 80.0));
    for (int dir = 0; dir < 6; ++dir) CHECK(sys.neighbour_coefficient(c, dir) == doctest::Approx(-80.0));
  }
  SUBCASE("symmetric, off-diagonals non-positive, zero interior row sums") {
    const ScalarField u = random_u(g, 11);
    const LinearSystem sys = assemble_ppb_system(u, q, ScalarField(g), p);
    const Eigen::MatrixXd A = dense(sys);
    std::size_t interior = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (sys.dirichlet[i]) continue;
      ++interior;
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (i == j || sys.dirichlet[j]) continue;
        REQUIRE(A(i, j) == A(j, i));
        REQUIRE(A(i, j) <= 0.0);
      }
    }
    CHECK(interior == 27);
    // Centre node: all neighbours interior, so the full row telescopes.
    const std::size_t c = g.index(2, 2, 2);
    CHECK(A.row(static_cast<Eigen::Index>(c)).sum() == doctest::Approx(0.0).scale(1.0));
  }
  SUBCASE("face dielectric is monotone in u") {
    const ScalarField u = random_u(g, 5);
    ScalarField v = u;
    for (std::size_t n = 0; n < g.size(); ++n) v[n] = std::min(1.0, u[n] + 0.2);
    const FaceDielectric a = face_dielectric(u, p), b = face_dielectric(v, p);
    for (std::size_t n = 0; n < g.size(); ++n) {
      REQUIRE(b.x[n] <= a.x[n]);
      REQUIRE(b.y[n] <= a.y[n]);
      REQUIRE(b.z[n] <= a.z[n]);
    }
    CHECK(a.x[g.index(1, 2, 3)] == doctest::Approx(dielectric(0.5 * (u[g.index(1, 2, 3)] + u[g.index(2, 2, 3)]), p)));
  }
}

TEST_CASE("salt-free solve matches a dense solve") {
  PhysicalParams p;
  const Grid g({-2.0, -2.0, -2.0}, {5, 5, 5}, 1.0);
  const Molecule m = charge_at({0.3, -0.2, 0.1}, 1.0);
  const ScalarField u = random_u(g, 17);
  PBOptions opts;
  opts.tol = 1e-13;
  const PotentialField sol = solve_ppb(u, m, p, nullptr, opts);

  const ScalarField bnd = boundary_values(m, g, p);
  const LinearSystem sys = assemble_ppb_system(u, spread_charges(m, g), bnd, p);
  const Eigen::MatrixXd A = dense(sys);
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(sys.rhs.data(), sys.rhs.size());
  const Eigen::VectorXd x = A.partialPivLu().solve(b);
  for (std::size_t n = 0; n < g.size(); ++n) REQUIRE(sol.psi[n] == doctest::Approx(x[n]).epsilon(1e-10));
  for (std::size_t n = 0; n < g.size(); ++n)
    if (g.on_boundary(n)) REQUIRE(sol.psi[n] == bnd[n]);
  CHECK(ppb_residual(u, spread_charges(m, g), sol.psi, p) < 1e-10);
}

TEST_CASE("trivial and invariance cases") {
  PhysicalParams p;
  const Molecule m = charge_at({0.0, 0.0, 0.0}, 1.0, 2.0);
  const Grid g = build_grid(m, 0.5, 3.0);
  SUBCASE("no charge, no salt gives zero") {
    const PotentialField s = solve_ppb(ScalarField(g, 0.3), charge_at({0, 0, 0}, 0.0), p);
    for (double v : s.psi.values()) REQUIRE(v == 0.0);
  }
  SUBCASE("initial guess does not change the answer") {
    const ScalarField u = sharp_ball_indicator(g, {0, 0, 0}, 2.0);
    PBOptions opts;
    opts.tol = 1e-10;
    const PBProblem prob(m, g, p, opts);
    const PotentialField a = prob.solve(u);
    ScalarField guess = random_u(g, 1);
    const PotentialField b = prob.solve(u, &guess);
    double worst = 0.0, sup = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
      worst = std::max(worst, std::abs(a.psi[n] - b.psi[n]));
      sup = std::max(sup, std::abs(a.psi[n]));
    }
    CHECK(worst < 1e-7 * sup);
    CHECK(b.residual <= 1e-10);
  }
  SUBCASE("solution is linear in the charge") {
    const ScalarField u = sharp_ball_indicator(g, {0, 0, 0}, 2.0);
    PBOptions opts;
    opts.tol = 1e-12;
    const PotentialField a = solve_ppb(u, m, p, nullptr, opts);
    const PotentialField b = solve_ppb(u, charge_at({0, 0, 0}, 2.0, 2.0), p, nullptr, opts);
    for (std::size_t n = 0; n < g.size(); n += 11)
      REQUIRE(b.psi[n] == doctest::Approx(2.0 * a.psi[n]).epsilon(1e-8));
  }
}

TEST_CASE("salty Newton solve") {
  PhysicalParams p;
  p.ions = salt(0.15);
  Molecule m = charge_at({-0.6, 0.0, 0.0}, 1.0);
  m.atoms.push_back({{0.7, 0.1, 0.0}, 0.0, 1.5, "C"});
  const Grid g = build_grid(m, 0.5, 3.0);
  const ScalarField u = sharp_ball_indicator(g, {0, 0, 0}, 1.5);
  PBOptions opts;
  opts.tol = 1e-9;
  const PotentialField s = solve_ppb(u, m, p, nullptr, opts);
  CHECK(s.newton_iterations >= 1);
  CHECK(s.residual <= 1e-9);
  CHECK(ppb_residual(u, spread_charges(m, g), s.psi, p) <= 1e-9);
  for (std::size_t i = 1; i < s.residual_history.size(); ++i)
    CHECK(s.residual_history[i] <= s.residual_history[i - 1]);

  // Salt screens: the potential away from the charge is smaller than salt-free.
  PhysicalParams bare = p;
  bare.ions.ions.clear();
  const PotentialField f = solve_ppb(u, m, bare, nullptr, opts);
  const std::size_t probe = g.index(g.dims[0] / 2, g.dims[1] - 3, g.dims[2] / 2);
  CHECK(s.psi[probe] < f.psi[probe]);
  CHECK(s.psi[probe] > 0.0);
}

TEST_CASE("solver failures carry diagnostics") {
  PhysicalParams p;
  const Molecule m = charge_at({0.0, 0.0, 0.0}, 1.0, 2.0);
  const Grid g = build_grid(m, 0.5, 3.0);
  const ScalarField u = sharp_ball_indicator(g, {0, 0, 0}, 2.0);
  SUBCASE("Krylov budget") {
    PBOptions opts;
    opts.max_krylov = 3;
    try {
      solve_ppb(u, m, p, nullptr, opts);
      FAIL("expected SolverError");
    } catch (const SolverError& e) {
      CHECK(e.residual_history().size() == 4);  // initial residual plus one per iteration
    }
  }
  SUBCASE("sanity bound") {
    PBOptions opts;
    opts.psi_bound = 1.0;
    CHECK_THROWS_AS(solve_ppb(u, m, p, nullptr, opts), SolverError);
  }
  SUBCASE("mismatched guess grid") {
    const ScalarField other(Grid({0, 0, 0}, {5, 5, 5}, 1.0));
    CHECK_THROWS_AS(solve_ppb(u, m, p, &other), InputError);
  }
}
