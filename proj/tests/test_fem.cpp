#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "crackmc/errors.hpp"
#include "crackmc/fem.hpp"
#include "crackmc/mesh.hpp"
#include "crackmc/random_stream.hpp"
#include "crackmc/solver.hpp"

using namespace crackmc;

namespace {

Box unit_interval() {
  Box b;
  b.dim = 1;
  b.lo = {0.0, 0.0, 0.0};
  b.hi = {1.0, 0.0, 0.0};
  return b;
}

Box unit_square() {
  Box b;
  b.dim = 2;
  b.lo = {0.0, 0.0, 0.0};
  b.hi = {1.0, 1.0, 0.0};
  return b;
}

MaterialParams steel_like() {
  MaterialParams p = MaterialParams::from_youngs(200e3, 0.3);
  p.sigma_Y = 250.0;
  p.H = 2000.0;
  p.psi_c = 0.5;
  p.l_f = 0.1;
  return p;
}

DiscreteProblem bar_problem(int divisions, double u_end, int steps) {
  Mesh mesh = build_structured_mesh(1, unit_interval(), {divisions, 1});
  DiscreteProblem problem = make_problem(std::move(mesh), steel_like(),
                                         ramp_schedule(steps, 1.0, u_end));
  problem.dirichlet_u.push_back({BoundaryTag::left, 0, false, 0.0});
  problem.dirichlet_u.push_back({BoundaryTag::right, 0, true, 1.0});
  return problem;
}

}  // namespace

TEST_CASE("structured meshes") {
  SUBCASE("1d") {
    const Mesh mesh = build_structured_mesh(1, unit_interval(), {4, 7});
    CHECK(mesh.n_nodes() == 5);
    CHECK(mesh.n_elements() == 4);
    CHECK(mesh.h == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(mesh.nodes[2](0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(mesh.elements[3][0] == 3);
    CHECK(mesh.elements[3][1] == 4);
    CHECK(mesh.boundary_nodes(BoundaryTag::left) == std::vector<int>{0});
    CHECK(mesh.boundary_nodes(BoundaryTag::right) == std::vector<int>{4});
    CHECK_THROWS_AS(mesh.boundary_nodes(BoundaryTag::top), ArgumentError);
    CHECK_THROWS_AS(mesh.boundary_edges(BoundaryTag::left), ArgumentError);
  }
  SUBCASE("2d") {
    const Mesh mesh = build_structured_mesh(2, unit_square(), {3, 2});
    CHECK(mesh.n_nodes() == 12);
    CHECK(mesh.n_elements() == 6);
    // First element is counterclockwise: (0,0) (1,0) (1,1) (0,1) scaled.
    CHECK(mesh.elements[0] == std::array<int, 4>{0, 1, 5, 4});
    CHECK(mesh.boundary_nodes(BoundaryTag::bottom) ==
          std::vector<int>{0, 1, 2, 3});
    CHECK(mesh.boundary_nodes(BoundaryTag::right) ==
          std::vector<int>{3, 7, 11});
    CHECK(mesh.boundary_edges(BoundaryTag::top).size() == 3);
    const Eigen::Vector2d c = mesh.element_centroid(0);
    CHECK(c(0) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
    CHECK(c(1) == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("rejects bad arguments") {
    CHECK_THROWS_AS(build_structured_mesh(3, unit_square(), {2, 2}),
                    ConfigError);
    CHECK_THROWS_AS(build_structured_mesh(1, unit_interval(), {0, 1}),
                    ConfigError);
  }
}

TEST_CASE("quadrature integrates bilinears exactly") {
  const Mesh mesh = build_structured_mesh(2, unit_square(), {2, 3});
  double measure = 0.0;
  double integral = 0.0;  // integral of x*y over the unit square = 1/4
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    for (const QuadPoint& qp : element_quadrature(mesh, e)) {
      measure += qp.weight;
      integral += qp.weight * qp.position(0) * qp.position(1);
    }
  }
  CHECK(measure == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(integral == doctest::Approx(0.25).epsilon(1e-14));

  const Mesh line = build_structured_mesh(1, unit_interval(), {5, 1});
  double len = 0.0, mom = 0.0;
  for (std::size_t e = 0; e < line.n_elements(); ++e)
    for (const QuadPoint& qp : element_quadrature(line, e)) {
      len += qp.weight;
      mom += qp.weight * qp.position(0) * qp.position(0);
    }
  CHECK(len == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(mom == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("interpolation reproduces affine fields") {
  const Mesh mesh = build_structured_mesh(2, unit_square(), {3, 3});
  Eigen::VectorXd field(mesh.n_nodes());
  for (std::size_t n = 0; n < mesh.n_nodes(); ++n)
    field(n) = 2.0 + 3.0 * mesh.nodes[n](0) - 0.5 * mesh.nodes[n](1);
  for (std::size_t e = 0; e < mesh.n_elements(); ++e)
    for (const QuadPoint& qp : element_quadrature(mesh, e)) {
      CHECK(interp_scalar(mesh, e, qp, field) ==
            doctest::Approx(2.0 + 3.0 * qp.position(0) - 0.5 * qp.position(1))
                .epsilon(1e-13));
      const Eigen::Vector3d g = grad_scalar(mesh, e, qp, field);
      CHECK(g(0) == doctest::Approx(3.0).epsilon(1e-13));
      CHECK(g(1) == doctest::Approx(-0.5).epsilon(1e-13));
      CHECK(g(2) == 0.0);
    }
}

TEST_CASE("strain embedding") {
  SUBCASE("1d uniaxial strain") {
    const Mesh mesh = build_structured_mesh(1, unit_interval(), {4, 1});
    Eigen::VectorXd u(mesh.n_nodes());
    for (std::size_t n = 0; n < mesh.n_nodes(); ++n)
      u(n) = 0.02 * mesh.nodes[n](0);
    const auto qps = element_quadrature(mesh, 1);
    const Eigen::Matrix3d eps = strain_at(mesh, 1, qps[0], u);
    CHECK(eps(0, 0) == doctest::Approx(0.02).epsilon(1e-13));
    CHECK(std::abs(eps(1, 1)) < 1e-16);
    CHECK(std::abs(eps(2, 2)) < 1e-16);
    CHECK(std::abs(eps(0, 1)) < 1e-16);
  }
  SUBCASE("2d plane strain") {
    const Mesh mesh = build_structured_mesh(2, unit_square(), {2, 2});
    Eigen::VectorXd u(2 * mesh.n_nodes());
    for (std::size_t n = 0; n < mesh.n_nodes(); ++n) {
      const double x = mesh.nodes[n](0), y = mesh.nodes[n](1);
      u(2 * n) = 1e-3 * x + 2e-3 * y;
      u(2 * n + 1) = -4e-3 * x + 3e-3 * y;
    }
    const auto qps = element_quadrature(mesh, 3);
    const Eigen::Matrix3d eps = strain_at(mesh, 3, qps[2], u);
    CHECK(eps(0, 0) == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(eps(1, 1) == doctest::Approx(3e-3).epsilon(1e-12));
    CHECK(eps(0, 1) == doctest::Approx(0.5 * (2e-3 - 4e-3)).epsilon(1e-12));
    CHECK(eps(1, 0) == eps(0, 1));
    CHECK(eps(2, 2) == 0.0);  // plane strain
  }
}

TEST_CASE("load schedule") {
  const LoadSchedule s = ramp_schedule(4, 2.0, 0.1);
  REQUIRE(s.times.size() == 4);
  CHECK(s.times.front() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.times.back() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(s.factors.back() == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(s.step_size(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.step_size(2) == doctest::Approx(0.5).epsilon(1e-15));

  LoadSchedule bad = s;
  bad.times[1] = bad.times[0];
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s;
  bad.times[0] = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("elastic bar reaction matches the uniaxial modulus") {
  DiscreteProblem problem = bar_problem(8, 0.01, 1);
  problem.element_params.assign(problem.element_params.size(), [] {
    MaterialParams p = steel_like();
    p.psi_c = 1e12;      // keeps damage at zero
    p.sigma_Y = 1e12;    // keeps plasticity away
    return p;
  }());
  SolverConfig cfg;
  Fields fields = Fields::zero(problem.mesh);
  Eigen::VectorXd d_n = fields.d, alpha_n = fields.alpha;
  const StepDiagnostics diag = solve_step(problem, fields, cfg, 0);
  const MaterialParams& p = problem.element_params[0];
  const double modulus = p.K + 4.0 * p.mu / 3.0;
  CHECK(diag.reaction == doctest::Approx(modulus * 0.01).epsilon(1e-10));
  // Left reaction balances the driven face.
  const double left =
      reaction_force(problem, fields, BoundaryTag::left, 1.0);
  CHECK(left == doctest::Approx(-diag.reaction).epsilon(1e-8));
  CHECK_THROWS_AS(reaction_force(problem, fields, BoundaryTag::top, 1.0),
                  ArgumentError);
}

TEST_CASE("external loads") {
  SUBCASE("1d point traction") {
    Mesh mesh = build_structured_mesh(1, unit_interval(), {4, 1});
    DiscreteProblem problem = make_problem(std::move(mesh), steel_like(),
                                           ramp_schedule(1, 1.0, 0.0));
    problem.dirichlet_u.push_back({BoundaryTag::left, 0, false, 0.0});
    problem.neumann.push_back({BoundaryTag::right, {3.5, 0.0}});
    Fields fields = Fields::zero(problem.mesh);
    const AssembledSystem sys = assemble_u(problem, fields, 1.0, false);
    // Zero displacement: residual = -external load.
    CHECK(sys.residual(4) == doctest::Approx(-3.5).epsilon(1e-14));
    CHECK(sys.residual(2) == 0.0);
  }
  SUBCASE("2d edge traction spreads half-and-half") {
    Mesh mesh = build_structured_mesh(2, unit_square(), {2, 2});
    DiscreteProblem problem = make_problem(std::move(mesh), steel_like(),
                                           ramp_schedule(1, 1.0, 0.0));
    problem.neumann.push_back({BoundaryTag::right, {2.0, 0.0}});
    Fields fields = Fields::zero(problem.mesh);
    const AssembledSystem sys = assemble_u(problem, fields, 1.0, false);
    double pulled = 0.0;
    for (int n : problem.mesh.boundary_nodes(BoundaryTag::right))
      pulled -= sys.residual(2 * n);
    CHECK(pulled == doctest::Approx(2.0).epsilon(1e-14));  // t * edge length
    // Interior right-face node carries two half-edges.
    CHECK(sys.residual(2 * 5 + 0) == doctest::Approx(-1.0).epsilon(1e-14));
  }
  SUBCASE("body force enters the residual") {
    Mesh mesh = build_structured_mesh(1, unit_interval(), {2, 1});
    DiscreteProblem problem = make_problem(std::move(mesh), steel_like(),
                                           ramp_schedule(1, 1.0, 0.0));
    problem.body_force = [](const Eigen::Vector2d&) {
      return Eigen::Vector2d(4.0, 0.0);
    };
    Fields fields = Fields::zero(problem.mesh);
    const AssembledSystem sys = assemble_u(problem, fields, 1.0, false);
    // Total body load is 4 * |domain|, lumped consistently.
    CHECK(sys.residual.sum() == doctest::Approx(-4.0).epsilon(1e-13));
  }
}

TEST_CASE("dirichlet application solves to the imposed values") {
  DiscreteProblem problem = bar_problem(6, 0.01, 1);
  Fields fields = Fields::zero(problem.mesh);
  AssembledSystem sys = assemble_u(problem, fields, 1.0, true);
  Eigen::VectorXd rhs = -sys.residual;
  const auto targets = dirichlet_values(problem, 0.01);
  apply_dirichlet(sys.tangent, rhs, targets);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(sys.tangent);
  REQUIRE(lu.info() == Eigen::Success);
  const Eigen::VectorXd du = lu.solve(rhs);
  for (const auto& [dof, value] : targets)
    CHECK(du(dof) == doctest::Approx(value).epsilon(1e-13));
  // Linear problem: interior displacement is affine in x.
  fields.u += du;
  const double slope = 0.01;
  for (std::size_t n = 0; n < problem.mesh.n_nodes(); ++n)
    CHECK(fields.u(n) ==
          doctest::Approx(slope * problem.mesh.nodes[n](0)).epsilon(1e-10));
}

TEST_CASE("assembled residuals are gradients of the block potentials") {
  // Finite-difference check at a random interior state on a 3x3 quad mesh;
  // branch and history are held fixed by the assembly contract.
  Mesh mesh = build_structured_mesh(2, unit_square(), {3, 3});
  DiscreteProblem problem = make_problem(std::move(mesh), steel_like(),
                                         ramp_schedule(1, 1.0, 0.01));
  RandomStream rng(41, 0);
  const double tau = 0.5;

  Fields fields = Fields::zero(problem.mesh);
  for (int i = 0; i < fields.u.size(); ++i)
    fields.u(i) = 2e-3 * rng.symmetric_unit();
  for (int i = 0; i < fields.d.size(); ++i)
    fields.d(i) = 0.3 * rng.uniform01();
  for (int i = 0; i < fields.alpha.size(); ++i)
    fields.alpha(i) = 1e-3 * rng.uniform01();
  Eigen::VectorXd d_n = Eigen::VectorXd::Zero(fields.d.size());
  Eigen::VectorXd alpha_n = Eigen::VectorXd::Zero(fields.alpha.size());
  for (auto& s : problem.states) {
    s.history = s.history_n = 0.2 * rng.uniform01();
    s.q_point = 150.0 * rng.uniform01();
    s.f_nl = 5.0 * rng.symmetric_unit();
  }

  auto parts = [&](const Fields& f) {
    return incremental_potential_parts(problem, f, d_n, alpha_n, tau);
  };
  const double h = 1e-6;

  SUBCASE("u block") {
    const AssembledSystem sys = assemble_u(problem, fields, tau, false);
    for (int k : {0, 7, 12, 25}) {
      Fields fp = fields, fm = fields;
      fp.u(k) += h;
      fm.u(k) -= h;
      const double fd = (parts(fp).u_part - parts(fm).u_part) / (2.0 * h);
      CHECK(std::abs(sys.residual(k) - fd) <=
            1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
  SUBCASE("d block") {
    const AssembledSystem sys = assemble_d(problem, fields, d_n, tau, false);
    for (int k : {0, 5, 9, 15}) {
      Fields fp = fields, fm = fields;
      fp.d(k) += h;
      fm.d(k) -= h;
      const double fd = (parts(fp).d_part - parts(fm).d_part) / (2.0 * h);
      CHECK(std::abs(sys.residual(k) - fd) <=
            1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
  SUBCASE("alpha block") {
    const AssembledSystem sys =
        assemble_alpha(problem, fields, alpha_n, tau, false);
    for (int k : {0, 5, 9, 15}) {
      Fields fp = fields, fm = fields;
      fp.alpha(k) += h;
      fm.alpha(k) -= h;
      const double fd =
          (parts(fp).alpha_part - parts(fm).alpha_part) / (2.0 * h);
      CHECK(std::abs(sys.residual(k) - fd) <=
            1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
  SUBCASE("u tangent columns match residual differences") {
    const AssembledSystem sys = assemble_u(problem, fields, tau, true);
    for (int k : {3, 11, 20}) {
      Fields fp = fields, fm = fields;
      fp.u(k) += h;
      fm.u(k) -= h;
      const Eigen::VectorXd col =
          (assemble_u(problem, fp, tau, false).residual -
           assemble_u(problem, fm, tau, false).residual) /
          (2.0 * h);
      const Eigen::VectorXd an = sys.tangent.col(k);
      CHECK((an - col).norm() <= 1e-4 * std::max(1.0, col.norm()));
    }
  }
}

TEST_CASE("manufactured elastic solution converges at second order") {
  // u(x) = sin(pi x / 2), u(0) = 0, u(1) = 1 scaled down; body force
  // balances E_1d u''.
  const MaterialParams base = [] {
    MaterialParams p = steel_like();
    p.psi_c = 1e12;
    p.sigma_Y = 1e12;
    return p;
  }();
  const double modulus = base.K + 4.0 * base.mu / 3.0;
  const double amp = 1e-3;
  auto exact = [&](const Eigen::Vector2d& x) {
    return Eigen::Vector2d(amp * std::sin(M_PI * x(0) / 2.0), 0.0);
  };

  std::vector<double> hs, errors;
  for (int divisions : {8, 16, 32}) {
    Mesh mesh = build_structured_mesh(1, unit_interval(), {divisions, 1});
    DiscreteProblem problem =
        make_problem(std::move(mesh), base, ramp_schedule(1, 1.0, amp));
    problem.plasticity_enabled = false;
    problem.dirichlet_u.push_back({BoundaryTag::left, 0, false, 0.0});
    problem.dirichlet_u.push_back({BoundaryTag::right, 0, true, 1.0});
    problem.body_force = [&](const Eigen::Vector2d& x) {
      const double pi_half = M_PI / 2.0;
      return Eigen::Vector2d(
          modulus * amp * pi_half * pi_half * std::sin(pi_half * x(0)), 0.0);
    };
    SolverConfig cfg;
    Fields fields = Fields::zero(problem.mesh);
    solve_step(problem, fields, cfg, 0);
    hs.push_back(problem.mesh.h);
    errors.push_back(l2_error_u(problem.mesh, fields.u, exact));
  }
  for (std::size_t k = 1; k < errors.size(); ++k) {
    const double order =
        std::log(errors[k - 1] / errors[k]) / std::log(hs[k - 1] / hs[k]);
    CHECK(order > 1.8);
    CHECK(order < 2.2);
  }
}

TEST_CASE("vtk export") {
  Mesh mesh = build_structured_mesh(2, unit_square(), {2, 2});
  Fields fields = Fields::zero(mesh);
  fields.u(0) = 0.25;
  fields.d(3) = 0.5;
  std::ostringstream os;
  write_vtk(os, mesh, fields);
  const std::string text = os.str();
  CHECK(text.find("# vtk DataFile Version 3.0") == 0);
  CHECK(text.find("DATASET UNSTRUCTURED_GRID") != std::string::npos);
  CHECK(text.find("POINTS 9 double") != std::string::npos);
  CHECK(text.find("CELL_TYPES 4") != std::string::npos);
  CHECK(text.find("\n9\n") != std::string::npos);  // quad cell type
  CHECK(text.find("VECTORS displacement double") != std::string::npos);
  CHECK(text.find("SCALARS damage double") != std::string::npos);
  CHECK(text.find("SCALARS hardening double") != std::string::npos);

  const Mesh line = build_structured_mesh(1, unit_interval(), {3, 1});
  std::ostringstream os1;
  write_vtk(os1, line, Fields::zero(line));
  CHECK(os1.str().find("\n3\n") != std::string::npos);  // line cell type
}
