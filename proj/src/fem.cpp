#include "crackmc/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>
#include <string>

#include "crackmc/errors.hpp"

namespace crackmc {

namespace {

constexpr double kGauss = 0.57735026918962576451;  // 1/sqrt(3)

Eigen::Matrix3d embed_plane_strain(const Eigen::Matrix2d& e2) {
  Eigen::Matrix3d e = Eigen::Matrix3d::Zero();
  e.topLeftCorner<2, 2>() = e2;
  return e;
}

// Elastic stress and tangent at frozen plastic strain (the plasticity-off
// path of the displacement block).
void elastic_point(const Eigen::Matrix3d& eps_e, double d,
                   const MaterialParams& p, Eigen::Matrix3d& stress,
                   AlgorithmicTangent& tangent) {
  const double g = degradation(d);
  const double i1 = eps_e.trace();
  const double w_vol = i1 > 0.0 ? g : 1.0;
  const Eigen::Matrix3d dev =
      eps_e - i1 / 3.0 * Eigen::Matrix3d::Identity();
  stress = w_vol * p.K * i1 * Eigen::Matrix3d::Identity() +
           2.0 * g * p.mu * dev;
  tangent.c_vol = w_vol * p.K;
  tangent.c_dev = 2.0 * g * p.mu;
  tangent.c_nn = 0.0;
}

void check_viscous_tau(const DiscreteProblem& problem, double tau) {
  if (tau > 0.0) return;
  for (const auto& mat : problem.element_params)
    if (mat.eta_f > 0.0 || mat.eta_p > 0.0)
      throw ArgumentError("assembly: viscous regularization needs tau > 0");
}

}  // namespace

void LoadSchedule::validate() const {
  if (times.empty() || times.size() != factors.size())
    throw ConfigError("schedule: need matching, nonempty times and factors");
  double prev = 0.0;
  for (std::size_t n = 0; n < times.size(); ++n) {
    if (!std::isfinite(times[n]) || !std::isfinite(factors[n]))
      throw ConfigError("schedule: non-finite entry");
    if (!(times[n] > prev))
      throw ConfigError("schedule: times must be positive and strictly "
                        "increasing");
    prev = times[n];
  }
}

double LoadSchedule::step_size(std::size_t n) const {
  if (n >= times.size()) throw ArgumentError("schedule: step out of range");
  return n == 0 ? times[0] : times[n] - times[n - 1];
}

LoadSchedule ramp_schedule(int n_steps, double t_end, double factor_end) {
  if (n_steps < 1) throw ConfigError("schedule: need >= 1 steps");
  if (!(t_end > 0.0)) throw ConfigError("schedule: t_end must be > 0");
  LoadSchedule s;
  s.times.reserve(n_steps);
  s.factors.reserve(n_steps);
  for (int n = 1; n <= n_steps; ++n) {
    s.times.push_back(t_end * n / n_steps);
    s.factors.push_back(factor_end * n / n_steps);
  }
  return s;
}

Fields Fields::zero(const Mesh& mesh) {
  Fields f;
  f.u = Eigen::VectorXd::Zero(mesh.n_nodes() * mesh.dim);
  f.d = Eigen::VectorXd::Zero(mesh.n_nodes());
  f.alpha = Eigen::VectorXd::Zero(mesh.n_nodes());
  return f;
}

void DiscreteProblem::validate() const {
  if (element_params.size() != mesh.n_elements())
    throw ConfigError("problem: one material record per element required");
  if (states.size() != mesh.n_elements() * static_cast<std::size_t>(n_qp()))
    throw ConfigError("problem: one state per quadrature point required");
  for (const auto& mat : element_params) mat.validate();
  schedule.validate();
  for (const auto& bc : dirichlet_u) {
    if (bc.component < 0 || bc.component >= mesh.dim)
      throw ConfigError("problem: Dirichlet component out of range");
    (void)mesh.boundary_nodes(bc.where);  // throws for invalid tag/dim
  }
  for (const auto& bc : neumann) (void)mesh.boundary_nodes(bc.where);
  for (const auto& [dof, value] : pinned_u) {
    if (dof < 0 || static_cast<std::size_t>(dof) >= n_u_dofs())
      throw ConfigError("problem: pinned dof out of range");
    if (!std::isfinite(value))
      throw ConfigError("problem: pinned value must be finite");
  }
}

DiscreteProblem make_problem(Mesh mesh, const MaterialParams& params,
                             LoadSchedule schedule) {
  params.validate();
  schedule.validate();
  DiscreteProblem problem;
  problem.mesh = std::move(mesh);
  problem.element_params.assign(problem.mesh.n_elements(), params);
  problem.states.assign(problem.mesh.n_elements() * problem.n_qp(),
                        MaterialPointState{});
  problem.schedule = std::move(schedule);
  return problem;
}

std::vector<QuadPoint> element_quadrature(const Mesh& mesh, std::size_t e) {
  const auto& conn = mesh.elements.at(e);
  std::vector<QuadPoint> points;

  if (mesh.dim == 1) {
    const double x1 = mesh.nodes[conn[0]].x();
    const double x2 = mesh.nodes[conn[1]].x();
    const double dx = x2 - x1;
    points.resize(2);
    const double xis[2] = {-kGauss, kGauss};
    for (int q = 0; q < 2; ++q) {
      QuadPoint& qp = points[q];
      const double xi = xis[q];
      qp.shape.head<2>() << 0.5 * (1.0 - xi), 0.5 * (1.0 + xi);
      qp.grad(0, 0) = -1.0 / dx;
      qp.grad(1, 0) = 1.0 / dx;
      qp.weight = 0.5 * dx;
      qp.position = Eigen::Vector2d(x1 + 0.5 * (xi + 1.0) * dx, 0.0);
    }
    return points;
  }

  const Eigen::Vector2d p0 = mesh.nodes[conn[0]];
  const Eigen::Vector2d p2 = mesh.nodes[conn[2]];
  const double dx = p2.x() - p0.x();
  const double dy = p2.y() - p0.y();
  const double xi_a[4] = {-1.0, 1.0, 1.0, -1.0};
  const double eta_a[4] = {-1.0, -1.0, 1.0, 1.0};
  points.resize(4);
  int index = 0;
  for (int qj = 0; qj < 2; ++qj) {
    for (int qi = 0; qi < 2; ++qi, ++index) {
      QuadPoint& qp = points[index];
      const double xi = qi == 0 ? -kGauss : kGauss;
      const double eta = qj == 0 ? -kGauss : kGauss;
      for (int a = 0; a < 4; ++a) {
        qp.shape[a] = 0.25 * (1.0 + xi * xi_a[a]) * (1.0 + eta * eta_a[a]);
        // reference gradients mapped through the diagonal Jacobian
        qp.grad(a, 0) = 0.25 * xi_a[a] * (1.0 + eta * eta_a[a]) * 2.0 / dx;
        qp.grad(a, 1) = 0.25 * eta_a[a] * (1.0 + xi * xi_a[a]) * 2.0 / dy;
      }
      qp.weight = 0.25 * dx * dy;
      qp.position = Eigen::Vector2d(p0.x() + 0.5 * (xi + 1.0) * dx,
                                    p0.y() + 0.5 * (eta + 1.0) * dy);
    }
  }
  return points;
}

Eigen::Matrix3d strain_at(const Mesh& mesh, std::size_t e, const QuadPoint& qp,
                          const Eigen::VectorXd& u) {
  const auto& conn = mesh.elements[e];
  if (mesh.dim == 1) {
    double du = 0.0;
    for (int a = 0; a < 2; ++a) du += qp.grad(a, 0) * u[conn[a]];
    Eigen::Matrix3d eps = Eigen::Matrix3d::Zero();
    eps(0, 0) = du;
    return eps;
  }
  Eigen::Matrix2d grad_u = Eigen::Matrix2d::Zero();
  for (int a = 0; a < 4; ++a)
    for (int c = 0; c < 2; ++c)
      for (int k = 0; k < 2; ++k)
        grad_u(c, k) += qp.grad(a, k) * u[conn[a] * 2 + c];
  return embed_plane_strain(0.5 * (grad_u + grad_u.transpose()));
}

double interp_scalar(const Mesh& mesh, std::size_t e, const QuadPoint& qp,
                     const Eigen::VectorXd& field) {
  const auto& conn = mesh.elements[e];
  double v = 0.0;
  for (int a = 0; a < mesh.nodes_per_element(); ++a)
    v += qp.shape[a] * field[conn[a]];
  return v;
}

Eigen::Vector3d grad_scalar(const Mesh& mesh, std::size_t e,
                            const QuadPoint& qp,
                            const Eigen::VectorXd& field) {
  const auto& conn = mesh.elements[e];
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  for (int a = 0; a < mesh.nodes_per_element(); ++a)
    for (int k = 0; k < mesh.dim; ++k) g[k] += qp.grad(a, k) * field[conn[a]];
  return g;
}

namespace {

// External load vector (body force plus tractions); W_ext(u) = load . u.
Eigen::VectorXd external_load(const DiscreteProblem& problem) {
  const Mesh& mesh = problem.mesh;
  Eigen::VectorXd load = Eigen::VectorXd::Zero(problem.n_u_dofs());

  if (problem.body_force) {
    for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
      const auto& conn = mesh.elements[e];
      for (const QuadPoint& qp : element_quadrature(mesh, e)) {
        const Eigen::Vector2d f = problem.body_force(qp.position);
        for (int a = 0; a < mesh.nodes_per_element(); ++a)
          for (int c = 0; c < mesh.dim; ++c)
            load[conn[a] * mesh.dim + c] += qp.shape[a] * f[c] * qp.weight;
      }
    }
  }
  for (const auto& bc : problem.neumann) {
    if (mesh.dim == 1) {
      const int node = mesh.boundary_nodes(bc.where).front();
      load[node] += bc.traction[0];
    } else {
      for (const auto& edge : mesh.boundary_edges(bc.where)) {
        const double len =
            (mesh.nodes[edge[1]] - mesh.nodes[edge[0]]).norm();
        for (int end = 0; end < 2; ++end)
          for (int c = 0; c < 2; ++c)
            load[edge[end] * 2 + c] += 0.5 * len * bc.traction[c];
      }
    }
  }
  return load;
}

}  // namespace

AssembledSystem assemble_u(const DiscreteProblem& problem,
                           const Fields& fields, double tau,
                           bool with_tangent) {
  check_viscous_tau(problem, tau);
  const Mesh& mesh = problem.mesh;
  const int dim = mesh.dim;
  const int npe = mesh.nodes_per_element();
  const auto n_dofs = static_cast<Eigen::Index>(problem.n_u_dofs());

  AssembledSystem sys;
  sys.residual = -external_load(problem);
  std::vector<Eigen::Triplet<double>> trips;
  if (with_tangent) trips.reserve(mesh.n_elements() * npe * npe * dim * dim);

  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const auto& conn = mesh.elements[e];
    const MaterialParams& mat = problem.element_params[e];
    const auto quad = element_quadrature(mesh, e);
    for (std::size_t q = 0; q < quad.size(); ++q) {
      const QuadPoint& qp = quad[q];
      const MaterialPointState& state =
          problem.states[e * quad.size() + q];
      const Eigen::Matrix3d eps = strain_at(mesh, e, qp, fields.u);
      const double d_qp = interp_scalar(mesh, e, qp, fields.d);

      Eigen::Matrix3d stress;
      AlgorithmicTangent tangent;
      if (problem.plasticity_enabled) {
        const ReturnMapResult rm =
            return_map(eps, state, d_qp, state.f_nl, mat, tau);
        stress = rm.stress;
        tangent = rm.tangent;
      } else {
        elastic_point(eps - state.eps_p_n, d_qp, mat, stress, tangent);
      }

      if (dim == 1) {
        for (int a = 0; a < npe; ++a)
          sys.residual[conn[a]] += qp.grad(a, 0) * stress(0, 0) * qp.weight;
      } else {
        for (int a = 0; a < npe; ++a)
          for (int c = 0; c < 2; ++c) {
            double r = 0.0;
            for (int k = 0; k < 2; ++k) r += qp.grad(a, k) * stress(c, k);
            sys.residual[conn[a] * 2 + c] += r * qp.weight;
          }
      }

      if (!with_tangent) continue;
      if (dim == 1) {
        Eigen::Matrix3d exx = Eigen::Matrix3d::Zero();
        exx(0, 0) = 1.0;
        const double D = tangent.apply(exx)(0, 0);
        for (int a = 0; a < npe; ++a)
          for (int b = 0; b < npe; ++b)
            trips.emplace_back(conn[a], conn[b],
                               qp.grad(a, 0) * D * qp.grad(b, 0) * qp.weight);
      } else {
        // Voigt [xx, yy, xy] with engineering shear, columns by probing.
        Eigen::Matrix3d D;
        Eigen::Matrix3d basis[3];
        basis[0] = Eigen::Matrix3d::Zero();
        basis[0](0, 0) = 1.0;
        basis[1] = Eigen::Matrix3d::Zero();
        basis[1](1, 1) = 1.0;
        basis[2] = Eigen::Matrix3d::Zero();
        basis[2](0, 1) = basis[2](1, 0) = 0.5;
        for (int j = 0; j < 3; ++j) {
          const Eigen::Matrix3d s = tangent.apply(basis[j]);
          D(0, j) = s(0, 0);
          D(1, j) = s(1, 1);
          D(2, j) = s(0, 1);
        }
        for (int a = 0; a < npe; ++a) {
          Eigen::Matrix<double, 3, 2> Ba = Eigen::Matrix<double, 3, 2>::Zero();
          Ba(0, 0) = qp.grad(a, 0);
          Ba(1, 1) = qp.grad(a, 1);
          Ba(2, 0) = qp.grad(a, 1);
          Ba(2, 1) = qp.grad(a, 0);
          for (int b = 0; b < npe; ++b) {
            Eigen::Matrix<double, 3, 2> Bb =
                Eigen::Matrix<double, 3, 2>::Zero();
            Bb(0, 0) = qp.grad(b, 0);
            Bb(1, 1) = qp.grad(b, 1);
            Bb(2, 0) = qp.grad(b, 1);
            Bb(2, 1) = qp.grad(b, 0);
            const Eigen::Matrix2d Kab =
                Ba.transpose() * D * Bb * qp.weight;
            for (int ci = 0; ci < 2; ++ci)
              for (int cj = 0; cj < 2; ++cj)
                trips.emplace_back(conn[a] * 2 + ci, conn[b] * 2 + cj,
                                   Kab(ci, cj));
          }
        }
      }
    }
  }

  if (with_tangent) {
    sys.tangent.resize(n_dofs, n_dofs);
    sys.tangent.setFromTriplets(trips.begin(), trips.end());
  }
  return sys;
}

AssembledSystem assemble_d(const DiscreteProblem& problem,
                           const Fields& fields, const Eigen::VectorXd& d_n,
                           double tau, bool with_tangent) {
  check_viscous_tau(problem, tau);
  const Mesh& mesh = problem.mesh;
  const int npe = mesh.nodes_per_element();
  const auto n = static_cast<Eigen::Index>(mesh.n_nodes());

  AssembledSystem sys;
  sys.residual = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Triplet<double>> trips;
  if (with_tangent) trips.reserve(mesh.n_elements() * npe * npe);

  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const auto& conn = mesh.elements[e];
    const MaterialParams& mat = problem.element_params[e];
    const double lf2 = mat.l_f * mat.l_f;
    const auto quad = element_quadrature(mesh, e);
    for (std::size_t q = 0; q < quad.size(); ++q) {
      const QuadPoint& qp = quad[q];
      const double hist = problem.states[e * quad.size() + q].history;
      const double d_qp = interp_scalar(mesh, e, qp, fields.d);
      const double dn_qp = interp_scalar(mesh, e, qp, d_n);
      const Eigen::Vector3d gd = grad_scalar(mesh, e, qp, fields.d);
      const double visc = mat.eta_f > 0.0 ? mat.eta_f / tau : 0.0;

      const double source = -(1.0 - d_qp) * hist +
                            0.5 * crack_local_derivative(mat.model, d_qp) +
                            visc * (d_qp - dn_qp);
      const double mass = hist + (mat.model == AtModel::at2 ? 1.0 : 0.0) +
                          visc;
      for (int a = 0; a < npe; ++a) {
        double r = source * qp.shape[a];
        for (int k = 0; k < mesh.dim; ++k) r += lf2 * gd[k] * qp.grad(a, k);
        sys.residual[conn[a]] += r * qp.weight;
        if (!with_tangent) continue;
        for (int b = 0; b < npe; ++b) {
          double kab = mass * qp.shape[a] * qp.shape[b];
          for (int k = 0; k < mesh.dim; ++k)
            kab += lf2 * qp.grad(a, k) * qp.grad(b, k);
          trips.emplace_back(conn[a], conn[b], kab * qp.weight);
        }
      }
    }
  }

  if (with_tangent) {
    sys.tangent.resize(n, n);
    sys.tangent.setFromTriplets(trips.begin(), trips.end());
  }
  return sys;
}

AssembledSystem assemble_alpha(const DiscreteProblem& problem,
                               const Fields& fields,
                               const Eigen::VectorXd& alpha_n, double tau,
                               bool with_tangent) {
  check_viscous_tau(problem, tau);
  const Mesh& mesh = problem.mesh;
  const int npe = mesh.nodes_per_element();
  const auto n = static_cast<Eigen::Index>(mesh.n_nodes());

  AssembledSystem sys;
  sys.residual = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Triplet<double>> trips;
  if (with_tangent) trips.reserve(mesh.n_elements() * npe * npe);

  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const auto& conn = mesh.elements[e];
    const MaterialParams& mat = problem.element_params[e];
    const auto quad = element_quadrature(mesh, e);
    for (std::size_t q = 0; q < quad.size(); ++q) {
      const QuadPoint& qp = quad[q];
      const MaterialPointState& state = problem.states[e * quad.size() + q];
      const double d_qp = interp_scalar(mesh, e, qp, fields.d);
      const double g = degradation(d_qp);
      const double mu_d = g * mat.mu;
      const double a_qp = interp_scalar(mesh, e, qp, fields.alpha);
      const double an_qp = interp_scalar(mesh, e, qp, alpha_n);
      const Eigen::Vector3d ga = grad_scalar(mesh, e, qp, fields.alpha);
      const double visc = mat.eta_p > 0.0 ? mat.eta_p / tau : 0.0;
      const double grad_coef = g * mat.sigma_Y * mat.l_p * mat.l_p;

      const double source = -state.q_point +
                            (3.0 * mu_d + visc) * (a_qp - an_qp) +
                            g * (mat.sigma_Y + mat.H * a_qp);
      const double mass = 3.0 * mu_d + g * mat.H + visc;
      for (int a = 0; a < npe; ++a) {
        double r = source * qp.shape[a];
        for (int k = 0; k < mesh.dim; ++k)
          r += grad_coef * ga[k] * qp.grad(a, k);
        sys.residual[conn[a]] += r * qp.weight;
        if (!with_tangent) continue;
        for (int b = 0; b < npe; ++b) {
          double kab = mass * qp.shape[a] * qp.shape[b];
          for (int k = 0; k < mesh.dim; ++k)
            kab += grad_coef * qp.grad(a, k) * qp.grad(b, k);
          trips.emplace_back(conn[a], conn[b], kab * qp.weight);
        }
      }
    }
  }

  if (with_tangent) {
    sys.tangent.resize(n, n);
    sys.tangent.setFromTriplets(trips.begin(), trips.end());
  }
  return sys;
}

std::vector<std::pair<int, double>> dirichlet_values(
    const DiscreteProblem& problem, double ubar) {
  const Mesh& mesh = problem.mesh;
  std::vector<std::pair<int, double>> out;
  for (const auto& bc : problem.dirichlet_u) {
    const double value = bc.driven ? bc.scale * ubar : 0.0;
    for (int node : mesh.boundary_nodes(bc.where))
      out.emplace_back(node * mesh.dim + bc.component, value);
  }
  for (const auto& pin : problem.pinned_u) out.push_back(pin);
  return out;
}

void apply_dirichlet(Eigen::SparseMatrix<double>& matrix, Eigen::VectorXd& rhs,
                     const std::vector<std::pair<int, double>>& targets) {
  const auto n = matrix.rows();
  std::vector<char> constrained(n, 0);
  std::vector<double> value(n, 0.0);
  for (const auto& [dof, v] : targets) {
    if (dof < 0 || dof >= n)
      throw ArgumentError("apply_dirichlet: dof out of range");
    constrained[dof] = 1;
    value[dof] = v;
  }
  matrix.makeCompressed();

  for (int col = 0; col < matrix.outerSize(); ++col) {
    if (!constrained[col]) continue;
    for (Eigen::SparseMatrix<double>::InnerIterator it(matrix, col); it;
         ++it)
      if (!constrained[it.row()]) rhs[it.row()] -= it.value() * value[col];
  }

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(matrix.nonZeros() + n);
  for (int col = 0; col < matrix.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(matrix, col); it; ++it)
      if (!constrained[it.row()] && !constrained[col])
        trips.emplace_back(it.row(), col, it.value());
  for (int dof = 0; dof < n; ++dof)
    if (constrained[dof]) {
      trips.emplace_back(dof, dof, 1.0);
      rhs[dof] = value[dof];
    }
  matrix.setFromTriplets(trips.begin(), trips.end());
}

double reaction_force(const DiscreteProblem& problem, const Fields& fields,
                      BoundaryTag tag, double tau) {
  const AssembledSystem sys = assemble_u(problem, fields, tau, false);
  std::set<int> dofs;
  for (const auto& bc : problem.dirichlet_u) {
    if (bc.where != tag) continue;
    for (int node : problem.mesh.boundary_nodes(tag))
      dofs.insert(node * problem.mesh.dim + bc.component);
  }
  if (dofs.empty())
    throw ArgumentError("reaction_force: no Dirichlet set on that face");
  double reaction = 0.0;
  for (int dof : dofs) reaction += sys.residual[dof];
  return reaction;
}

PotentialParts incremental_potential_parts(const DiscreteProblem& problem,
                                           const Fields& fields,
                                           const Eigen::VectorXd& d_n,
                                           const Eigen::VectorXd& alpha_n,
                                           double tau) {
  check_viscous_tau(problem, tau);
  const Mesh& mesh = problem.mesh;
  PotentialParts parts;

  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const MaterialParams& mat = problem.element_params[e];
    const auto quad = element_quadrature(mesh, e);
    for (std::size_t q = 0; q < quad.size(); ++q) {
      const QuadPoint& qp = quad[q];
      const MaterialPointState& state = problem.states[e * quad.size() + q];
      const Eigen::Matrix3d eps = strain_at(mesh, e, qp, fields.u);
      const double d_qp = interp_scalar(mesh, e, qp, fields.d);
      const double g = degradation(d_qp);

      if (problem.plasticity_enabled) {
        parts.u_part += qp.weight * local_incremental_energy(
                                        eps, state, d_qp, state.f_nl, mat, tau);
      } else {
        const EnergySplit split = elastic_split(eps - state.eps_p_n, mat);
        parts.u_part += qp.weight * (g * split.plus + split.minus);
      }

      const double a_qp = interp_scalar(mesh, e, qp, fields.alpha);
      const double an_qp = interp_scalar(mesh, e, qp, alpha_n);
      const Eigen::Vector3d ga = grad_scalar(mesh, e, qp, fields.alpha);
      const double da = a_qp - an_qp;
      const double visc_p = mat.eta_p > 0.0 ? mat.eta_p / tau : 0.0;
      const double mu_d = g * mat.mu;
      parts.alpha_part +=
          qp.weight *
          (-state.q_point * da + 0.5 * (3.0 * mu_d + visc_p) * da * da +
           g * (mat.sigma_Y * da +
                0.5 * mat.H * (a_qp * a_qp - an_qp * an_qp)) +
           0.5 * g * mat.sigma_Y * mat.l_p * mat.l_p * ga.squaredNorm());

      const double dn_qp = interp_scalar(mesh, e, qp, d_n);
      const Eigen::Vector3d gd = grad_scalar(mesh, e, qp, fields.d);
      const double visc_f = mat.eta_f > 0.0 ? mat.eta_f / tau : 0.0;
      const double dd = d_qp - dn_qp;
      parts.d_part +=
          qp.weight * (0.5 * g * state.history +
                       0.5 * crack_local(mat.model, d_qp) +
                       0.5 * visc_f * dd * dd +
                       0.5 * mat.l_f * mat.l_f * gd.squaredNorm());
    }
  }

  parts.u_part -= external_load(problem).dot(fields.u);
  return parts;
}

double l2_error_u(
    const Mesh& mesh, const Eigen::VectorXd& u,
    const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& exact) {
  double acc = 0.0;
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const auto& conn = mesh.elements[e];
    for (const QuadPoint& qp : element_quadrature(mesh, e)) {
      Eigen::Vector2d uh = Eigen::Vector2d::Zero();
      for (int a = 0; a < mesh.nodes_per_element(); ++a)
        for (int c = 0; c < mesh.dim; ++c)
          uh[c] += qp.shape[a] * u[conn[a] * mesh.dim + c];
      const Eigen::Vector2d ue = exact(qp.position);
      double diff2 = 0.0;
      for (int c = 0; c < mesh.dim; ++c)
        diff2 += (uh[c] - ue[c]) * (uh[c] - ue[c]);
      acc += diff2 * qp.weight;
    }
  }
  return std::sqrt(acc);
}

void write_vtk(std::ostream& os, const Mesh& mesh, const Fields& fields) {
  char buf[96];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::string(buf);
  };

  os << "# vtk DataFile Version 3.0\n";
  os << "crackmc fields\n";
  os << "ASCII\n";
  os << "DATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << mesh.n_nodes() << " double\n";
  for (const auto& x : mesh.nodes)
    os << num(x.x()) << ' ' << num(x.y()) << " 0\n";

  const int npe = mesh.nodes_per_element();
  os << "CELLS " << mesh.n_elements() << ' '
     << mesh.n_elements() * (npe + 1) << "\n";
  for (const auto& conn : mesh.elements) {
    os << npe;
    for (int a = 0; a < npe; ++a) os << ' ' << conn[a];
    os << "\n";
  }
  os << "CELL_TYPES " << mesh.n_elements() << "\n";
  for (std::size_t e = 0; e < mesh.n_elements(); ++e)
    os << (mesh.dim == 1 ? 3 : 9) << "\n";

  os << "POINT_DATA " << mesh.n_nodes() << "\n";
  os << "VECTORS displacement double\n";
  for (std::size_t i = 0; i < mesh.n_nodes(); ++i) {
    const double ux = fields.u[i * mesh.dim];
    const double uy = mesh.dim == 2 ? fields.u[i * 2 + 1] : 0.0;
    os << num(ux) << ' ' << num(uy) << " 0\n";
  }
  os << "SCALARS damage double 1\n";
  os << "LOOKUP_TABLE default\n";
  for (std::size_t i = 0; i < mesh.n_nodes(); ++i)
    os << num(fields.d[i]) << "\n";
  os << "SCALARS hardening double 1\n";
  os << "LOOKUP_TABLE default\n";
  for (std::size_t i = 0; i < mesh.n_nodes(); ++i)
    os << num(fields.alpha[i]) << "\n";
}

}  // namespace crackmc
