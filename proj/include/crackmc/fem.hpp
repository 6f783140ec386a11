#pragma once

#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "crackmc/constitutive.hpp"
#include "crackmc/mesh.hpp"

namespace crackmc {

struct DirichletBc {
  BoundaryTag where = BoundaryTag::left;
  int component = 0;     // displacement component
  bool driven = false;   // driven: value = scale * load factor; fixed: 0
  double scale = 1.0;
};

struct NeumannBc {
  BoundaryTag where = BoundaryTag::right;
  Eigen::Vector2d traction = Eigen::Vector2d::Zero();
};

/// Load factor (imposed displacement) per step at strictly increasing
/// positive times; the step size of step n is times[n] - times[n-1].
struct LoadSchedule {
  std::vector<double> times;
  std::vector<double> factors;

  void validate() const;
  double step_size(std::size_t n) const;
};

LoadSchedule ramp_schedule(int n_steps, double t_end, double factor_end);

/// Nodal fields: u has dim components per node, d and alpha one each.
struct Fields {
  Eigen::VectorXd u, d, alpha;
  static Fields zero(const Mesh& mesh);
};

/// Mesh, per-element materials, per-quadrature-point state, and loading.
/// Quadrature point q of element e lives at index e * n_qp() + q.
struct DiscreteProblem {
  Mesh mesh;
  std::vector<MaterialParams> element_params;
  std::vector<MaterialPointState> states;
  std::vector<DirichletBc> dirichlet_u;
  std::vector<std::pair<int, double>> pinned_u;  // explicit (dof, value)
  std::vector<NeumannBc> neumann;
  std::function<Eigen::Vector2d(const Eigen::Vector2d&)> body_force;
  LoadSchedule schedule;
  bool plasticity_enabled = true;

  int n_qp() const { return mesh.dim == 1 ? 2 : 4; }
  std::size_t n_u_dofs() const { return mesh.n_nodes() * mesh.dim; }
  void validate() const;
};

/// Fresh problem with zeroed states, one material for every element.
DiscreteProblem make_problem(Mesh mesh, const MaterialParams& params,
                             LoadSchedule schedule);

struct AssembledSystem {
  Eigen::VectorXd residual;  // gradient of the block potential, unconstrained
  Eigen::SparseMatrix<double> tangent;
};

/// Displacement block: internal forces from the return-mapped stress at the
/// current fields minus external work.  States supply the committed plastic
/// history and the nonlocal hardening force.
AssembledSystem assemble_u(const DiscreteProblem& problem,
                           const Fields& fields, double tau,
                           bool with_tangent = true);

/// Damage block in normalized form: source (1-d) * history against the local
/// crack term and viscosity, gradient stiffness l_f^2.
AssembledSystem assemble_d(const DiscreteProblem& problem,
                           const Fields& fields, const Eigen::VectorXd& d_n,
                           double tau, bool with_tangent = true);

/// Hardening-variable block.  The equivalent stress is the trial value
/// stored by the last return-map sweep relaxed linearly by the plastic
/// increment, so with l_p = 0 the solution reproduces the local return map.
AssembledSystem assemble_alpha(const DiscreteProblem& problem,
                               const Fields& fields,
                               const Eigen::VectorXd& alpha_n, double tau,
                               bool with_tangent = true);

/// (dof, value) pairs for all displacement constraints at load factor ubar.
std::vector<std::pair<int, double>> dirichlet_values(
    const DiscreteProblem& problem, double ubar);

/// Row/column elimination with exact value substitution.  `targets` carries
/// (dof, increment) pairs; the returned system solves for the increment.
void apply_dirichlet(Eigen::SparseMatrix<double>& matrix, Eigen::VectorXd& rhs,
                     const std::vector<std::pair<int, double>>& targets);

/// Sum of the unconstrained u-residual over the constrained dofs of `tag`;
/// with internal-minus-external assembly this is the reaction, tension
/// positive for a face pulled outward.
double reaction_force(const DiscreteProblem& problem, const Fields& fields,
                      BoundaryTag tag, double tau);

struct PotentialParts {
  double u_part = 0.0;      // condensed elastic-plastic energy minus W_ext
  double alpha_part = 0.0;  // hardening block increment
  double d_part = 0.0;      // normalized fracture block
  double total() const { return u_part + alpha_part + d_part; }
};

/// Block potentials whose gradients are the three assembled residuals, each
/// evaluated with the cross-coupled quantities frozen at the given fields.
PotentialParts incremental_potential_parts(const DiscreteProblem& problem,
                                           const Fields& fields,
                                           const Eigen::VectorXd& d_n,
                                           const Eigen::VectorXd& alpha_n,
                                           double tau);

/// L2 norm of u_h - u_exact by element quadrature.
double l2_error_u(
    const Mesh& mesh, const Eigen::VectorXd& u,
    const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& exact);

/// Legacy-format VTK snapshot of displacement, damage, and hardening.
void write_vtk(std::ostream& os, const Mesh& mesh, const Fields& fields);

// Quadrature-point geometry shared by assembly, the solver sweeps, and
// tests: shape values, physical gradients, integration weight, location.
struct QuadPoint {
  Eigen::Vector4d shape = Eigen::Vector4d::Zero();
  Eigen::Matrix<double, 4, 2> grad = Eigen::Matrix<double, 4, 2>::Zero();
  double weight = 0.0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
};

/// Quadrature rule of element e (2 points for segments, 2x2 for quads).
std::vector<QuadPoint> element_quadrature(const Mesh& mesh, std::size_t e);

/// Strain at a quadrature point embedded as a symmetric 3x3 tensor:
/// uniaxial strain in 1D, plane strain in 2D.
Eigen::Matrix3d strain_at(const Mesh& mesh, std::size_t e, const QuadPoint& qp,
                          const Eigen::VectorXd& u);

/// Scalar nodal field and its gradient at a quadrature point.
double interp_scalar(const Mesh& mesh, std::size_t e, const QuadPoint& qp,
                     const Eigen::VectorXd& field);
Eigen::Vector3d grad_scalar(const Mesh& mesh, std::size_t e,
                            const QuadPoint& qp, const Eigen::VectorXd& field);

}  // namespace crackmc
