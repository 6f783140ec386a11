#include "crackmc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SparseLU>

#include "crackmc/errors.hpp"

namespace crackmc {

namespace {

Eigen::VectorXd sparse_solve(Eigen::SparseMatrix<double>& matrix,
                             const Eigen::VectorXd& rhs, const char* what) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  matrix.makeCompressed();
  lu.compute(matrix);
  if (lu.info() != Eigen::Success)
    throw NumericalError(std::string(what) + ": factorization failed");
  Eigen::VectorXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success)
    throw NumericalError(std::string(what) + ": back substitution failed");
  return x;
}

double relative_change(const Eigen::VectorXd& now,
                       const Eigen::VectorXd& before) {
  return (now - before).norm() / std::max(now.norm(), 1e-8);
}

// Newton iteration on the displacement block at fixed damage and hardening.
int newton_u(DiscreteProblem& problem, Fields& fields, double ubar,
             double tau, const SolverConfig& config) {
  const auto constraints = dirichlet_values(problem, ubar);
  // Reference for the relative test: the largest full residual norm seen
  // during this solve.  The constrained rows carry the reactions, so this
  // tracks the force scale of the step even when the free rows start and
  // land at equilibrium within one iteration.
  double ref_norm = 0.0;
  for (int it = 0; it < config.max_newton; ++it) {
    AssembledSystem sys = assemble_u(problem, fields, tau);
    ref_norm = std::max(ref_norm, sys.residual.norm());

    std::vector<std::pair<int, double>> increments;
    increments.reserve(constraints.size());
    double mismatch = 0.0;
    for (const auto& [dof, value] : constraints) {
      const double delta = value - fields.u[dof];
      mismatch = std::max(mismatch, std::abs(delta));
      increments.emplace_back(dof, delta);
    }

    Eigen::VectorXd rhs = -sys.residual;
    apply_dirichlet(sys.tangent, rhs, increments);

    double free_norm = 0.0;
    {
      std::vector<char> constrained(problem.n_u_dofs(), 0);
      for (const auto& [dof, value] : constraints) constrained[dof] = 1;
      for (Eigen::Index i = 0; i < rhs.size(); ++i)
        if (!constrained[i]) free_norm += rhs[i] * rhs[i];
      free_norm = std::sqrt(free_norm);
    }
    ref_norm = std::max(ref_norm, free_norm);
    if (free_norm <= config.newton_tol * std::max(ref_norm, 1.0) &&
        mismatch <= 1e-12 * std::max(1.0, std::abs(ubar)))
      return it;

    const Eigen::VectorXd du = sparse_solve(sys.tangent, rhs, "u-solve");
    fields.u += du;
  }
  throw NumericalError("displacement Newton did not converge in " +
                       std::to_string(config.max_newton) + " iterations");
}

// Refresh the per-point trial data the hardening solve consumes: trial
// equivalent stress (undone plastic increment) and flow direction.
void sweep_trial_state(DiscreteProblem& problem, const Fields& fields) {
  const Mesh& mesh = problem.mesh;
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const MaterialParams& mat = problem.element_params[e];
    const auto quad = element_quadrature(mesh, e);
    for (std::size_t q = 0; q < quad.size(); ++q) {
      MaterialPointState& state = problem.states[e * quad.size() + q];
      const Eigen::Matrix3d eps = strain_at(mesh, e, quad[q], fields.u);
      const double d_qp = interp_scalar(mesh, e, quad[q], fields.d);
      const double mu_d = degradation(d_qp) * mat.mu;
      const Eigen::Matrix3d dev =
          eps - state.eps_p_n -
          (eps.trace() - state.eps_p_n.trace()) / 3.0 *
              Eigen::Matrix3d::Identity();
      const Eigen::Matrix3d s_tr = 2.0 * mu_d * dev;
      const double norm = s_tr.norm();
      state.q_point = std::sqrt(1.5) * norm;
      state.flow_dir =
          norm > 0.0 ? Eigen::Matrix3d(s_tr / norm) : Eigen::Matrix3d::Zero();
    }
  }
}

// Hardening-field solve with the lower bound alpha >= alpha_n enforced by a
// primal active set; then slave the point plastic state to the field and
// store the recovered nonlocal force for the next displacement pass.
void solve_alpha_block(DiscreteProblem& problem, Fields& fields,
                       const Eigen::VectorXd& alpha_n, double tau) {
  const auto n = static_cast<Eigen::Index>(problem.mesh.n_nodes());

  std::vector<char> active(n, 0);  // pinned to alpha_n
  for (int pass = 0; pass < 50; ++pass) {
    AssembledSystem sys = assemble_alpha(problem, fields, alpha_n, tau);

    // Dofs with no stiffness at all (fully broken neighborhoods) stay put.
    Eigen::VectorXd diag = sys.tangent.diagonal();
    const double diag_floor = 1e-14 * std::max(diag.maxCoeff(), 1.0);
    std::vector<std::pair<int, double>> pins;
    for (Eigen::Index i = 0; i < n; ++i)
      if (active[i] || diag[i] <= diag_floor)
        pins.emplace_back(i, alpha_n[i] - fields.alpha[i]);

    Eigen::VectorXd rhs = -sys.residual;
    apply_dirichlet(sys.tangent, rhs, pins);
    const Eigen::VectorXd da = sparse_solve(sys.tangent, rhs, "alpha-solve");
    fields.alpha += da;

    // Activate violated constraints; release pinned dofs whose reaction
    // pulls upward (negative residual means the field wants to grow).
    AssembledSystem check = assemble_alpha(problem, fields, alpha_n, tau,
                                           /*with_tangent=*/false);
    const double release_tol =
        1e-12 * std::max(1.0, check.residual.cwiseAbs().maxCoeff());
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!active[i] && fields.alpha[i] < alpha_n[i] - 1e-14) {
        active[i] = 1;
        changed = true;
      } else if (active[i] && check.residual[i] < -release_tol) {
        active[i] = 0;
        changed = true;
      }
    }
    if (!changed) break;
  }
  // Exact bound regardless of active-set tolerance slack.
  for (Eigen::Index i = 0; i < n; ++i)
    fields.alpha[i] = std::max(fields.alpha[i], alpha_n[i]);

  const Mesh& mesh = problem.mesh;
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const MaterialParams& mat = problem.element_params[e];
    const auto quad = element_quadrature(mesh, e);
    for (std::size_t q = 0; q < quad.size(); ++q) {
      MaterialPointState& state = problem.states[e * quad.size() + q];
      const QuadPoint& qp = quad[q];
      const double a_qp = interp_scalar(mesh, e, qp, fields.alpha);
      const double dgamma = std::max(0.0, a_qp - state.alpha_n);
      state.alpha = state.alpha_n + dgamma;
      state.eps_p = state.eps_p_n + dgamma * std::sqrt(1.5) * state.flow_dir;

      // Force that makes the local return map reproduce dgamma at this
      // strain: f_nl = beta_trial - A * dgamma.  Points the field solve
      // left elastic keep f_nl = max(beta_trial, 0): a negative value would
      // park the local yield threshold exactly at the current state, and
      // for large sigma_Y its cancellation noise alone triggers phantom
      // flow in the next displacement pass.
      const double d_qp = interp_scalar(mesh, e, qp, fields.d);
      const double g = degradation(d_qp);
      const double mu_d = g * mat.mu;
      const double visc = mat.eta_p > 0.0 ? mat.eta_p / tau : 0.0;
      const double denom = 3.0 * mu_d + g * mat.H + visc;
      const double beta_tr =
          state.q_point - g * (mat.sigma_Y + mat.H * state.alpha_n);
      state.f_nl =
          dgamma > 0.0 ? beta_tr - denom * dgamma : std::max(beta_tr, 0.0);
    }
  }
}

void update_history_field(DiscreteProblem& problem, const Fields& fields) {
  const Mesh& mesh = problem.mesh;
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const MaterialParams& mat = problem.element_params[e];
    const auto quad = element_quadrature(mesh, e);
    for (std::size_t q = 0; q < quad.size(); ++q) {
      MaterialPointState& state = problem.states[e * quad.size() + q];
      const QuadPoint& qp = quad[q];
      const Eigen::Matrix3d eps = strain_at(mesh, e, qp, fields.u);
      const double psi_plus = elastic_split(eps - state.eps_p, mat).plus;
      double psi_p = 0.0;
      if (problem.plasticity_enabled) {
        const double a_qp = interp_scalar(mesh, e, qp, fields.alpha);
        const Eigen::Vector3d ga = grad_scalar(mesh, e, qp, fields.alpha);
        psi_p = plastic_energy(a_qp, ga, mat);
      }
      state.psi_plus = psi_plus;
      // Grows from the committed value of the previous step, so transient
      // overshoots of earlier passes do not lock in.
      state.history =
          update_history(psi_plus, psi_p, state.history_n, mat);
    }
  }
}

void solve_d_block(DiscreteProblem& problem, Fields& fields,
                   const Eigen::VectorXd& d_n, double tau) {
  // With the linear crack term, no driving history, and no viscosity the
  // damage operator loses its mass part entirely; nothing drives d.
  bool has_mass = false;
  for (std::size_t e = 0; e < problem.mesh.n_elements(); ++e) {
    const MaterialParams& mat = problem.element_params[e];
    if (mat.model == AtModel::at2 || mat.eta_f > 0.0) {
      has_mass = true;
      break;
    }
    const auto nq = static_cast<std::size_t>(problem.n_qp());
    for (std::size_t q = 0; q < nq; ++q)
      if (problem.states[e * nq + q].history > 0.0) {
        has_mass = true;
        break;
      }
    if (has_mass) break;
  }

  if (has_mass) {
    AssembledSystem sys = assemble_d(problem, fields, d_n, tau);
    const Eigen::VectorXd dd =
        sparse_solve(sys.tangent, Eigen::VectorXd(-sys.residual), "d-solve");
    fields.d += dd;
  }
  for (Eigen::Index i = 0; i < fields.d.size(); ++i)
    fields.d[i] = std::min(1.0, std::max({fields.d[i], d_n[i], 0.0}));
}

}  // namespace

void SolverConfig::validate() const {
  if (!(staggered_tol > 0.0) || !(newton_tol > 0.0))
    throw ConfigError("solver: tolerances must be > 0");
  if (max_staggered < 1 || max_newton < 1)
    throw ConfigError("solver: iteration budgets must be >= 1");
  if (early_stop.enabled &&
      (!(early_stop.fraction > 0.0) || early_stop.fraction >= 1.0 ||
       early_stop.patience < 1))
    throw ConfigError("solver: early stop needs fraction in (0,1) and "
                      "patience >= 1");
}

BoundaryTag driven_face(const DiscreteProblem& problem) {
  for (const auto& bc : problem.dirichlet_u)
    if (bc.driven) return bc.where;
  throw ConfigError("problem: no driven Dirichlet constraint");
}

StepDiagnostics solve_step(DiscreteProblem& problem, Fields& fields,
                           const SolverConfig& config, std::size_t step) {
  config.validate();
  const double tau = problem.schedule.step_size(step);
  const double ubar = problem.schedule.factors.at(step);
  const Eigen::VectorXd d_n = fields.d;
  const Eigen::VectorXd alpha_n = fields.alpha;

  StepDiagnostics diag;
  auto parts_now = [&]() {
    return incremental_potential_parts(problem, fields, d_n, alpha_n, tau);
  };
  // Each block solve must not increase its own potential (its cross-coupled
  // context is frozen while it runs).  The first displacement solve of a
  // step moves the driven constraints, which legitimately adds energy, so
  // that one is recorded but not judged.
  auto track_descent = [&](double before, double after, bool judge) {
    diag.potential_trace.push_back(after);
    if (judge && after > before + 1e-10 * (1.0 + std::abs(before)))
      diag.descent_violated = true;
  };

  bool converged = false;
  for (int pass = 0; pass < config.max_staggered; ++pass) {
    const Eigen::VectorXd u_before = fields.u;
    const Eigen::VectorXd d_before = fields.d;
    const Eigen::VectorXd a_before = fields.alpha;

    double mark = config.record_potential ? parts_now().u_part : 0.0;
    diag.newton_iterations += newton_u(problem, fields, ubar, tau, config);
    if (config.record_potential)
      track_descent(mark, parts_now().u_part, pass > 0);

    if (problem.plasticity_enabled) {
      sweep_trial_state(problem, fields);
      mark = config.record_potential ? parts_now().alpha_part : 0.0;
      solve_alpha_block(problem, fields, alpha_n, tau);
      if (config.record_potential)
        track_descent(mark, parts_now().alpha_part, true);
    }

    update_history_field(problem, fields);

    mark = config.record_potential ? parts_now().d_part : 0.0;
    solve_d_block(problem, fields, d_n, tau);
    if (config.record_potential)
      track_descent(mark, parts_now().d_part, true);

    diag.staggered_iterations = pass + 1;
    const double change = std::max({relative_change(fields.u, u_before),
                                    relative_change(fields.d, d_before),
                                    relative_change(fields.alpha, a_before)});
    if (change <= config.staggered_tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw NumericalError("staggered loop did not converge at step " +
                         std::to_string(step) + " within " +
                         std::to_string(config.max_staggered) + " passes");

  // Commit converged point states for the next increment.
  const Mesh& mesh = problem.mesh;
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const MaterialParams& mat = problem.element_params[e];
    const auto quad = element_quadrature(mesh, e);
    for (std::size_t q = 0; q < quad.size(); ++q) {
      MaterialPointState& state = problem.states[e * quad.size() + q];
      const QuadPoint& qp = quad[q];
      const double d_qp = interp_scalar(mesh, e, qp, fields.d);
      diag.plastic_work += qp.weight * degradation(d_qp) * mat.sigma_Y *
                           (state.alpha - state.alpha_n);
      state.commit(d_qp);

      const Eigen::Matrix3d eps = strain_at(mesh, e, qp, fields.u);
      const EnergySplit split = elastic_split(eps - state.eps_p, mat);
      diag.stored_elastic +=
          qp.weight * (degradation(d_qp) * split.plus + split.minus);
      const Eigen::Vector3d gd = grad_scalar(mesh, e, qp, fields.d);
      diag.fracture_energy +=
          qp.weight * fracture_energy_density(d_qp, gd, mat);
    }
  }
  diag.reaction = reaction_force(problem, fields, driven_face(problem), tau);
  return diag;
}

SimulationResult run_simulation(DiscreteProblem& problem, Fields& fields,
                                const SolverConfig& config) {
  problem.validate();
  config.validate();

  SimulationResult result;
  double peak = 0.0;
  int quiet_steps = 0;
  for (std::size_t step = 0; step < problem.schedule.times.size(); ++step) {
    StepDiagnostics diag;
    try {
      diag = solve_step(problem, fields, config, step);
    } catch (const NumericalError& err) {
      throw NumericalError(std::string(err.what()) + " (load step " +
                           std::to_string(step) + ")");
    }
    result.reaction.times.push_back(problem.schedule.times[step]);
    result.reaction.values.push_back(diag.reaction);
    result.staggered_per_step.push_back(diag.staggered_iterations);
    result.plastic_work += diag.plastic_work;
    result.fracture_energy = diag.fracture_energy;
    result.steps_completed = static_cast<int>(step) + 1;

    if (config.early_stop.enabled) {
      peak = std::max(peak, std::abs(diag.reaction));
      if (peak > 0.0 &&
          std::abs(diag.reaction) < config.early_stop.fraction * peak)
        ++quiet_steps;
      else
        quiet_steps = 0;
      if (quiet_steps >= config.early_stop.patience) {
        result.stopped_early = true;
        break;
      }
    }
  }
  return result;
}

}  // namespace crackmc
