#pragma once

#include <Eigen/Dense>

#include "crackmc/errors.hpp"

namespace crackmc {

enum class AtModel { at1, at2 };

/// Point-level material record.  (K, mu) are the primitive elastic pair;
/// from_youngs() converts an (E, nu) description.
struct MaterialParams {
  double K = 1.0;        // bulk modulus
  double mu = 1.0;       // shear modulus
  double sigma_Y = 1.0;  // initial yield stress
  double H = 0.0;        // isotropic hardening modulus
  double l_p = 0.0;      // plastic length scale
  double l_f = 0.1;      // fracture length scale
  double psi_c = 1.0;    // critical energy density
  double eta_f = 0.0;    // fracture viscosity
  double eta_p = 0.0;    // plastic viscosity
  double zeta = 1.0;     // history driving-force scale
  AtModel model = AtModel::at2;

  void validate() const;  // throws ConfigError

  double youngs() const { return 9.0 * K * mu / (3.0 * K + mu); }
  double poisson() const { return (3.0 * K - 2.0 * mu) / (6.0 * K + 2.0 * mu); }
  /// Fracture toughness implied by psi_c and l_f.
  double g_f() const;

  static MaterialParams from_youngs(double E, double nu);
};

/// Evolving state at one material point.  The *_n copies are the converged
/// values of the previous step; commit() rolls the current values into them.
/// history is nondecreasing from step to step.
struct MaterialPointState {
  Eigen::Matrix3d eps_p = Eigen::Matrix3d::Zero();
  double alpha = 0.0;
  double history = 0.0;

  Eigen::Matrix3d eps_p_n = Eigen::Matrix3d::Zero();
  double alpha_n = 0.0;
  double d_n = 0.0;
  double history_n = 0.0;

  // Working buffers refreshed by the solver each staggered pass.
  Eigen::Matrix3d flow_dir = Eigen::Matrix3d::Zero();  // trial deviator dir
  double q_point = 0.0;   // equivalent stress of the returned stress
  double f_nl = 0.0;      // hardening force recovered from the alpha field
  double psi_plus = 0.0;  // cached tensile energy of the last stress eval

  void commit(double d_now) {
    eps_p_n = eps_p;
    alpha_n = alpha;
    history_n = history;
    d_n = d_now;
  }
};

/// (I1, I2) = (tr eps, tr eps^2) of a symmetric strain.
std::pair<double, double> strain_invariants(const Eigen::Matrix3d& eps);

struct EnergySplit {
  double plus = 0.0;   // degradable part
  double minus = 0.0;  // protected part
};

/// Volumetric-deviatoric split with the volumetric part degradable only in
/// tension (strict tr eps > 0).  plus + minus equals the full elastic energy
/// and both parts are nonnegative.
EnergySplit elastic_split(const Eigen::Matrix3d& eps_e,
                          const MaterialParams& p);

/// Quadratic stiffness degradation (1-d)^2.
double degradation(double d);
double degradation_derivative(double d);

/// Normalization constant c_f of the crack surface density (8/3 for the
/// linear model, 2 for the quadratic one).
double cf_constant(AtModel model);

/// Local term of the crack density: d for at1, d^2 for at2.
double crack_local(AtModel model, double d);
double crack_local_derivative(AtModel model, double d);

/// Regularized crack surface density per unit volume.
double crack_density(double d, const Eigen::Vector3d& grad_d,
                     const MaterialParams& p);

/// Fracture energy density g_f * crack_density.
double fracture_energy_density(double d, const Eigen::Vector3d& grad_d,
                               const MaterialParams& p);

/// Stored plastic energy H alpha^2 / 2 + sigma_Y l_p^2 |grad alpha|^2 / 2.
double plastic_energy(double alpha, const Eigen::Vector3d& grad_alpha,
                      const MaterialParams& p);

/// Von Mises yield value sqrt(3/2)|dev sigma| - h - (1-d)^2 sigma_Y.
double yield_function(const Eigen::Matrix3d& stress, double hardening_force,
                      double d, const MaterialParams& p);

/// Rank-structured algorithmic tangent: apply(de) = c_vol tr(de) I
/// + c_dev dev(de) + c_nn (n : de) n with a unit-norm deviatoric n.
struct AlgorithmicTangent {
  double c_vol = 0.0;
  double c_dev = 0.0;
  double c_nn = 0.0;
  Eigen::Matrix3d n = Eigen::Matrix3d::Zero();

  Eigen::Matrix3d apply(const Eigen::Matrix3d& de) const {
    const double tr = de.trace();
    Eigen::Matrix3d out = c_vol * tr * Eigen::Matrix3d::Identity() +
                          c_dev * (de - tr / 3.0 * Eigen::Matrix3d::Identity());
    if (c_nn != 0.0) out += c_nn * (n.cwiseProduct(de)).sum() * n;
    return out;
  }
};

struct ReturnMapResult {
  Eigen::Matrix3d stress = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d eps_p = Eigen::Matrix3d::Zero();
  double delta_gamma = 0.0;
  double alpha = 0.0;      // updated internal hardening variable
  double q = 0.0;          // equivalent stress of the returned stress
  bool yielded = false;
  Eigen::Matrix3d flow_dir = Eigen::Matrix3d::Zero();
  AlgorithmicTangent tangent;
};

/// Radial return for degraded von Mises plasticity with linear isotropic
/// hardening and optional viscous regularization.  `f_nl` is an extra
/// hardening force (from a nonlocal alpha solve); tau is the step size for
/// the viscous term (must be > 0 when eta_p > 0).  At d = 1 the deviatoric
/// trial vanishes and the elastic branch is taken.
ReturnMapResult return_map(const Eigen::Matrix3d& eps,
                           const MaterialPointState& state_n, double d,
                           double f_nl, const MaterialParams& p, double tau);

/// History update max(history, zeta * ramp((psi_plus + psi_p) / psi_c - 1)).
double update_history(double psi_plus, double psi_p, double history,
                      const MaterialParams& p);

/// Condensed incremental energy density at total strain eps: elastic energy
/// of the return-mapped state plus the incremental plastic work.  Its strain
/// gradient is the return-mapped stress, which the FE residual tests exploit.
double local_incremental_energy(const Eigen::Matrix3d& eps,
                                const MaterialPointState& state_n, double d,
                                double f_nl, const MaterialParams& p,
                                double tau);

}  // namespace crackmc
