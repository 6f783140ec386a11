#include "crackmc/constitutive.hpp"

#include <cmath>

namespace crackmc {

namespace {

Eigen::Matrix3d deviator(const Eigen::Matrix3d& a) {
  return a - a.trace() / 3.0 * Eigen::Matrix3d::Identity();
}

constexpr double kSqrt32 = 1.2247448713915890491;  // sqrt(3/2)

}  // namespace

void MaterialParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError(std::string("material: ") + name + " must be > 0");
  };
  auto nonnegative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ConfigError(std::string("material: ") + name + " must be >= 0");
  };
  positive(K, "K");
  positive(mu, "mu");
  positive(sigma_Y, "sigma_Y");
  positive(l_f, "l_f");
  positive(psi_c, "psi_c");
  positive(zeta, "zeta");
  nonnegative(H, "H");
  nonnegative(l_p, "l_p");
  nonnegative(eta_f, "eta_f");
  nonnegative(eta_p, "eta_p");
}

double MaterialParams::g_f() const {
  return 2.0 * l_f * cf_constant(model) * psi_c;
}

MaterialParams MaterialParams::from_youngs(double E, double nu) {
  if (!(E > 0.0)) throw ConfigError("material: E must be > 0");
  if (!(nu > -1.0) || !(nu < 0.5))
    throw ConfigError("material: nu must lie in (-1, 0.5)");
  MaterialParams p;
  p.K = E / (3.0 * (1.0 - 2.0 * nu));
  p.mu = E / (2.0 * (1.0 + nu));
  return p;
}

std::pair<double, double> strain_invariants(const Eigen::Matrix3d& eps) {
  return {eps.trace(), (eps * eps).trace()};
}

EnergySplit elastic_split(const Eigen::Matrix3d& eps_e,
                          const MaterialParams& p) {
  const auto [i1, i2] = strain_invariants(eps_e);
  const double psi_vol = 0.5 * p.K * i1 * i1;
  const double psi_dev = p.mu * (i2 - i1 * i1 / 3.0);
  EnergySplit split;
  if (i1 > 0.0) {
    split.plus = psi_vol + psi_dev;
    split.minus = 0.0;
  } else {
    split.plus = psi_dev;
    split.minus = psi_vol;
  }
  return split;
}

double degradation(double d) { return (1.0 - d) * (1.0 - d); }

double degradation_derivative(double d) { return -2.0 * (1.0 - d); }

double cf_constant(AtModel model) {
  // 4 * int_0^1 sqrt(local term) db
  return model == AtModel::at1 ? 8.0 / 3.0 : 2.0;
}

double crack_local(AtModel model, double d) {
  return model == AtModel::at1 ? d : d * d;
}

double crack_local_derivative(AtModel model, double d) {
  return model == AtModel::at1 ? 1.0 : 2.0 * d;
}

double crack_density(double d, const Eigen::Vector3d& grad_d,
                     const MaterialParams& p) {
  const double local = crack_local(p.model, d) / p.l_f;
  const double gradient = p.l_f * grad_d.squaredNorm();
  return (local + gradient) / cf_constant(p.model);
}

double fracture_energy_density(double d, const Eigen::Vector3d& grad_d,
                               const MaterialParams& p) {
  return p.g_f() * crack_density(d, grad_d, p);
}

double plastic_energy(double alpha, const Eigen::Vector3d& grad_alpha,
                      const MaterialParams& p) {
  return 0.5 * p.H * alpha * alpha +
         0.5 * p.sigma_Y * p.l_p * p.l_p * grad_alpha.squaredNorm();
}

double yield_function(const Eigen::Matrix3d& stress, double hardening_force,
                      double d, const MaterialParams& p) {
  const double q = kSqrt32 * deviator(stress).norm();
  return q - hardening_force - degradation(d) * p.sigma_Y;
}

ReturnMapResult return_map(const Eigen::Matrix3d& eps,
                           const MaterialPointState& state_n, double d,
                           double f_nl, const MaterialParams& p, double tau) {
  if (!(d >= 0.0 && d <= 1.0))
    throw ArgumentError("return_map: d outside [0, 1]");
  if (p.eta_p > 0.0 && !(tau > 0.0))
    throw ArgumentError("return_map: viscous update needs tau > 0");

  const double g = degradation(d);
  const double mu_d = g * p.mu;
  const double i1 = eps.trace();
  const double w_vol = i1 > 0.0 ? g : 1.0;

  const Eigen::Matrix3d eps_e_tr = eps - state_n.eps_p_n;
  const Eigen::Matrix3d s_tr = 2.0 * mu_d * deviator(eps_e_tr);
  const double s_tr_norm = s_tr.norm();
  const double q_tr = kSqrt32 * s_tr_norm;
  const double resistance = g * (p.sigma_Y + p.H * state_n.alpha_n) + f_nl;

  ReturnMapResult out;
  out.eps_p = state_n.eps_p_n;
  out.alpha = state_n.alpha_n;
  out.tangent.c_vol = w_vol * p.K;

  const double beta_tr = q_tr - resistance;
  if (beta_tr > 0.0 && q_tr > 0.0) {
    const double visc = tau > 0.0 ? p.eta_p / tau : 0.0;
    const double denom = 3.0 * mu_d + g * p.H + visc;
    const double dgamma = beta_tr / denom;
    const Eigen::Matrix3d n = s_tr / s_tr_norm;

    out.yielded = true;
    out.delta_gamma = dgamma;
    out.flow_dir = n;
    out.eps_p = state_n.eps_p_n + dgamma * kSqrt32 * n;
    out.alpha = state_n.alpha_n + dgamma;
    const Eigen::Matrix3d s = s_tr - 2.0 * mu_d * dgamma * kSqrt32 * n;
    out.q = q_tr - 3.0 * mu_d * dgamma;
    out.stress = w_vol * p.K * i1 * Eigen::Matrix3d::Identity() + s;

    out.tangent.c_dev = 2.0 * mu_d * (1.0 - 3.0 * mu_d * dgamma / q_tr);
    out.tangent.c_nn = 6.0 * mu_d * mu_d * (dgamma / q_tr - 1.0 / denom);
    out.tangent.n = n;
  } else {
    out.q = q_tr;
    out.stress = w_vol * p.K * i1 * Eigen::Matrix3d::Identity() + s_tr;
    if (s_tr_norm > 0.0) out.flow_dir = s_tr / s_tr_norm;
    out.tangent.c_dev = 2.0 * mu_d;
  }
  return out;
}

double update_history(double psi_plus, double psi_p, double history,
                      const MaterialParams& p) {
  const double x = (psi_plus + psi_p) / p.psi_c - 1.0;
  const double ramp = 0.5 * (x + std::abs(x));
  return std::max(history, p.zeta * ramp);
}

double local_incremental_energy(const Eigen::Matrix3d& eps,
                                const MaterialPointState& state_n, double d,
                                double f_nl, const MaterialParams& p,
                                double tau) {
  const ReturnMapResult rm = return_map(eps, state_n, d, f_nl, p, tau);
  const EnergySplit split = elastic_split(eps - rm.eps_p, p);
  const double g = degradation(d);
  const double dgamma = rm.delta_gamma;
  const double alpha_n = state_n.alpha_n;
  double pi = g * split.plus + split.minus;
  pi += g * (p.sigma_Y * dgamma +
             0.5 * p.H * (rm.alpha * rm.alpha - alpha_n * alpha_n));
  pi += f_nl * dgamma;
  if (p.eta_p > 0.0) pi += 0.5 * p.eta_p / tau * dgamma * dgamma;
  return pi;
}

}  // namespace crackmc
