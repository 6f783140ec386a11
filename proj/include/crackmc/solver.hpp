#pragma once

#include <vector>

#include "crackmc/estimators.hpp"
#include "crackmc/fem.hpp"

namespace crackmc {

struct EarlyStop {
  bool enabled = false;
  double fraction = 0.01;  // stop once |reaction| < fraction * running peak
  int patience = 3;        // for this many consecutive steps
};

struct SolverConfig {
  double staggered_tol = 1e-6;  // combined relative increment norm
  int max_staggered = 200;
  double newton_tol = 1e-10;
  int max_newton = 30;
  EarlyStop early_stop;
  bool record_potential = false;  // keep per-pass block potentials

  void validate() const;
};

struct StepDiagnostics {
  int staggered_iterations = 0;
  int newton_iterations = 0;
  double reaction = 0.0;
  double stored_elastic = 0.0;
  double plastic_work = 0.0;     // cumulative sigma_Y dissipation
  double fracture_energy = 0.0;  // current g_f * crack surface
  std::vector<double> potential_trace;  // one entry per block solve
  bool descent_violated = false;
};

/// One load increment of the alternating scheme: displacement Newton solve,
/// plastic sweep plus hardening-field solve, history update, damage solve
/// with the irreversibility clamp; repeated until the combined relative
/// change of (u, d, alpha) drops below tolerance.  Commits the point states
/// on success, throws NumericalError when the pass budget runs out.
StepDiagnostics solve_step(DiscreteProblem& problem, Fields& fields,
                           const SolverConfig& config, std::size_t step);

struct SimulationResult {
  QoICurve reaction;  // reaction at the driven face per completed step
  int steps_completed = 0;
  bool stopped_early = false;
  double plastic_work = 0.0;
  double fracture_energy = 0.0;
  std::vector<int> staggered_per_step;
};

/// Runs the full schedule from the given fields (normally Fields::zero).
SimulationResult run_simulation(DiscreteProblem& problem, Fields& fields,
                                const SolverConfig& config);

/// Face whose reaction is reported: the one carrying a driven constraint.
BoundaryTag driven_face(const DiscreteProblem& problem);

}  // namespace crackmc
