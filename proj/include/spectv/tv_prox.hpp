#pragma once

#include <vector>

#include "spectv/grid_calculus.hpp"
#include "spectv/image.hpp"

namespace spectv {

struct SolverOptions {
  double tol = 1e-6;       // normalized primal-dual gap
  int max_iter = 2000;
  int check_every = 10;    // gap evaluation period
  bool adaptive = true;    // residual-balancing step adaptation
  /// Cold starts solve a 2x coarser problem first and prolongate its dual.
  bool multiscale = true;
  bool record_energy = false;
  double step_ratio = 1.0;  // initial primal/dual step ratio t/s, t*s = 1

  /// Looser profile used by the preview service.
  static SolverOptions preview() {
    SolverOptions o;
    o.tol = 1e-4;
    return o;
  }
};

struct SolverReport {
  int iterations = 0;
  double primal_dual_gap = 0.0;  // normalized
  bool converged = false;
  /// Primal energy at each gap check when record_energy is set.
  std::vector<double> energy_trace;
};

/// A subgradient of TV at some u, one plane per channel. The dual field is the
/// witness: p = -div(q) with |q| <= 1 pointwise.
struct Subgradient {
  Image p;
  std::vector<VectorField2> dual;

  bool empty() const { return p.empty(); }
  static Subgradient zero(const Image& like);
};

struct SubproblemResult {
  Image u;
  std::vector<VectorField2> dual;  // per channel, reusable as warm start
  SolverReport report;             // worst case over channels
};

/// Minimizes (tau/2)||u-f||^2 + TV(u) - <p_prev, u> per channel with the
/// diagonally preconditioned primal-dual hybrid gradient method.
///
/// The linear term folds into the data term (the problem is ROF with data
/// f + p_prev/tau). The returned u is the Lagrangian minimizer for the final
/// dual iterate, so p_prev + tau(f-u) is exactly -div(q) for a feasible q,
/// unless the constant mean of the data has lower energy, in which case that
/// constant is returned.
/// Throws on tau <= 0 or shape mismatch; non-convergence only clears
/// report.converged.
SubproblemResult solve_bregman_subproblem(const Image& f, const Subgradient& p_prev, double tau,
                                          const SolverOptions& opts = {},
                                          const std::vector<VectorField2>* warm_dual = nullptr);

/// p_new = p_prev + tau (f - u). The dual witness is carried over when given.
Subgradient extract_subgradient(const Image& f, const Image& u, const Subgradient& p_prev,
                                double tau, const std::vector<VectorField2>& dual = {});

/// <p, u - mean(u)> / TV(u); 1 for a subgradient at u. Returns 1 when both vanish.
double subgradient_alignment(const Image& p, const Image& u);

}  // namespace spectv
