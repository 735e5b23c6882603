#pragma once

#include <span>

#include "spectv/image.hpp"

/// Per-pixel kernels behind grid-calculus and the PDHG solver.
///
/// Every kernel exists twice: the OpenMP version in spectv::kernels and a plain
/// loop version in spectv::kernels::serial. The serial versions are the
/// reference the tests compare against and the baseline for bench/.
///
/// Reductions in the parallel versions sum fixed per-row partials in row order,
/// so results are bit-identical regardless of the thread count.
///
/// Gradient convention: forward differences with Neumann boundary,
///   gx(i,j) = u(i,j+1) - u(i,j)  (0 in the last column)
///   gy(i,j) = u(i+1,j) - u(i,j)  (0 in the last row)
/// and div = -grad^T.
namespace spectv::kernels {

using Span = std::span<double>;
using CSpan = std::span<const double>;

struct ResidualSums {
  double primal = 0.0;       // ||(u_prev-u)/(tT) + div(q_prev-q)||_1
  double dual = 0.0;         // ||(q_prev-q)/(sS) - grad(u_prev-u)||_1
  double coupling = 0.0;     // <grad(u_prev-u), q_prev-q>
  double primal_metric = 0.0;  // ||u_prev-u||^2 weighted by 1/T
  double dual_metric = 0.0;    // ||q_prev-q||^2 weighted by 1/S
};

struct GapSums {
  double tv = 0.0;        // sum |grad u|
  double pairing = 0.0;   // <grad u, q>
  double data = 0.0;      // sum (u-g)^2
};

/// Diagonal preconditioner for the primal variable: 1 / (number of difference
/// stencils touching the pixel), i.e. 1/4 in the interior.
double primal_precond(Grid g, int y, int x);
/// Dual preconditioner: every non-trivial row of grad has two unit entries.
inline constexpr double kDualPrecond = 0.5;

void grad(Grid g, CSpan u, Span gx, Span gy);
void div(Grid g, CSpan gx, CSpan gy, Span out);
double tv(Grid g, CSpan u);
double dot(CSpan a, CSpan b);

/// u_prev <- u; u <- prox of the data term (tau_data/2)|u-f|^2 at u + t*T*div q.
void pdhg_primal(Grid g, Span u, Span u_prev, CSpan qx, CSpan qy, CSpan f,
                 double tau_data, double t);
/// q_prev <- q; q <- proj_{|q|<=1}(q + s*S*grad(2u - u_prev)).
void pdhg_dual(Grid g, CSpan u, CSpan u_prev, Span qx, Span qy, Span qx_prev,
               Span qy_prev, double s);
ResidualSums pdhg_residuals(Grid g, CSpan u, CSpan u_prev, CSpan qx, CSpan qy,
                            CSpan qx_prev, CSpan qy_prev, double t, double s);
/// u <- f + div(q) / tau_data, the minimizer of the Lagrangian for fixed q.
void primal_from_dual(Grid g, CSpan qx, CSpan qy, CSpan f, double tau_data, Span u);
GapSums gap_sums(Grid g, CSpan u, CSpan qx, CSpan qy, CSpan f);

namespace serial {

void grad(Grid g, CSpan u, Span gx, Span gy);
void div(Grid g, CSpan gx, CSpan gy, Span out);
double tv(Grid g, CSpan u);
double dot(CSpan a, CSpan b);
void pdhg_primal(Grid g, Span u, Span u_prev, CSpan qx, CSpan qy, CSpan f,
                 double tau_data, double t);
void pdhg_dual(Grid g, CSpan u, CSpan u_prev, Span qx, Span qy, Span qx_prev,
               Span qy_prev, double s);
ResidualSums pdhg_residuals(Grid g, CSpan u, CSpan u_prev, CSpan qx, CSpan qy,
                            CSpan qx_prev, CSpan qy_prev, double t, double s);
void primal_from_dual(Grid g, CSpan qx, CSpan qy, CSpan f, double tau_data, Span u);
GapSums gap_sums(Grid g, CSpan u, CSpan qx, CSpan qy, CSpan f);

}  // namespace serial

}  // namespace spectv::kernels
