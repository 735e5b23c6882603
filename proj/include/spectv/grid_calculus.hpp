#pragma once

#include <vector>

#include "spectv/image.hpp"

namespace spectv {

/// Two reals per pixel: the x (column) and y (row) components.
struct VectorField2 {
  int height = 0;
  int width = 0;
  std::vector<double> x;
  std::vector<double> y;

  VectorField2() = default;
  VectorField2(int h, int w, double fill = 0.0)
      : height(h), width(w), x(static_cast<std::size_t>(h) * w, fill),
        y(static_cast<std::size_t>(h) * w, fill) {}

  Grid grid() const { return {height, width}; }
};

double inner(const VectorField2& a, const VectorField2& b);

/// Forward differences, Neumann boundary. Input must be single-channel.
VectorField2 grad(const Image& u);
/// Negative adjoint of grad.
Image div(const VectorField2& p);
/// Isotropic TV: sum over pixels of |grad u|. Multi-channel images sum channels.
double tv_value(const Image& u);
/// Sum of |grad u|^2 over pixels.
double dirichlet_energy(const Image& u);

struct PixelConstraint {
  int y = 0;
  int x = 0;
  double value = 0.0;
};

struct LaplaceOptions {
  double tol = 1e-8;   // relative residual of the reduced system
  int max_iter = 100000;
};

struct LaplaceReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Minimizer of ||grad w||^2 subject to w = value at the constrained pixels,
/// Neumann outer boundary. Solved by Jacobi-preconditioned conjugate gradients
/// on the free pixels. Throws if constraints is empty or has repeated pixels.
Image laplace_solve_with_constraints(Grid grid, const std::vector<PixelConstraint>& constraints,
                                     const LaplaceOptions& opts = {},
                                     LaplaceReport* report = nullptr);

}  // namespace spectv
