#include "spectv/grid_calculus.hpp"

#include <cmath>
#include <set>

#include "spectv/error.hpp"
#include "spectv/kernels.hpp"

namespace spectv {

namespace {

void require_single(const Image& u, const char* what) {
  if (u.channels() != 1) throw invalid_input("grid", std::string(what) + " expects a single-channel image");
}

// y = L x on the full grid, L = grad^T grad (graph Laplacian, Neumann).
void apply_laplacian(Grid g, const std::vector<double>& x, std::vector<double>& out) {
  const int w = g.width;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      double acc = 0.0;
      if (c > 0) acc += x[i] - x[i - 1];
      if (c < w - 1) acc += x[i] - x[i + 1];
      if (r > 0) acc += x[i] - x[i - w];
      if (r < g.height - 1) acc += x[i] - x[i + w];
      out[i] = acc;
    }
  }
}

}  // namespace

double inner(const VectorField2& a, const VectorField2& b) {
  return kernels::dot(a.x, b.x) + kernels::dot(a.y, b.y);
}

VectorField2 grad(const Image& u) {
  require_single(u, "grad");
  VectorField2 out(u.height(), u.width());
  kernels::grad(u.grid(), u.plane(0), out.x, out.y);
  return out;
}

Image div(const VectorField2& p) {
  Image out(p.height, p.width, 1);
  kernels::div(p.grid(), p.x, p.y, out.plane(0));
  return out;
}

double tv_value(const Image& u) {
  double sum = 0.0;
  for (int c = 0; c < u.channels(); ++c) sum += kernels::tv(u.grid(), u.plane(c));
  return sum;
}

double dirichlet_energy(const Image& u) {
  double sum = 0.0;
  for (int c = 0; c < u.channels(); ++c) {
    VectorField2 g(u.height(), u.width());
    kernels::grad(u.grid(), u.plane(c), g.x, g.y);
    sum += inner(g, g);
  }
  return sum;
}

Image laplace_solve_with_constraints(Grid grid, const std::vector<PixelConstraint>& constraints,
                                     const LaplaceOptions& opts, LaplaceReport* report) {
  if (constraints.empty()) {
    throw invalid_input("registration", "Laplace solve needs at least one constraint");
  }
  const std::size_t n = grid.size();
  std::vector<char> fixed(n, 0);
  std::vector<double> w(n, 0.0);
  double mean = 0.0;
  for (const auto& c : constraints) {
    if (c.y < 0 || c.y >= grid.height || c.x < 0 || c.x >= grid.width) {
      throw invalid_input("registration", "constraint outside the grid");
    }
    const std::size_t i = static_cast<std::size_t>(c.y) * grid.width + c.x;
    if (fixed[i]) throw invalid_input("registration", "repeated constraint pixel");
    fixed[i] = 1;
    w[i] = c.value;
    mean += c.value;
  }
  mean /= static_cast<double>(constraints.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!fixed[i]) w[i] = mean;
  }

  // Residual of the free rows: r = -(L w)_F.
  std::vector<double> lw(n), r(n, 0.0), z(n, 0.0), p(n, 0.0), ap(n, 0.0), diag(n, 1.0);
  apply_laplacian(grid, w, lw);
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * grid.width + x;
      diag[i] = (x > 0) + (x < grid.width - 1) + (y > 0) + (y < grid.height - 1);
      if (diag[i] == 0) diag[i] = 1;
      if (!fixed[i]) r[i] = -lw[i];
    }
  }
  // Reference scale: the free-row residual of the zero-initialized system.
  std::vector<double> w0(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) w0[i] = fixed[i] ? w[i] : 0.0;
  apply_laplacian(grid, w0, lw);
  double bnorm2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!fixed[i]) bnorm2 += lw[i] * lw[i];
  }
  const double bnorm = std::sqrt(bnorm2);

  auto residual_norm = [&]() { return std::sqrt(kernels::dot(r, r)); };
  LaplaceReport rep;
  double rnorm = residual_norm();
  const double target = opts.tol * (bnorm > 0.0 ? bnorm : 1.0);
  if (rnorm > target) {
    for (std::size_t i = 0; i < n; ++i) z[i] = fixed[i] ? 0.0 : r[i] / diag[i];
    p = z;
    double rz = kernels::dot(r, z);
    for (rep.iterations = 1; rep.iterations <= opts.max_iter; ++rep.iterations) {
      apply_laplacian(grid, p, ap);
      for (std::size_t i = 0; i < n; ++i) {
        if (fixed[i]) ap[i] = 0.0;
      }
      const double pap = kernels::dot(p, ap);
      if (pap <= 0.0) break;
      const double alpha = rz / pap;
      for (std::size_t i = 0; i < n; ++i) {
        w[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      rnorm = residual_norm();
      if (rnorm <= target) break;
      for (std::size_t i = 0; i < n; ++i) z[i] = fixed[i] ? 0.0 : r[i] / diag[i];
      const double rz_next = kernels::dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
  }
  rep.relative_residual = bnorm > 0.0 ? rnorm / bnorm : rnorm;
  rep.converged = rnorm <= target;
  if (report) *report = rep;
  if (!rep.converged) {
    throw Error(ErrorKind::kNumerical, "registration", "Laplace solve did not converge");
  }
  Image out(grid.height, grid.width, 1);
  std::copy(w.begin(), w.end(), out.data().begin());
  return out;
}

}  // namespace spectv
