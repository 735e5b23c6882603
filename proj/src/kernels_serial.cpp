// Straightforward single-threaded kernels. These are the reference the
// parallel versions are tested against; keep them simple rather than fast.

#include <cmath>

#include "spectv/kernels.hpp"

namespace spectv::kernels {

double primal_precond(Grid g, int y, int x) {
  const int count = (x > 0) + (x < g.width - 1) + (y > 0) + (y < g.height - 1);
  return count > 0 ? 1.0 / count : 1.0;
}

namespace serial {

namespace {

struct At {
  Grid g;
  std::size_t operator()(int y, int x) const { return static_cast<std::size_t>(y) * g.width + x; }
};

double gx_at(Grid g, CSpan u, int y, int x) {
  At at{g};
  return x < g.width - 1 ? u[at(y, x + 1)] - u[at(y, x)] : 0.0;
}

double gy_at(Grid g, CSpan u, int y, int x) {
  At at{g};
  return y < g.height - 1 ? u[at(y + 1, x)] - u[at(y, x)] : 0.0;
}

double div_at(Grid g, CSpan px, CSpan py, int y, int x) {
  At at{g};
  double d = 0.0;
  if (x < g.width - 1) d += px[at(y, x)];
  if (x > 0) d -= px[at(y, x - 1)];
  if (y < g.height - 1) d += py[at(y, x)];
  if (y > 0) d -= py[at(y - 1, x)];
  return d;
}

}  // namespace

void grad(Grid g, CSpan u, Span gx, Span gy) {
  At at{g};
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      gx[at(y, x)] = gx_at(g, u, y, x);
      gy[at(y, x)] = gy_at(g, u, y, x);
    }
  }
}

void div(Grid g, CSpan gx, CSpan gy, Span out) {
  At at{g};
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) out[at(y, x)] = div_at(g, gx, gy, y, x);
  }
}

double tv(Grid g, CSpan u) {
  double sum = 0.0;
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) sum += std::hypot(gx_at(g, u, y, x), gy_at(g, u, y, x));
  }
  return sum;
}

double dot(CSpan a, CSpan b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

void pdhg_primal(Grid g, Span u, Span u_prev, CSpan qx, CSpan qy, CSpan f,
                 double tau_data, double t) {
  At at{g};
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const std::size_t i = at(y, x);
      const double step = t * primal_precond(g, y, x);
      u_prev[i] = u[i];
      const double v = u[i] + step * div_at(g, qx, qy, y, x);
      u[i] = (v + step * tau_data * f[i]) / (1.0 + step * tau_data);
    }
  }
}

void pdhg_dual(Grid g, CSpan u, CSpan u_prev, Span qx, Span qy, Span qx_prev,
               Span qy_prev, double s) {
  At at{g};
  const double step = s * kDualPrecond;
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const std::size_t i = at(y, x);
      const double bx = x < g.width - 1 ? (2 * u[at(y, x + 1)] - u_prev[at(y, x + 1)]) - (2 * u[i] - u_prev[i]) : 0.0;
      const double by = y < g.height - 1 ? (2 * u[at(y + 1, x)] - u_prev[at(y + 1, x)]) - (2 * u[i] - u_prev[i]) : 0.0;
      qx_prev[i] = qx[i];
      qy_prev[i] = qy[i];
      double nx = x < g.width - 1 ? qx[i] + step * bx : 0.0;
      double ny = y < g.height - 1 ? qy[i] + step * by : 0.0;
      const double norm = std::hypot(nx, ny);
      if (norm > 1.0) {
        nx /= norm;
        ny /= norm;
      }
      qx[i] = nx;
      qy[i] = ny;
    }
  }
}

ResidualSums pdhg_residuals(Grid g, CSpan u, CSpan u_prev, CSpan qx, CSpan qy,
                            CSpan qx_prev, CSpan qy_prev, double t, double s) {
  At at{g};
  ResidualSums r;
  const double sig = s * kDualPrecond;
  auto du = [&](int y, int x) { return u_prev[at(y, x)] - u[at(y, x)]; };
  auto dqx = [&](int y, int x) { return qx_prev[at(y, x)] - qx[at(y, x)]; };
  auto dqy = [&](int y, int x) { return qy_prev[at(y, x)] - qy[at(y, x)]; };
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const double T = primal_precond(g, y, x);
      double ddiv = 0.0;
      if (x < g.width - 1) ddiv += dqx(y, x);
      if (x > 0) ddiv -= dqx(y, x - 1);
      if (y < g.height - 1) ddiv += dqy(y, x);
      if (y > 0) ddiv -= dqy(y - 1, x);
      r.primal += std::abs(du(y, x) / (t * T) + ddiv);
      r.primal_metric += du(y, x) * du(y, x) / T;
      const double gdx = x < g.width - 1 ? du(y, x + 1) - du(y, x) : 0.0;
      const double gdy = y < g.height - 1 ? du(y + 1, x) - du(y, x) : 0.0;
      r.dual += std::abs(dqx(y, x) / sig - gdx) + std::abs(dqy(y, x) / sig - gdy);
      r.coupling += gdx * dqx(y, x) + gdy * dqy(y, x);
      r.dual_metric += (dqx(y, x) * dqx(y, x) + dqy(y, x) * dqy(y, x)) / kDualPrecond;
    }
  }
  return r;
}

void primal_from_dual(Grid g, CSpan qx, CSpan qy, CSpan f, double tau_data, Span u) {
  At at{g};
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      u[at(y, x)] = f[at(y, x)] + div_at(g, qx, qy, y, x) / tau_data;
    }
  }
}

GapSums gap_sums(Grid g, CSpan u, CSpan qx, CSpan qy, CSpan f) {
  At at{g};
  GapSums s;
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const std::size_t i = at(y, x);
      const double gx = gx_at(g, u, y, x);
      const double gy = gy_at(g, u, y, x);
      s.tv += std::hypot(gx, gy);
      s.pairing += gx * qx[i] + gy * qy[i];
      s.data += (u[i] - f[i]) * (u[i] - f[i]);
    }
  }
  return s;
}

}  // namespace serial
}  // namespace spectv::kernels
