#include "spectv/kernels.hpp"

#include <cmath>
#include <vector>

namespace spectv::kernels {

namespace {

// Rows are the unit of parallel work; per-row partials are summed in row order
// afterwards so reductions do not depend on the thread count.
template <typename T, typename RowFn>
T reduce_rows(int height, RowFn&& row_fn) {
  std::vector<T> partial(static_cast<std::size_t>(height));
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) partial[y] = row_fn(y);
  T total{};
  for (const T& p : partial) total += p;
  return total;
}

ResidualSums& operator+=(ResidualSums& a, const ResidualSums& b) {
  a.primal += b.primal;
  a.dual += b.dual;
  a.coupling += b.coupling;
  a.primal_metric += b.primal_metric;
  a.dual_metric += b.dual_metric;
  return a;
}

GapSums& operator+=(GapSums& a, const GapSums& b) {
  a.tv += b.tv;
  a.pairing += b.pairing;
  a.data += b.data;
  return a;
}

inline double div_px(const double* px_row, const double* py_row, const double* py_up,
                     int x, int w, bool has_down, bool has_up) {
  double d = 0.0;
  if (x < w - 1) d += px_row[x];
  if (x > 0) d -= px_row[x - 1];
  if (has_down) d += py_row[x];
  if (has_up) d -= py_up[x];
  return d;
}

}  // namespace

void grad(Grid g, CSpan u, Span gx, Span gy) {
  const int w = g.width;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < g.height; ++y) {
    const double* row = u.data() + static_cast<std::size_t>(y) * w;
    double* ox = gx.data() + static_cast<std::size_t>(y) * w;
    double* oy = gy.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w - 1; ++x) ox[x] = row[x + 1] - row[x];
    if (w > 0) ox[w - 1] = 0.0;
    if (y < g.height - 1) {
      const double* down = row + w;
      for (int x = 0; x < w; ++x) oy[x] = down[x] - row[x];
    } else {
      for (int x = 0; x < w; ++x) oy[x] = 0.0;
    }
  }
}

void div(Grid g, CSpan gx, CSpan gy, Span out) {
  const int w = g.width;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < g.height; ++y) {
    const std::size_t off = static_cast<std::size_t>(y) * w;
    const double* px = gx.data() + off;
    const double* py = gy.data() + off;
    const double* py_up = y > 0 ? py - w : nullptr;
    const bool down = y < g.height - 1;
    double* o = out.data() + off;
    for (int x = 0; x < w; ++x) o[x] = div_px(px, py, py_up, x, w, down, y > 0);
  }
}

double tv(Grid g, CSpan u) {
  const int w = g.width;
  return reduce_rows<double>(g.height, [&](int y) {
    const double* row = u.data() + static_cast<std::size_t>(y) * w;
    const double* down = y < g.height - 1 ? row + w : nullptr;
    double sum = 0.0;
    for (int x = 0; x < w; ++x) {
      const double a = x < w - 1 ? row[x + 1] - row[x] : 0.0;
      const double b = down ? down[x] - row[x] : 0.0;
      sum += std::sqrt(a * a + b * b);
    }
    return sum;
  });
}

double dot(CSpan a, CSpan b) {
  constexpr std::size_t kBlock = 4096;
  const std::size_t n = a.size();
  const int blocks = static_cast<int>((n + kBlock - 1) / kBlock);
  return reduce_rows<double>(blocks, [&](int blk) {
    const std::size_t lo = static_cast<std::size_t>(blk) * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) sum += a[i] * b[i];
    return sum;
  });
}

void pdhg_primal(Grid g, Span u, Span u_prev, CSpan qx, CSpan qy, CSpan f,
                 double tau_data, double t) {
  const int w = g.width;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < g.height; ++y) {
    const std::size_t off = static_cast<std::size_t>(y) * w;
    const double* px = qx.data() + off;
    const double* py = qy.data() + off;
    const double* py_up = y > 0 ? py - w : nullptr;
    const bool down = y < g.height - 1;
    double* ur = u.data() + off;
    double* pr = u_prev.data() + off;
    const double* fr = f.data() + off;
    for (int x = 0; x < w; ++x) {
      const double step = t * primal_precond(g, y, x);
      pr[x] = ur[x];
      const double v = ur[x] + step * div_px(px, py, py_up, x, w, down, y > 0);
      ur[x] = (v + step * tau_data * fr[x]) / (1.0 + step * tau_data);
    }
  }
}

void pdhg_dual(Grid g, CSpan u, CSpan u_prev, Span qx, Span qy, Span qx_prev,
               Span qy_prev, double s) {
  const int w = g.width;
  const double step = s * kDualPrecond;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < g.height; ++y) {
    const std::size_t off = static_cast<std::size_t>(y) * w;
    const double* ur = u.data() + off;
    const double* pr = u_prev.data() + off;
    const bool down = y < g.height - 1;
    double* px = qx.data() + off;
    double* py = qy.data() + off;
    double* ppx = qx_prev.data() + off;
    double* ppy = qy_prev.data() + off;
    for (int x = 0; x < w; ++x) {
      const double here = 2.0 * ur[x] - pr[x];
      const double bx = x < w - 1 ? (2.0 * ur[x + 1] - pr[x + 1]) - here : 0.0;
      const double by = down ? (2.0 * ur[x + w] - pr[x + w]) - here : 0.0;
      ppx[x] = px[x];
      ppy[x] = py[x];
      double nx = x < w - 1 ? px[x] + step * bx : 0.0;
      double ny = down ? py[x] + step * by : 0.0;
      const double n2 = nx * nx + ny * ny;
      if (n2 > 1.0) {
        const double inv = 1.0 / std::sqrt(n2);
        nx *= inv;
        ny *= inv;
      }
      px[x] = nx;
      py[x] = ny;
    }
  }
}

ResidualSums pdhg_residuals(Grid g, CSpan u, CSpan u_prev, CSpan qx, CSpan qy,
                            CSpan qx_prev, CSpan qy_prev, double t, double s) {
  const int w = g.width;
  const double sig = s * kDualPrecond;
  return reduce_rows<ResidualSums>(g.height, [&](int y) {
    const std::size_t off = static_cast<std::size_t>(y) * w;
    const bool down = y < g.height - 1;
    ResidualSums r;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = off + x;
      const double T = primal_precond(g, y, x);
      const double du = u_prev[i] - u[i];
      const double dqx = qx_prev[i] - qx[i];
      const double dqy = qy_prev[i] - qy[i];
      double ddiv = 0.0;
      if (x < w - 1) ddiv += dqx;
      if (x > 0) ddiv -= qx_prev[i - 1] - qx[i - 1];
      if (down) ddiv += dqy;
      if (y > 0) ddiv -= qy_prev[i - w] - qy[i - w];
      r.primal += std::abs(du / (t * T) + ddiv);
      r.primal_metric += du * du / T;
      const double gdx = x < w - 1 ? (u_prev[i + 1] - u[i + 1]) - du : 0.0;
      const double gdy = down ? (u_prev[i + w] - u[i + w]) - du : 0.0;
      r.dual += std::abs(dqx / sig - gdx) + std::abs(dqy / sig - gdy);
      r.coupling += gdx * dqx + gdy * dqy;
      r.dual_metric += (dqx * dqx + dqy * dqy) / kDualPrecond;
    }
    return r;
  });
}

void primal_from_dual(Grid g, CSpan qx, CSpan qy, CSpan f, double tau_data, Span u) {
  const int w = g.width;
  const double inv = 1.0 / tau_data;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < g.height; ++y) {
    const std::size_t off = static_cast<std::size_t>(y) * w;
    const double* px = qx.data() + off;
    const double* py = qy.data() + off;
    const double* py_up = y > 0 ? py - w : nullptr;
    const bool down = y < g.height - 1;
    for (int x = 0; x < w; ++x) {
      u[off + x] = f[off + x] + div_px(px, py, py_up, x, w, down, y > 0) * inv;
    }
  }
}

GapSums gap_sums(Grid g, CSpan u, CSpan qx, CSpan qy, CSpan f) {
  const int w = g.width;
  return reduce_rows<GapSums>(g.height, [&](int y) {
    const std::size_t off = static_cast<std::size_t>(y) * w;
    const bool down = y < g.height - 1;
    GapSums s;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = off + x;
      const double a = x < w - 1 ? u[i + 1] - u[i] : 0.0;
      const double b = down ? u[i + w] - u[i] : 0.0;
      s.tv += std::sqrt(a * a + b * b);
      s.pairing += a * qx[i] + b * qy[i];
      s.data += (u[i] - f[i]) * (u[i] - f[i]);
    }
    return s;
  });
}

}  // namespace spectv::kernels
