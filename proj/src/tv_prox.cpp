#include "spectv/tv_prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spectv/error.hpp"
#include "spectv/kernels.hpp"

namespace spectv {

namespace {

// Residual-balancing constants (Goldstein-Esser style adaptation).
constexpr double kAlpha0 = 0.5;
constexpr double kEta = 0.95;
constexpr double kBalance = 1.5;
constexpr double kBacktrack = 0.95;
constexpr int kEveryIterationWindow = 100;

struct ChannelResult {
  std::vector<double> u;
  VectorField2 q;
  SolverReport report;
};

constexpr int kMinCoarseSide = 16;

ChannelResult solve_channel(Grid grid, std::span<const double> data, double tau,
                            const SolverOptions& opts, const VectorField2* warm);

// Dual initialization from the problem on a 2x coarser grid. A 2x2 block
// image has twice the TV and four times the squared data misfit, so the
// coarse problem uses 2*tau; its unit-bounded flux field carries over directly.
VectorField2 coarse_dual(Grid grid, std::span<const double> data, double tau,
                         const SolverOptions& opts) {
  const Grid coarse{(grid.height + 1) / 2, (grid.width + 1) / 2};
  std::vector<double> cdata(coarse.size(), 0.0), count(coarse.size(), 0.0);
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const std::size_t ci = static_cast<std::size_t>(y / 2) * coarse.width + x / 2;
      cdata[ci] += data[static_cast<std::size_t>(y) * grid.width + x];
      count[ci] += 1.0;
    }
  }
  for (std::size_t i = 0; i < cdata.size(); ++i) cdata[i] /= count[i];
  const ChannelResult c = solve_channel(coarse, cdata, 2.0 * tau, opts, nullptr);

  VectorField2 q(grid.height, grid.width);
  auto cq = [&](const std::vector<double>& comp, int i, int j) {
    if (i < 0 || j < 0) return 0.0;
    return comp[static_cast<std::size_t>(i) * coarse.width + j];
  };
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const std::size_t fi = static_cast<std::size_t>(y) * grid.width + x;
      const int i = y / 2, j = x / 2;
      double qx = 0.0, qy = 0.0;
      if (x < grid.width - 1) {
        qx = (x % 2 == 1) ? cq(c.q.x, i, j) : 0.5 * (cq(c.q.x, i, j - 1) + cq(c.q.x, i, j));
      }
      if (y < grid.height - 1) {
        qy = (y % 2 == 1) ? cq(c.q.y, i, j) : 0.5 * (cq(c.q.y, i - 1, j) + cq(c.q.y, i, j));
      }
      const double norm = std::sqrt(qx * qx + qy * qy);
      if (norm > 1.0) {
        qx /= norm;
        qy /= norm;
      }
      q.x[fi] = qx;
      q.y[fi] = qy;
    }
  }
  return q;
}

ChannelResult solve_channel(Grid grid, std::span<const double> data, double tau,
                            const SolverOptions& opts, const VectorField2* warm) {
  const std::size_t n = grid.size();
  ChannelResult res;
  if (warm) {
    res.q = *warm;
  } else if (opts.multiscale && std::min(grid.height, grid.width) >= 2 * kMinCoarseSide) {
    res.q = coarse_dual(grid, data, tau, opts);
  } else {
    res.q = VectorField2(grid.height, grid.width);
  }
  VectorField2 q_prev = res.q;
  std::vector<double> u(n), u_prev(n), uq(n);
  kernels::primal_from_dual(grid, res.q.x, res.q.y, data, tau, u);
  u_prev = u;

  double t = std::sqrt(opts.step_ratio);
  double s = 1.0 / t;
  double alpha = kAlpha0;
  SolverReport& rep = res.report;

  auto check_gap = [&]() {
    kernels::primal_from_dual(grid, res.q.x, res.q.y, data, tau, uq);
    const auto sums = kernels::gap_sums(grid, uq, res.q.x, res.q.y, data);
    const double primal = 0.5 * tau * sums.data + sums.tv;
    const double dual = 0.5 * tau * sums.data + sums.pairing;
    const double gap = std::max(0.0, sums.tv - sums.pairing);
    rep.primal_dual_gap = gap / (1.0 + std::abs(primal) + std::abs(dual));
    if (opts.record_energy) rep.energy_trace.push_back(primal);
    return rep.primal_dual_gap <= opts.tol;
  };

  bool done = check_gap();
  int iter = 0;
  while (!done && iter < opts.max_iter) {
    ++iter;
    kernels::pdhg_primal(grid, u, u_prev, res.q.x, res.q.y, data, tau, t);
    kernels::pdhg_dual(grid, u, u_prev, res.q.x, res.q.y, q_prev.x, q_prev.y, s);

    const bool check = iter % opts.check_every == 0;
    if (opts.adaptive && (iter <= kEveryIterationWindow || check)) {
      const auto r = kernels::pdhg_residuals(grid, u, u_prev, res.q.x, res.q.y, q_prev.x,
                                             q_prev.y, t, s);
      const double metric = r.primal_metric / t + r.dual_metric / s;
      const double b = metric > 0.0 ? 2.0 * std::abs(r.coupling) / metric : 0.0;
      if (b > 1.0) {
        t *= kBacktrack / b;
        s *= kBacktrack / b;
      }
      if (r.primal > kBalance * r.dual) {
        t /= (1.0 - alpha);
        s *= (1.0 - alpha);
        alpha *= kEta;
      } else if (r.dual > kBalance * r.primal) {
        t *= (1.0 - alpha);
        s /= (1.0 - alpha);
        alpha *= kEta;
      }
    }
    if (check) done = check_gap();
  }
  if (!done) done = check_gap();
  rep.iterations = iter;
  rep.converged = done;
  kernels::primal_from_dual(grid, res.q.x, res.q.y, data, tau, uq);

  // Large TV weights flatten the data entirely. The iterate only approaches
  // the constant, so take the mean itself whenever it scores no worse.
  double mean = 0.0;
  for (double v : data) mean += v;
  mean /= static_cast<double>(n);
  double flat = 0.0;
  for (double v : data) flat += (v - mean) * (v - mean);
  const auto sums = kernels::gap_sums(grid, uq, res.q.x, res.q.y, data);
  if (0.5 * tau * flat <= 0.5 * tau * sums.data + sums.tv) std::fill(uq.begin(), uq.end(), mean);
  res.u = std::move(uq);
  return res;
}

}  // namespace

Subgradient Subgradient::zero(const Image& like) {
  Subgradient s;
  s.p = Image(like.height(), like.width(), like.channels(), like.color_space());
  s.dual.assign(like.channels(), VectorField2(like.height(), like.width()));
  return s;
}

SubproblemResult solve_bregman_subproblem(const Image& f, const Subgradient& p_prev, double tau,
                                          const SolverOptions& opts,
                                          const std::vector<VectorField2>* warm_dual) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw invalid_input("tv-prox", "tau must be positive and finite");
  }
  if (!p_prev.empty() && !p_prev.p.same_shape(f)) {
    throw invalid_input("tv-prox", "subgradient shape does not match the image");
  }
  if (warm_dual && static_cast<int>(warm_dual->size()) != f.channels()) {
    throw invalid_input("tv-prox", "warm-start dual has the wrong channel count");
  }
  if (opts.check_every <= 0 || opts.max_iter < 0) {
    throw invalid_input("tv-prox", "invalid solver options");
  }
  SubproblemResult out;
  out.u = Image(f.height(), f.width(), f.channels(), f.color_space());
  out.report.converged = true;
  std::vector<double> data(f.plane_size());
  for (int c = 0; c < f.channels(); ++c) {
    auto fc = f.plane(c);
    for (std::size_t i = 0; i < data.size(); ++i) {
      data[i] = fc[i] + (p_prev.empty() ? 0.0 : p_prev.p.plane(c)[i] / tau);
    }
    const VectorField2* warm = warm_dual ? &(*warm_dual)[c] : nullptr;
    if (warm && warm->grid() != f.grid()) {
      throw invalid_input("tv-prox", "warm-start dual grid mismatch");
    }
    ChannelResult r = solve_channel(f.grid(), data, tau, opts, warm);
    std::copy(r.u.begin(), r.u.end(), out.u.plane(c).begin());
    out.dual.push_back(std::move(r.q));
    out.report.iterations = std::max(out.report.iterations, r.report.iterations);
    out.report.primal_dual_gap = std::max(out.report.primal_dual_gap, r.report.primal_dual_gap);
    out.report.converged = out.report.converged && r.report.converged;
    if (c == 0) out.report.energy_trace = std::move(r.report.energy_trace);
  }
  return out;
}

Subgradient extract_subgradient(const Image& f, const Image& u, const Subgradient& p_prev,
                                double tau, const std::vector<VectorField2>& dual) {
  if (!f.same_shape(u)) throw invalid_input("tv-prox", "f and u shapes differ");
  if (!p_prev.empty() && !p_prev.p.same_shape(f)) {
    throw invalid_input("tv-prox", "subgradient shape does not match the image");
  }
  Subgradient out;
  out.p = Image(f.height(), f.width(), f.channels(), f.color_space());
  for (std::size_t i = 0; i < f.data().size(); ++i) {
    const double prev = p_prev.empty() ? 0.0 : p_prev.p.data()[i];
    out.p.data()[i] = prev + tau * (f.data()[i] - u.data()[i]);
  }
  out.dual = dual;
  return out;
}

double subgradient_alignment(const Image& p, const Image& u) {
  if (!p.same_shape(u)) throw invalid_input("tv-prox", "shape mismatch");
  const double tv = tv_value(u);
  // p has zero mean, so pair against u - mean(u) to keep rounding out of flat images.
  const auto means = channel_means(u);
  double pairing = 0.0;
  for (int c = 0; c < u.channels(); ++c) {
    std::vector<double> centered(u.plane(c).begin(), u.plane(c).end());
    for (double& v : centered) v -= means[c];
    pairing += kernels::dot(p.plane(c), centered);
  }
  if (tv == 0.0) return pairing == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return pairing / tv;
}

}  // namespace spectv
