#include "spectv/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "spectv/error.hpp"
#include "spectv/grid_calculus.hpp"

namespace spectv {

namespace {

SolverReport merge(SolverReport acc, const SolverReport& r) {
  acc.iterations = std::max(acc.iterations, r.iterations);
  acc.primal_dual_gap = std::max(acc.primal_dual_gap, r.primal_dual_gap);
  acc.converged = acc.converged && r.converged;
  return acc;
}

Image constant_like(const Image& f, const std::vector<double>& values) {
  Image out(f.height(), f.width(), f.channels(), f.color_space());
  for (int c = 0; c < f.channels(); ++c) {
    std::fill(out.plane(c).begin(), out.plane(c).end(), values[c]);
  }
  return out;
}

void require_image(const Image& f) {
  if (f.empty()) throw invalid_input("decomposition", "empty input image");
  if (!f.all_finite()) throw invalid_input("decomposition", "input contains non-finite values");
}

}  // namespace

std::string to_string(FlowVariant v) {
  return v == FlowVariant::kGradientFlow ? "gf" : "iss";
}

FlowVariant flow_variant_from_string(const std::string& name) {
  if (name == "gf") return FlowVariant::kGradientFlow;
  if (name == "iss") return FlowVariant::kInverseScaleSpace;
  throw invalid_input("decomposition", "unknown variant '" + name + "' (expected gf or iss)");
}

bool SpectralDecomposition::all_converged() const {
  return std::all_of(reports.begin(), reports.end(), [](const SolverReport& r) { return r.converged; });
}

std::vector<double> iss_schedule(int count, double base, double ratio) {
  if (count < 1 || !(base > 0.0) || !(ratio > 0.0)) {
    throw invalid_input("decomposition", "schedule needs count >= 1 and positive base/ratio");
  }
  std::vector<double> taus(count);
  for (int k = 0; k < count; ++k) taus[k] = 1.0 / (base * std::pow(ratio, k));
  return taus;
}

SpectralDecomposition decompose_iss(const Image& f, const std::vector<double>& taus,
                                    const SolverOptions& opts, const ProgressFn& progress,
                                    std::vector<Subgradient>* subgradients,
                                    std::vector<Image>* iterates) {
  require_image(f);
  if (taus.empty()) throw invalid_input("decomposition", "empty tau schedule");
  for (std::size_t k = 0; k < taus.size(); ++k) {
    if (!(taus[k] > 0.0) || !std::isfinite(taus[k])) {
      throw invalid_input("decomposition", "tau values must be positive");
    }
    if (k > 0 && !(taus[k] > taus[k - 1])) {
      throw invalid_input("decomposition", "tau schedule must strictly increase");
    }
  }
  SpectralDecomposition d;
  d.variant = FlowVariant::kInverseScaleSpace;
  d.height = f.height();
  d.width = f.width();
  d.channels = f.channels();
  d.color_space = f.color_space();
  d.mean = channel_means(f);

  Subgradient p = Subgradient::zero(f);
  std::vector<VectorField2> dual = p.dual;
  Image previous = constant_like(f, d.mean);
  const int total = static_cast<int>(taus.size());
  for (int k = 0; k < total; ++k) {
    SubproblemResult r = solve_bregman_subproblem(f, p, taus[k], opts, &dual);
    p = extract_subgradient(f, r.u, p, taus[k], r.dual);
    dual = std::move(r.dual);
    d.bands.push_back(r.u - previous);
    d.times.push_back(1.0 / taus[k]);
    d.reports.push_back(r.report);
    if (subgradients) subgradients->push_back(p);
    if (iterates) iterates->push_back(r.u);
    previous = std::move(r.u);
    if (progress) progress(k + 1, total);
  }
  return d;
}

std::vector<Image> gradient_flow(const Image& f, const std::vector<double>& times,
                                 const SolverOptions& opts, std::vector<SolverReport>* reports,
                                 const ProgressFn& progress) {
  require_image(f);
  if (times.size() < 2 || times.front() != 0.0) {
    throw invalid_input("decomposition", "flow times must start at 0 and have at least 2 entries");
  }
  for (std::size_t n = 1; n < times.size(); ++n) {
    if (!(times[n] > times[n - 1]) || !std::isfinite(times[n])) {
      throw invalid_input("decomposition", "flow times must strictly increase");
    }
  }
  std::vector<Image> us;
  us.reserve(times.size());
  us.push_back(f);
  std::vector<VectorField2> dual(f.channels(), VectorField2(f.height(), f.width()));
  const int steps = static_cast<int>(times.size()) - 1;
  for (int n = 0; n < steps; ++n) {
    const double dt = times[n + 1] - times[n];
    SubproblemResult r = solve_bregman_subproblem(us.back(), Subgradient{}, 1.0 / dt, opts,
                                                  n == 0 ? nullptr : &dual);
    dual = std::move(r.dual);
    if (reports) reports->push_back(r.report);
    us.push_back(std::move(r.u));
    if (progress) progress(n + 1, steps);
  }
  return us;
}

SpectralDecomposition decompose_gf(const Image& f, const std::vector<double>& times_in,
                                   int bands, const SolverOptions& opts,
                                   const ProgressFn& progress) {
  if (bands < 1) throw invalid_input("decomposition", "band count must be >= 1");
  std::vector<double> times = times_in;
  if (!times.empty() && times.front() != 0.0) times.insert(times.begin(), 0.0);
  if (times.size() < 3) throw invalid_input("decomposition", "time grid needs at least 3 points");

  SpectralDecomposition d;
  d.variant = FlowVariant::kGradientFlow;
  d.height = f.height();
  d.width = f.width();
  d.channels = f.channels();
  d.color_space = f.color_space();
  d.mean = channel_means(f);

  std::vector<SolverReport> step_reports;
  const std::vector<Image> us = gradient_flow(f, times, opts, &step_reports, progress);
  const int last = static_cast<int>(us.size()) - 1;  // index N

  // Geometric bins over the fine band times t_1 .. t_{N-1}; bin 0 is finest.
  const double lo = times[1];
  const double hi = times[last - 1];
  const double ratio = hi > lo ? hi / lo : 2.0;
  auto bin_of = [&](double t) {
    if (!(hi > lo)) return 0;
    const int b = static_cast<int>(std::floor(bands * std::log(t / lo) / std::log(ratio)));
    return std::clamp(b, 0, bands - 1);
  };
  const Image zero(f.height(), f.width(), f.channels(), f.color_space());
  d.bands.assign(bands, zero);
  for (int k = 0; k < bands; ++k) {
    const int b = bands - 1 - k;
    d.times.push_back(lo * std::pow(ratio, (b + 0.5) / bands));
  }

  auto slope = [&](int n) {  // (u_{n+1} - u_n) / (t_{n+1} - t_n)
    Image s = us[n + 1] - us[n];
    s *= 1.0 / (times[n + 1] - times[n]);
    return s;
  };
  Image prev_slope = slope(0);
  for (int n = 1; n < last; ++n) {
    Image next_slope = slope(n);
    Image phi = next_slope - prev_slope;
    phi *= times[n];
    d.bands[bands - 1 - bin_of(times[n])] += phi;
    prev_slope = std::move(next_slope);
  }
  // f = sum of fine bands + u_{N-1} - t_{N-1} * slope_{N-1}; the non-constant
  // part of that terminal term belongs to the coarsest band.
  Image terminal = us[last - 1] - times[last - 1] * prev_slope;
  terminal -= constant_like(f, d.mean);
  d.bands[0] += terminal;

  SolverReport summary;
  summary.converged = true;
  for (const auto& r : step_reports) summary = merge(summary, r);
  d.reports.assign(bands, summary);
  return d;
}

SpectralDecomposition decompose_gf(const Image& f, const GradientFlowOptions& opts,
                                   const ProgressFn& progress) {
  require_image(f);
  if (opts.steps < 2) throw invalid_input("decomposition", "gradient flow needs at least 2 steps");
  const auto means = channel_means(f);
  const Image centered = f - constant_like(f, means);
  const double spread = l2_norm(centered);

  auto uniform = [&](double t_max) {
    std::vector<double> t(opts.steps + 1);
    for (int n = 0; n <= opts.steps; ++n) t[n] = t_max * n / opts.steps;
    return t;
  };

  double t_max = opts.t_max;
  if (t_max <= 0.0) {
    const double tv = tv_value(f);
    // Extinction takes at least |f - mean|^2 / (2 TV(f)); for an eigenfunction
    // it is exactly |f - mean|^2 / TV(f).
    t_max = (spread > 0.0 && tv > 0.0) ? 2.0 * spread * spread / tv : 1.0;
    if (spread > 0.0) {
      for (int i = 0; i < opts.max_doublings; ++i) {
        const auto us = gradient_flow(f, {0.0, t_max}, opts.solver);
        const double remaining = l2_norm(us.back() - constant_like(f, means));
        if (remaining <= opts.constancy * spread) break;
        t_max *= 2.0;
      }
    }
  }
  return decompose_gf(f, uniform(t_max), opts.bands, opts.solver, progress);
}

Image mean_image(const SpectralDecomposition& d) {
  Image out(d.height, d.width, d.channels, d.color_space);
  for (int c = 0; c < d.channels; ++c) {
    std::fill(out.plane(c).begin(), out.plane(c).end(), d.mean[c]);
  }
  return out;
}

Image reconstruct(const SpectralDecomposition& d) {
  Image out = mean_image(d);
  for (const Image& band : d.bands) out += band;
  return out;
}

Image apply_filter(const SpectralDecomposition& d, const BandFilter& h) {
  return apply_filter(d, std::vector<BandFilter>(std::max(d.channels, 1), h));
}

Image apply_filter(const SpectralDecomposition& d, const std::vector<BandFilter>& per_channel) {
  if (static_cast<int>(per_channel.size()) != d.channels) {
    throw invalid_input("filter", "need one band filter per channel");
  }
  for (const auto& h : per_channel) {
    if (static_cast<int>(h.weights.size()) != d.band_count()) {
      throw invalid_input("filter", "filter has " + std::to_string(h.weights.size()) +
                                        " weights, decomposition has " +
                                        std::to_string(d.band_count()) + " bands");
    }
  }
  Image out(d.height, d.width, d.channels, d.color_space);
  for (int c = 0; c < d.channels; ++c) {
    auto dst = out.plane(c);
    const BandFilter& h = per_channel[c];
    std::fill(dst.begin(), dst.end(), h.mean_weight * d.mean[c]);
    for (int k = 0; k < d.band_count(); ++k) {
      const double w = h.weights[k];
      if (w == 0.0) continue;
      auto src = d.bands[k].plane(c);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
    }
  }
  return out;
}

std::vector<double> band_masses(const SpectralDecomposition& d) {
  std::vector<double> m;
  m.reserve(d.bands.size());
  for (const Image& b : d.bands) {
    const double n = l2_norm(b);
    m.push_back(n * n);
  }
  return m;
}

double peak_concentration(const std::vector<double>& masses, int width) {
  double total = 0.0;
  for (double m : masses) total += m;
  if (total <= 0.0) return 1.0;
  double best = 0.0;
  for (std::size_t k = 0; k < masses.size(); ++k) {
    double window = 0.0;
    for (std::size_t j = k; j < std::min(masses.size(), k + width); ++j) window += masses[j];
    best = std::max(best, window);
  }
  return best / total;
}

int dominant_band(const std::vector<double>& masses) {
  return static_cast<int>(std::max_element(masses.begin(), masses.end()) - masses.begin());
}

SpectralDecomposition channel_of(const SpectralDecomposition& d, int c) {
  if (c < 0 || c >= d.channels) throw invalid_input("decomposition", "channel out of range");
  SpectralDecomposition out = d;
  out.channels = 1;
  out.color_space = ColorSpace::kGray;
  out.mean = {d.mean[c]};
  for (std::size_t k = 0; k < d.bands.size(); ++k) out.bands[k] = d.bands[k].channel(c);
  return out;
}

}  // namespace spectv
