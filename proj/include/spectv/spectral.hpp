#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spectv/image.hpp"
#include "spectv/tv_prox.hpp"

namespace spectv {

enum class FlowVariant { kGradientFlow, kInverseScaleSpace };

std::string to_string(FlowVariant v);
FlowVariant flow_variant_from_string(const std::string& name);

/// Ordered stack of spectral bands. Band 1 holds the coarsest structures and
/// band K the finest, for both variants, so one K-length filter applies to
/// either. times[k] is the band's scale (1/tau for ISS, flow time for GF) and
/// strictly decreases with k. mean holds the per-channel constant component.
/// reconstruct() = sum of bands + mean.
struct SpectralDecomposition {
  FlowVariant variant = FlowVariant::kInverseScaleSpace;
  std::vector<Image> bands;
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<SolverReport> reports;  // one per band
  int height = 0;
  int width = 0;
  int channels = 0;
  ColorSpace color_space = ColorSpace::kGray;

  int band_count() const { return static_cast<int>(bands.size()); }
  Grid grid() const { return {height, width}; }
  bool all_converged() const;
};

struct BandFilter {
  std::vector<double> weights;  // H(t_k), k = 1..K
  double mean_weight = 1.0;     // H-bar

  static BandFilter identity(int k) { return {std::vector<double>(k, 1.0), 1.0}; }
  static BandFilter constant(int k, double w, double mean_weight) {
    return {std::vector<double>(k, w), mean_weight};
  }
};

/// Reports progress as (finished inner solves, total inner solves).
using ProgressFn = std::function<void(int, int)>;

/// tau_k with 1/tau_k = base * ratio^(k-1), k = 1..count.
std::vector<double> iss_schedule(int count = 15, double base = 30.0, double ratio = 0.6);

/// Bregman discretization of the inverse scale space flow:
///   u_k = argmin (tau_k/2)|u-f|^2 + TV(u) - <p_{k-1}, u>,  p_k = p_{k-1} + tau_k (f - u_k),
/// bands psi_1 = u_1 - mean(f), psi_k = u_k - u_{k-1}.
/// Each channel is decomposed independently.
SpectralDecomposition decompose_iss(const Image& f, const std::vector<double>& taus,
                                    const SolverOptions& opts = {},
                                    const ProgressFn& progress = {},
                                    std::vector<Subgradient>* subgradients = nullptr,
                                    std::vector<Image>* iterates = nullptr);

struct GradientFlowOptions {
  int steps = 50;        // uniform implicit steps on [0, t_max]
  double t_max = 0.0;    // 0: choose automatically
  int bands = 15;        // geometric bins the fine bands are grouped into
  /// Automatic t_max must bring |u(t_max) - mean| within this fraction of |f - mean|.
  double constancy = 0.01;
  int max_doublings = 10;
  SolverOptions solver;
};

/// Implicit TV flow u_{n+1} = argmin (1/2)|u-u_n|^2 + (t_{n+1}-t_n) TV(u) over
/// the given times (which must start at 0 and increase). Returns u at every time.
std::vector<Image> gradient_flow(const Image& f, const std::vector<double>& times,
                                 const SolverOptions& opts = {},
                                 std::vector<SolverReport>* reports = nullptr,
                                 const ProgressFn& progress = {});

/// Gradient-flow spectral transform on an explicit time grid. Fine bands are
/// t_n (D_n - D_{n-1}) with D_n the forward slope (u_{n+1} - u_n)/(t_{n+1} - t_n),
/// grouped into geometric bins of t_n; the non-constant terminal part goes to band 1.
SpectralDecomposition decompose_gf(const Image& f, const std::vector<double>& times,
                                   int bands = 15, const SolverOptions& opts = {},
                                   const ProgressFn& progress = {});
/// Same with a uniform grid of opts.steps steps and automatic t_max.
SpectralDecomposition decompose_gf(const Image& f, const GradientFlowOptions& opts = {},
                                   const ProgressFn& progress = {});

Image reconstruct(const SpectralDecomposition& d);
Image mean_image(const SpectralDecomposition& d);

/// sum_k H_k psi_k + H-bar * mean. One filter for all channels, or one per channel.
Image apply_filter(const SpectralDecomposition& d, const BandFilter& h);
Image apply_filter(const SpectralDecomposition& d, const std::vector<BandFilter>& per_channel);

/// L2 mass ||psi_k||_2^2 of each band.
std::vector<double> band_masses(const SpectralDecomposition& d);
/// Largest share of the total band mass held by at most `width` adjacent bands.
double peak_concentration(const std::vector<double>& masses, int width = 2);
int dominant_band(const std::vector<double>& masses);

/// Restricts a decomposition to one channel.
SpectralDecomposition channel_of(const SpectralDecomposition& d, int c);

}  // namespace spectv
