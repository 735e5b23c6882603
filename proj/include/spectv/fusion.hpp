#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spectv/masks.hpp"
#include "spectv/registration.hpp"
#include "spectv/spectral.hpp"

namespace spectv {

/// Which grid filter 2 is defined on. kSource evaluates it at x + v(x) in
/// image 2's frame, as the fusion formula reads; kTarget evaluates it at x, so
/// one mask set drawn on image 1 can drive both filters.
enum class FilterFrame { kSource, kTarget };

/// Per-image, per-region, per-channel band filters plus the mean weights.
/// Row lookup prefers an exact region over "*", and an exact channel over "*".
struct FilterSpec {
  struct Row {
    int image = 1;               // 1 or 2
    std::string region = "*";
    int channel = -1;            // -1: every channel
    BandFilter filter;
  };

  int bands = 0;
  int channels = 0;
  std::vector<double> omega1;  // per channel
  std::vector<double> omega2;
  FilterFrame frame2 = FilterFrame::kTarget;
  std::vector<Row> rows;

  /// Throws if rows disagree with bands/channels or image is not 1 or 2.
  void validate() const;
  std::optional<BandFilter> lookup(int image, const std::string& region, int channel) const;
  /// Spatial filter of `image` over the given regions.
  SpatialFilter spatial(int image, const RegionMaskSet& masks) const;
};

/// Named profiles. Unknown names throw.
///   identity-1, identity-2   everything from one image
///   face                     luminance from both at high bands, chrominance toward image 1,
///                            eyes/mouth luminance detail from image 2
///   insertion                region "object": bands >= k_lo from image 2, the rest from image 1
///   style                    bands < k_lo from image 1, bands >= k_lo from image 2 times gain
struct ProfileParams {
  int k_lo = 0;        // 0: K/3 rounded up, at least 2
  double gain = 1.0;
};
FilterSpec filter_profile(const std::string& name, int bands, int channels,
                          const ProfileParams& params = {});
std::vector<std::string> profile_names();

struct FusionJob {
  std::shared_ptr<const SpectralDecomposition> d1;
  std::shared_ptr<const SpectralDecomposition> d2;
  RegistrationField field;  // on image 1's grid
  SpatialFilter filter1;    // on image 1's grid
  SpatialFilter filter2;    // on the grid selected by frame2
  FilterFrame frame2 = FilterFrame::kTarget;
  std::vector<double> omega1;
  std::vector<double> omega2;
};

/// u(x) = sum_k H1(x,k) psi1_k(x) + H2(x+v(x),k) psi2_k(x+v(x)) + omega1 f1bar + omega2 f2bar.
Image fuse(const FusionJob& job);
/// Same, with image 2's bands already warped onto image 1's grid.
Image fuse_prewarped(const SpectralDecomposition& d1, const SpectralDecomposition& warped2,
                     const SpatialFilter& filter1, const SpatialFilter& filter2_target,
                     const std::vector<double>& omega1, const std::vector<double>& omega2);

struct PipelineConfig {
  FlowVariant variant = FlowVariant::kInverseScaleSpace;
  int bands = 15;
  double base = 30.0;   // 1/tau_1
  double ratio = 0.6;   // 1/tau_{k+1} = ratio / tau_k
  SolverOptions solver;
  int gf_steps = 50;
  double gf_t_max = 0.0;
  ColorSpace color_space = ColorSpace::kLcc;  // used for RGB inputs
  double feather_radius = 8.0;
  int max_side = 0;  // 0: full resolution

  /// Throws on non-positive parameters.
  void validate() const;
};

/// Converts to the working color space and runs the configured variant.
SpectralDecomposition decompose(const Image& rgb_or_gray, const PipelineConfig& config,
                                const ProgressFn& progress = {});
/// Back to RGB (or gray) for display and output.
Image to_output_space(const Image& img);

struct FusionInputs {
  Image image1;
  Image image2;
  std::optional<LandmarkSet> landmarks1;
  std::optional<LandmarkSet> landmarks2;
  RegionMaskSet masks1;  // raw (binary or soft) masks on image 1's grid
  RegionMaskSet masks2;  // on image 2's grid, used when frame2 is kSource
};

/// Applies max_side: images, landmarks and masks are rescaled together.
FusionInputs downscale_inputs(const FusionInputs& in, int max_side);

/// Everything a filter spec needs to be rendered: the expensive part.
struct PreparedFusion {
  std::shared_ptr<const SpectralDecomposition> d1;
  std::shared_ptr<const SpectralDecomposition> d2;
  std::shared_ptr<const SpectralDecomposition> warped2;  // d2 on image 1's grid
  RegistrationField field;
  RegionMaskSet masks1;  // normalized partitions
  RegionMaskSet masks2;
};

/// Decomposes both images and solves the registration (identity without landmarks).
/// Errors carry the stage that failed. Decompositions can be passed in to reuse a cache.
PreparedFusion prepare_fusion(const FusionInputs& in, const PipelineConfig& config,
                              const ProgressFn& progress = {},
                              std::shared_ptr<const SpectralDecomposition> d1 = nullptr,
                              std::shared_ptr<const SpectralDecomposition> d2 = nullptr);
/// Fuses under a spec and converts back to RGB/gray.
Image render_fusion(const PreparedFusion& prepared, const FilterSpec& spec);

/// Binary "face" ellipse around all landmarks, plus "eyes"/"mouth" ellipses
/// around landmarks whose labels start with eye/mouth. Later regions win overlaps.
RegionMaskSet face_region_priors(Grid grid, const LandmarkSet& points);

/// Shared by the CLI and the service so both see identical inputs: "style"
/// resamples image 2 onto image 1's grid, then max_side is applied, then
/// "face" without masks1 derives regions from landmarks1. Presets: custom, face,
/// insertion, style. Missing face landmarks or insertion "object" mask are usage errors.
FusionInputs stage_inputs(FusionInputs in, const std::string& preset, int max_side);

/// Without masks1 the regions come from face_region_priors on landmarks1.
Image preset_face_fusion(const FusionInputs& in, const std::string& profile,
                         const PipelineConfig& config);
/// masks1 must contain the region "object" (on image 1's grid).
Image preset_object_insertion(const FusionInputs& in, int k_lo, const PipelineConfig& config);
/// k_lo in 1..K+1. A style image of another size is resampled to the content grid.
Image preset_style_transfer(const Image& content, const Image& style, int k_lo, double gain,
                            const PipelineConfig& config);

}  // namespace spectv
