#pragma once

#include <map>
#include <string>
#include <vector>

#include "spectv/image.hpp"
#include "spectv/registration.hpp"
#include "spectv/spectral.hpp"

namespace spectv {

/// Named single-channel weight images on one grid.
struct RegionMaskSet {
  std::vector<std::string> names;
  std::vector<Image> masks;

  int size() const { return static_cast<int>(names.size()); }
  bool empty() const { return names.empty(); }
  Grid grid() const { return masks.empty() ? Grid{} : masks.front().grid(); }
  int index_of(const std::string& name) const;  // -1 if absent
  /// Appends a region; throws on duplicate names, grid mismatch or non-finite values.
  void add(const std::string& name, Image mask);
  /// A single region covering the whole grid.
  static RegionMaskSet whole(Grid grid, const std::string& name = "background");
};

/// Normalized Gaussian blur with sigma = radius/2 (truncated at 3 sigma, edges
/// renormalized), clamped to [0,1]. radius 0 returns the mask unchanged.
Image feather(const Image& mask, double radius);

/// Makes the set a partition of unity: values are clamped to [0,1], uncovered
/// weight goes to the region `fallback` (added if missing), and pixels where the
/// regions sum above 1 are rescaled.
RegionMaskSet normalize_partition(RegionMaskSet set, const std::string& fallback = "background");

/// Feathers every region, then normalizes.
RegionMaskSet prepare_masks(const RegionMaskSet& raw, double feather_radius,
                            const std::string& fallback = "background");

/// Filled ellipse prior around a group of landmarks: centered on their mean,
/// axes from their spread times `scale` (at least 2 px).
Image ellipse_mask(Grid grid, const LandmarkSet& points, double scale = 2.0);

/// H(x, k) = sum_r m_r(x) h_r(k) per channel, plus the mean weight.
class SpatialFilter {
 public:
  SpatialFilter() = default;
  /// filters[r][c] is region r's filter for channel c.
  SpatialFilter(RegionMaskSet masks, std::vector<std::vector<BandFilter>> filters);
  /// The same filter everywhere.
  static SpatialFilter uniform(Grid grid, int channels, const BandFilter& h);

  Grid grid() const { return masks_.grid(); }
  int bands() const { return bands_; }
  int channels() const { return channels_; }
  const RegionMaskSet& masks() const { return masks_; }
  const BandFilter& region_filter(int region, int channel) const { return filters_[region][channel]; }

  /// Weight plane of band k (0-based) for channel c.
  std::vector<double> weight_plane(int k, int c) const;
  std::vector<double> mean_weight_plane(int c) const;
  /// Whether every region uses the same filter for channel c (then H is constant in x).
  bool uniform_in_space(int c) const;

 private:
  std::vector<double> blend(int c, const std::vector<double>& per_region) const;

  RegionMaskSet masks_;
  std::vector<std::vector<BandFilter>> filters_;
  int bands_ = 0;
  int channels_ = 0;
};

/// per_region maps a region name to one filter per channel, or to a single
/// filter used for every channel.
SpatialFilter assemble_spatial_filter(const RegionMaskSet& masks,
                                      const std::map<std::string, std::vector<BandFilter>>& per_region,
                                      int channels);

/// Spatially varying filtering of one decomposition.
Image apply_spatial_filter(const SpectralDecomposition& d, const SpatialFilter& h);

}  // namespace spectv
