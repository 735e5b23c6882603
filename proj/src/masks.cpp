#include "spectv/masks.hpp"

#include <algorithm>
#include <cmath>

#include "spectv/error.hpp"

namespace spectv {

int RegionMaskSet::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

void RegionMaskSet::add(const std::string& name, Image mask) {
  if (name.empty()) throw invalid_input("masks", "region name is empty");
  if (index_of(name) >= 0) throw invalid_input("masks", "duplicate region '" + name + "'");
  if (mask.channels() != 1) mask = mask.channel(0);
  if (!masks.empty() && mask.grid() != grid()) {
    throw invalid_input("masks", "region '" + name + "' has a different size");
  }
  if (!mask.all_finite()) throw invalid_input("masks", "region '" + name + "' is not finite");
  names.push_back(name);
  masks.push_back(std::move(mask));
}

RegionMaskSet RegionMaskSet::whole(Grid grid, const std::string& name) {
  RegionMaskSet s;
  s.add(name, Image(grid.height, grid.width, 1, 1.0));
  return s;
}

namespace {

// One normalized 1D pass; weights are renormalized where the kernel leaves the grid.
void blur_pass(const std::vector<double>& in, std::vector<double>& out, int h, int w,
               const std::vector<double>& kernel, bool along_x) {
  const int r = static_cast<int>(kernel.size()) - 1;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double num = 0.0, den = 0.0;
      for (int d = -r; d <= r; ++d) {
        const int yy = along_x ? y : y + d;
        const int xx = along_x ? x + d : x;
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
        const double k = kernel[std::abs(d)];
        num += k * in[static_cast<std::size_t>(yy) * w + xx];
        den += k;
      }
      out[static_cast<std::size_t>(y) * w + x] = num / den;
    }
  }
}

}  // namespace

Image feather(const Image& mask, double radius) {
  if (!(radius >= 0.0) || !std::isfinite(radius)) {
    throw invalid_input("masks", "feather radius must be >= 0");
  }
  Image single = mask.channels() == 1 ? mask : mask.channel(0);
  if (radius == 0.0 || single.empty()) return single;
  const double sigma = radius / 2.0;
  const int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(half + 1);
  for (int d = 0; d <= half; ++d) kernel[d] = std::exp(-0.5 * d * d / (sigma * sigma));

  const int h = single.height(), w = single.width();
  std::vector<double> src(single.plane(0).begin(), single.plane(0).end()), tmp(src.size());
  blur_pass(src, tmp, h, w, kernel, true);
  blur_pass(tmp, src, h, w, kernel, false);
  Image out(h, w, 1);
  auto dst = out.plane(0);
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::clamp(src[i], 0.0, 1.0);
  return out;
}

RegionMaskSet normalize_partition(RegionMaskSet set, const std::string& fallback) {
  if (set.empty()) throw invalid_input("masks", "no regions to normalize");
  const std::size_t n = set.grid().size();
  for (auto& m : set.masks) {
    for (double& v : m.plane(0)) v = std::clamp(v, 0.0, 1.0);
  }
  int fb = set.index_of(fallback);
  std::vector<double> covered(n, 0.0);
  for (int r = 0; r < set.size(); ++r) {
    if (r == fb) continue;
    auto m = set.masks[r].plane(0);
    for (std::size_t i = 0; i < n; ++i) covered[i] += m[i];
  }
  const bool gap = std::any_of(covered.begin(), covered.end(), [](double s) { return s < 1.0; });
  if (fb < 0 && gap) {
    set.add(fallback, Image(set.grid().height, set.grid().width, 1));
    fb = set.size() - 1;
  }
  if (fb >= 0) {
    auto m = set.masks[fb].plane(0);
    for (std::size_t i = 0; i < n; ++i) m[i] = std::max(0.0, 1.0 - covered[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (const auto& m : set.masks) total += m.plane(0)[i];
    if (total == 1.0) continue;
    if (total <= 0.0) {  // only when nothing covers the pixel and there is no room for a fallback
      throw invalid_input("masks", "masks leave a pixel uncovered");
    }
    for (auto& m : set.masks) m.plane(0)[i] /= total;
  }
  return set;
}

RegionMaskSet prepare_masks(const RegionMaskSet& raw, double feather_radius,
                            const std::string& fallback) {
  RegionMaskSet soft;
  for (int r = 0; r < raw.size(); ++r) {
    soft.add(raw.names[r], raw.names[r] == fallback ? raw.masks[r] : feather(raw.masks[r], feather_radius));
  }
  return normalize_partition(std::move(soft), fallback);
}

Image ellipse_mask(Grid grid, const LandmarkSet& points, double scale) {
  if (points.empty()) throw invalid_input("masks", "ellipse prior needs landmarks");
  double cx = 0.0, cy = 0.0;
  for (const auto& p : points) {
    cx += p.x;
    cy += p.y;
  }
  cx /= points.size();
  cy /= points.size();
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    sxx += (p.x - cx) * (p.x - cx);
    syy += (p.y - cy) * (p.y - cy);
    sxy += (p.x - cx) * (p.y - cy);
  }
  sxx /= points.size();
  syy /= points.size();
  sxy /= points.size();
  // Principal axes of the 2x2 covariance.
  const double mid = 0.5 * (sxx + syy);
  const double rad = std::sqrt(0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy);
  const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  const double a = std::max(2.0, scale * std::sqrt(std::max(0.0, mid + rad)));
  const double b = std::max(2.0, scale * std::sqrt(std::max(0.0, mid - rad)));
  const double ca = std::cos(angle), sa = std::sin(angle);
  Image out(grid.height, grid.width, 1);
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = (ca * dx + sa * dy) / a, v = (-sa * dx + ca * dy) / b;
      if (u * u + v * v <= 1.0) out.at(0, y, x) = 1.0;
    }
  }
  return out;
}

SpatialFilter::SpatialFilter(RegionMaskSet masks, std::vector<std::vector<BandFilter>> filters)
    : masks_(std::move(masks)), filters_(std::move(filters)) {
  if (masks_.empty()) throw invalid_input("filter", "spatial filter needs at least one region");
  if (static_cast<int>(filters_.size()) != masks_.size()) {
    throw invalid_input("filter", "one filter set per region required");
  }
  channels_ = static_cast<int>(filters_.front().size());
  if (channels_ < 1 || filters_.front().front().weights.empty()) {
    throw invalid_input("filter", "empty region filter");
  }
  bands_ = static_cast<int>(filters_.front().front().weights.size());
  for (const auto& per_channel : filters_) {
    if (static_cast<int>(per_channel.size()) != channels_) {
      throw invalid_input("filter", "regions disagree on the channel count");
    }
    for (const auto& h : per_channel) {
      if (static_cast<int>(h.weights.size()) != bands_) {
        throw invalid_input("filter", "regions disagree on the band count");
      }
      for (double w : h.weights) {
        if (!std::isfinite(w)) throw invalid_input("filter", "non-finite filter weight");
      }
      if (!std::isfinite(h.mean_weight)) throw invalid_input("filter", "non-finite mean weight");
    }
  }
}

SpatialFilter SpatialFilter::uniform(Grid grid, int channels, const BandFilter& h) {
  return SpatialFilter(RegionMaskSet::whole(grid), {std::vector<BandFilter>(channels, h)});
}

bool SpatialFilter::uniform_in_space(int c) const {
  const BandFilter& first = filters_.front()[c];
  return std::all_of(filters_.begin(), filters_.end(), [&](const auto& per_channel) {
    return per_channel[c].weights == first.weights && per_channel[c].mean_weight == first.mean_weight;
  });
}

std::vector<double> SpatialFilter::blend(int c, const std::vector<double>& per_region) const {
  const std::size_t n = masks_.grid().size();
  if (uniform_in_space(c)) return std::vector<double>(n, per_region.front());
  std::vector<double> out(n, 0.0);
  for (int r = 0; r < masks_.size(); ++r) {
    const double w = per_region[r];
    if (w == 0.0) continue;
    auto m = masks_.masks[r].plane(0);
    for (std::size_t i = 0; i < n; ++i) out[i] += m[i] * w;
  }
  return out;
}

std::vector<double> SpatialFilter::weight_plane(int k, int c) const {
  std::vector<double> w(filters_.size());
  for (std::size_t r = 0; r < filters_.size(); ++r) w[r] = filters_[r][c].weights[k];
  return blend(c, w);
}

std::vector<double> SpatialFilter::mean_weight_plane(int c) const {
  std::vector<double> w(filters_.size());
  for (std::size_t r = 0; r < filters_.size(); ++r) w[r] = filters_[r][c].mean_weight;
  return blend(c, w);
}

SpatialFilter assemble_spatial_filter(const RegionMaskSet& masks,
                                      const std::map<std::string, std::vector<BandFilter>>& per_region,
                                      int channels) {
  std::vector<std::vector<BandFilter>> filters;
  for (const auto& name : masks.names) {
    const auto it = per_region.find(name);
    if (it == per_region.end()) throw invalid_input("filter", "no filter for region '" + name + "'");
    if (it->second.size() == 1) {
      filters.emplace_back(channels, it->second.front());
    } else if (static_cast<int>(it->second.size()) == channels) {
      filters.push_back(it->second);
    } else {
      throw invalid_input("filter", "region '" + name + "' needs 1 or " + std::to_string(channels) +
                                        " channel filters");
    }
  }
  return SpatialFilter(masks, std::move(filters));
}

Image apply_spatial_filter(const SpectralDecomposition& d, const SpatialFilter& h) {
  if (h.grid() != d.grid()) throw invalid_input("filter", "filter and decomposition grids differ");
  if (h.bands() != d.band_count()) throw invalid_input("filter", "band count mismatch");
  if (h.channels() != d.channels) throw invalid_input("filter", "channel count mismatch");
  Image out(d.height, d.width, d.channels, d.color_space);
  for (int c = 0; c < d.channels; ++c) {
    auto dst = out.plane(c);
    const auto mw = h.mean_weight_plane(c);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = mw[i] * d.mean[c];
    for (int k = 0; k < d.band_count(); ++k) {
      const auto w = h.weight_plane(k, c);
      auto src = d.bands[k].plane(c);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w[i] * src[i];
    }
  }
  return out;
}

}  // namespace spectv
