#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace spectv {

enum class ColorSpace { kGray, kRgb, kLcc };

std::string to_string(ColorSpace space);
ColorSpace color_space_from_string(const std::string& name);

struct Grid {
  int height = 0;
  int width = 0;

  std::size_t size() const { return static_cast<std::size_t>(height) * width; }
  bool operator==(const Grid&) const = default;
};

/// H x W x C grid of doubles stored channel-planar, each plane row-major.
/// Values are nominally in [0,1] at I/O boundaries but signed internally.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);
  Image(int height, int width, int channels, ColorSpace space, double fill = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  Grid grid() const { return {height_, width_}; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const { return data_.empty(); }

  ColorSpace color_space() const { return space_; }
  void set_color_space(ColorSpace space);

  std::span<double> plane(int c) {
    return {data_.data() + c * plane_size(), plane_size()};
  }
  std::span<const double> plane(int c) const {
    return {data_.data() + c * plane_size(), plane_size()};
  }

  double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  /// Copies channel c into a new single-channel image.
  Image channel(int c) const;
  void set_channel(int c, const Image& single);

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  bool all_finite() const;

  Image& operator+=(const Image& other);
  Image& operator-=(const Image& other);
  Image& operator*=(double s);

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  ColorSpace space_ = ColorSpace::kGray;
  std::vector<double> data_;
};

Image operator+(Image a, const Image& b);
Image operator-(Image a, const Image& b);
Image operator*(double s, Image a);

double l2_norm(const Image& img);
double max_abs_diff(const Image& a, const Image& b);
/// ||a - b||_2 / ||b||_2.
double relative_l2_error(const Image& a, const Image& b);
std::vector<double> channel_means(const Image& img);

/// L = (R+2G+B)/4, C_gm = (-R+2G-B)/4, C_rb = (R-B)/2.
Image rgb_to_lcc(const Image& rgb);
Image lcc_to_rgb(const Image& lcc);
/// Maps LCC or RGB to RGB, passes gray through.
Image to_display(const Image& img);

/// Area-averaging resample to the requested size.
Image resample_area(const Image& img, int height, int width);
/// Scales so the longer side is at most max_side; returns a copy if already small.
Image downscale_to(const Image& img, int max_side);

}  // namespace spectv
