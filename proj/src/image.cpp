#include "spectv/image.hpp"

#include <algorithm>
#include <cmath>

#include "spectv/error.hpp"

namespace spectv {

std::string to_string(ColorSpace space) {
  switch (space) {
    case ColorSpace::kGray: return "gray";
    case ColorSpace::kRgb: return "rgb";
    case ColorSpace::kLcc: return "lcc";
  }
  return "gray";
}

ColorSpace color_space_from_string(const std::string& name) {
  if (name == "gray") return ColorSpace::kGray;
  if (name == "rgb") return ColorSpace::kRgb;
  if (name == "lcc") return ColorSpace::kLcc;
  throw invalid_input("image", "unknown color space '" + name + "'");
}

Image::Image(int height, int width, int channels, double fill)
    : Image(height, width, channels,
            channels == 3 ? ColorSpace::kRgb : ColorSpace::kGray, fill) {}

Image::Image(int height, int width, int channels, ColorSpace space, double fill)
    : height_(height), width_(width), channels_(channels), space_(space) {
  if (height < 0 || width < 0 || channels < 0) {
    throw invalid_input("image", "negative image dimensions");
  }
  if (space == ColorSpace::kLcc && channels != 3) {
    throw invalid_input("image", "LCC images need exactly 3 channels");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

void Image::set_color_space(ColorSpace space) {
  if (space == ColorSpace::kLcc && channels_ != 3) {
    throw invalid_input("image", "LCC images need exactly 3 channels");
  }
  space_ = space;
}

Image Image::channel(int c) const {
  Image out(height_, width_, 1, ColorSpace::kGray);
  auto src = plane(c);
  std::copy(src.begin(), src.end(), out.data_.begin());
  return out;
}

void Image::set_channel(int c, const Image& single) {
  if (single.height_ != height_ || single.width_ != width_ || single.channels_ != 1) {
    throw invalid_input("image", "channel shape mismatch");
  }
  std::copy(single.data_.begin(), single.data_.end(), plane(c).begin());
}

bool Image::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Image& Image::operator+=(const Image& other) {
  if (!same_shape(other)) throw invalid_input("image", "shape mismatch in +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Image& Image::operator-=(const Image& other) {
  if (!same_shape(other)) throw invalid_input("image", "shape mismatch in -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Image& Image::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Image operator+(Image a, const Image& b) { return a += b; }
Image operator-(Image a, const Image& b) { return a -= b; }
Image operator*(double s, Image a) { return a *= s; }

double l2_norm(const Image& img) {
  double sum = 0.0;
  for (double v : img.data()) sum += v * v;
  return std::sqrt(sum);
}

double max_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw invalid_input("image", "shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  }
  return m;
}

double relative_l2_error(const Image& a, const Image& b) {
  const double denom = l2_norm(b);
  const double num = l2_norm(a - b);
  return denom > 0.0 ? num / denom : num;
}

std::vector<double> channel_means(const Image& img) {
  std::vector<double> means(img.channels(), 0.0);
  if (img.plane_size() == 0) return means;
  // Shifted by the first pixel so a constant plane gives back its value exactly.
  for (int c = 0; c < img.channels(); ++c) {
    const auto plane = img.plane(c);
    const double shift = plane[0];
    double sum = 0.0;
    for (double v : plane) sum += v - shift;
    means[c] = shift + sum / static_cast<double>(img.plane_size());
  }
  return means;
}

Image rgb_to_lcc(const Image& rgb) {
  if (rgb.channels() != 3) {
    throw invalid_input("color", "rgb_to_lcc needs a 3-channel image");
  }
  Image out(rgb.height(), rgb.width(), 3, ColorSpace::kLcc);
  auto r = rgb.plane(0), g = rgb.plane(1), b = rgb.plane(2);
  auto l = out.plane(0), cgm = out.plane(1), crb = out.plane(2);
  for (std::size_t i = 0; i < rgb.plane_size(); ++i) {
    l[i] = (r[i] + 2.0 * g[i] + b[i]) / 4.0;
    cgm[i] = (-r[i] + 2.0 * g[i] - b[i]) / 4.0;
    crb[i] = (r[i] - b[i]) / 2.0;
  }
  return out;
}

Image lcc_to_rgb(const Image& lcc) {
  if (lcc.channels() != 3) {
    throw invalid_input("color", "lcc_to_rgb needs a 3-channel image");
  }
  Image out(lcc.height(), lcc.width(), 3, ColorSpace::kRgb);
  auto l = lcc.plane(0), cgm = lcc.plane(1), crb = lcc.plane(2);
  auto r = out.plane(0), g = out.plane(1), b = out.plane(2);
  for (std::size_t i = 0; i < lcc.plane_size(); ++i) {
    // L - Cgm = (R+B)/2 and Crb = (R-B)/2.
    const double half_sum = l[i] - cgm[i];
    r[i] = half_sum + crb[i];
    b[i] = half_sum - crb[i];
    g[i] = l[i] + cgm[i];
  }
  return out;
}

Image to_display(const Image& img) {
  if (img.color_space() == ColorSpace::kLcc) return lcc_to_rgb(img);
  return img;
}

namespace {

// weights[o] = list of (source index, weight) covering output cell o.
std::vector<std::vector<std::pair<int, double>>> area_weights(int in, int out) {
  std::vector<std::vector<std::pair<int, double>>> w(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double lo = o * scale;
    const double hi = (o + 1) * scale;
    for (int i = static_cast<int>(std::floor(lo)); i < std::min(in, static_cast<int>(std::ceil(hi))); ++i) {
      const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      if (overlap > 0.0) w[o].emplace_back(i, overlap / scale);
    }
  }
  return w;
}

}  // namespace

Image resample_area(const Image& img, int height, int width) {
  if (height <= 0 || width <= 0) throw invalid_input("image", "resample to empty size");
  if (height == img.height() && width == img.width()) return img;
  const auto wy = area_weights(img.height(), height);
  const auto wx = area_weights(img.width(), width);
  Image out(height, width, img.channels(), img.color_space());
  std::vector<double> rows(static_cast<std::size_t>(height) * img.width());
  for (int c = 0; c < img.channels(); ++c) {
    auto src = img.plane(c);
    std::fill(rows.begin(), rows.end(), 0.0);
    for (int y = 0; y < height; ++y) {
      for (auto [sy, w] : wy[y]) {
        for (int x = 0; x < img.width(); ++x) {
          rows[static_cast<std::size_t>(y) * img.width() + x] += w * src[static_cast<std::size_t>(sy) * img.width() + x];
        }
      }
    }
    auto dst = out.plane(c);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double v = 0.0;
        for (auto [sx, w] : wx[x]) v += w * rows[static_cast<std::size_t>(y) * img.width() + sx];
        dst[static_cast<std::size_t>(y) * width + x] = v;
      }
    }
  }
  return out;
}

Image downscale_to(const Image& img, int max_side) {
  const int longest = std::max(img.height(), img.width());
  if (max_side <= 0 || longest <= max_side) return img;
  const double s = static_cast<double>(max_side) / longest;
  const int h = std::max(1, static_cast<int>(std::lround(img.height() * s)));
  const int w = std::max(1, static_cast<int>(std::lround(img.width() * s)));
  return resample_area(img, h, w);
}

}  // namespace spectv
