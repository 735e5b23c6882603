#pragma once

// Deterministic synthetic inputs for the test suites.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "spectv/image.hpp"

namespace spectv::testing {

/// Indicator of a disk of the given radius centered on the grid, scaled by height.
inline Image disk(int n, double radius, double height = 1.0, double cy = -1, double cx = -1) {
  Image img(n, n, 1);
  if (cy < 0) cy = (n - 1) / 2.0;
  if (cx < 0) cx = (n - 1) / 2.0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= radius * radius) img.at(0, y, x) = height;
    }
  }
  return img;
}

/// Disk whose pixels hold the covered area fraction (supersampled ss x ss).
inline Image coverage_disk(int n, double radius, int ss = 16) {
  Image img(n, n, 1);
  const double c = (n - 1) / 2.0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      int inside = 0;
      for (int a = 0; a < ss; ++a) {
        for (int b = 0; b < ss; ++b) {
          const double dy = y - 0.5 + (a + 0.5) / ss - c, dx = x - 0.5 + (b + 0.5) / ss - c;
          if (dy * dy + dx * dx <= radius * radius) ++inside;
        }
      }
      img.at(0, y, x) = static_cast<double>(inside) / (ss * ss);
    }
  }
  return img;
}

inline Image remove_mean(Image img) {
  const auto means = channel_means(img);
  for (int c = 0; c < img.channels(); ++c) {
    for (double& v : img.plane(c)) v -= means[c];
  }
  return img;
}

inline Image random_image(int h, int w, int c, unsigned seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Image img(h, w, c);
  for (double& v : img.data()) v = dist(rng);
  return img;
}

/// Piecewise-smooth scene with edges, shading and multi-octave texture,
/// values in [0,1]. Different seeds give different layouts.
inline Image natural_like(int h, int w, int channels, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Image img(h, w, channels);
  // Base shading.
  std::vector<double> base(channels), gx(channels), gy(channels);
  for (int c = 0; c < channels; ++c) {
    base[c] = 0.3 + 0.3 * u01(rng);
    gx[c] = 0.2 * (u01(rng) - 0.5);
    gy[c] = 0.2 * (u01(rng) - 0.5);
  }
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        img.at(c, y, x) = base[c] + gx[c] * x / w + gy[c] * y / h;
      }
    }
  }
  // Overlapping ellipses and rectangles (objects with sharp edges).
  const int objects = 12;
  for (int k = 0; k < objects; ++k) {
    const double cy = u01(rng) * h, cx = u01(rng) * w;
    const double ry = (0.04 + 0.2 * u01(rng)) * h, rx = (0.04 + 0.2 * u01(rng)) * w;
    const double angle = u01(rng) * std::numbers::pi;
    const bool rect = u01(rng) < 0.35;
    std::vector<double> color(channels);
    for (int c = 0; c < channels; ++c) color[c] = u01(rng);
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dy = y - cy, dx = x - cx;
        const double a = (ca * dx + sa * dy) / rx, b = (-sa * dx + ca * dy) / ry;
        const bool inside = rect ? (std::abs(a) <= 1 && std::abs(b) <= 1) : (a * a + b * b <= 1);
        if (!inside) continue;
        for (int c = 0; c < channels; ++c) {
          // Inner shading so objects are not flat.
          img.at(c, y, x) = 0.75 * color[c] + 0.25 * (1.0 - 0.5 * (a * a + b * b));
        }
      }
    }
  }
  // Texture: a few octaves of random cosines.
  for (int octave = 0; octave < 4; ++octave) {
    const double freq = 0.02 * std::pow(2.3, octave);
    const double amp = 0.05 / (1 + octave);
    for (int k = 0; k < 3; ++k) {
      const double th = u01(rng) * 2 * std::numbers::pi, ph = u01(rng) * 2 * std::numbers::pi;
      const double fx = freq * std::cos(th) * 2 * std::numbers::pi, fy = freq * std::sin(th) * 2 * std::numbers::pi;
      for (int c = 0; c < channels; ++c) {
        const double weight = amp * (0.6 + 0.4 * u01(rng));
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) img.at(c, y, x) += weight * std::cos(fx * x + fy * y + ph);
        }
      }
    }
  }
  // About one gray level of sensor noise, then 8-bit quantization.
  std::normal_distribution<double> noise(0.0, 0.004);
  for (double& v : img.data()) v = std::round(std::clamp(v + noise(rng), 0.0, 1.0) * 255.0) / 255.0;
  return img;
}

}  // namespace spectv::testing
