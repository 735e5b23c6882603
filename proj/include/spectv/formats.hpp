#pragma once

#include <string>

#include "spectv/fusion.hpp"
#include "spectv/spectral.hpp"

namespace spectv {

constexpr int kBandStackVersion = 1;
constexpr int kFilterSpecVersion = 1;

/// Band-stack directory: manifest.txt (key=value), band_01.png .. band_KK.png
/// (offset-encoded, for viewing) and bands.f64 (exact values, what the loader reads).
/// `schedule` is a free-form description of the parameters that produced it.
void save_band_stack(const std::string& dir, const SpectralDecomposition& d,
                     const std::string& schedule = "", int png_bit_depth = 8);
/// Rejects unknown formats and versions.
SpectralDecomposition load_band_stack(const std::string& dir);

/// Band k (0-based) mapped linearly to RGB (or gray), still signed. Save it
/// with SaveOptions::offset to view it.
Image band_visual(const SpectralDecomposition& d, int k);

/// Filter-spec text:
///   version=1
///   K=15
///   channels=3
///   omega1=1,1,1
///   omega2=0,0,0
///   frame2=target            (or source)
///   filter=<image>,<region|*>,<channel|*>,<mean weight>,<w1>,...,<wK>
/// Blank lines and '#' comments are ignored; a single omega value applies to every channel.
FilterSpec parse_filter_spec(const std::string& text);
std::string format_filter_spec(const FilterSpec& spec);
FilterSpec load_filter_spec(const std::string& path);
void save_filter_spec(const std::string& path, const FilterSpec& spec);

/// Grayscale mask file; RGB files are averaged over channels.
Image load_mask(const std::string& path);
Image to_mask(const Image& img);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace spectv
