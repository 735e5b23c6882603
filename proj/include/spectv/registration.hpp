#pragma once

#include <string>
#include <vector>

#include "spectv/grid_calculus.hpp"
#include "spectv/image.hpp"
#include "spectv/spectral.hpp"

namespace spectv {

struct Landmark {
  double x = 0.0;  // column, pixel centers at integers
  double y = 0.0;  // row
  std::string label;
};

using LandmarkSet = std::vector<Landmark>;

/// Displacement v mapping an image-1 pixel x to the image-2 location x + v(x).
struct RegistrationField {
  VectorField2 v;
  /// Several landmarks rounded to the same pixel; their values were averaged.
  bool merged_duplicates = false;
  LaplaceReport report_x;
  LaplaceReport report_y;

  Grid grid() const { return v.grid(); }
  static RegistrationField identity(Grid grid);
};

/// The checks solve_field runs before solving; throws invalid_input("registration").
void validate_landmarks(const LandmarkSet& src, const LandmarkSet& dst, Grid grid);
/// Dirichlet-minimal field with v(src_i) = dst_i - src_i at the pixels nearest
/// to src_i. Needs matched, equally long sets of at least 3 non-collinear
/// points inside the grid.
RegistrationField solve_field(const LandmarkSet& src, const LandmarkSet& dst, Grid grid,
                              const LaplaceOptions& opts = {});

/// Pullback: out(x) = img(x + v(x)) by bilinear sampling with edge clamping.
/// The output lives on the field's grid; img may have any size.
Image warp(const Image& img, const RegistrationField& field);
/// Warps every band. Means are untouched since warping preserves constants.
SpectralDecomposition warp_decomposition(const SpectralDecomposition& d,
                                         const RegistrationField& field);

/// Text format: one "x y [label]" per line, '#' starts a comment.
LandmarkSet parse_landmarks(const std::string& text);
std::string format_landmarks(const LandmarkSet& points);
LandmarkSet load_landmarks(const std::string& path);
void save_landmarks(const std::string& path, const LandmarkSet& points);
/// Maps coordinates from a grid of size `from` to one of size `to` (pixel-center aligned).
LandmarkSet rescale_landmarks(const LandmarkSet& points, Grid from, Grid to);

/// Binary sidecar: "SPFD", int32 height, int32 width, then the x and y planes as float64.
void save_field(const std::string& path, const RegistrationField& field);
RegistrationField load_field(const std::string& path);

}  // namespace spectv
