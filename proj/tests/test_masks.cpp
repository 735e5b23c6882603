#include "doctest.h"
#include "fixtures.hpp"
#include "spectv/error.hpp"
#include "spectv/masks.hpp"

using namespace spectv;

namespace {

// Left half (columns < w/2) set to one.
Image half_plane(int h, int w) {
  Image m(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w / 2; ++x) m.at(0, y, x) = 1.0;
  }
  return m;
}

Image complement(const Image& m) {
  Image c = m;
  for (double& v : c.data()) v = 1.0 - v;
  return c;
}

BandFilter ramp_filter(int k, double lo, double hi, double mean) {
  BandFilter h;
  for (int i = 0; i < k; ++i) h.weights.push_back(lo + (hi - lo) * i / (k - 1));
  h.mean_weight = mean;
  return h;
}

}  // namespace

TEST_CASE("feather radius zero and all-ones masks") {
  const Image m = half_plane(10, 12);
  CHECK(max_abs_diff(feather(m, 0.0), m) == 0.0);
  const Image ones(15, 9, 1, 1.0);
  for (double r : {1.0, 4.0, 12.0}) {
    const Image f = feather(ones, r);
    for (double v : f.data()) CHECK(v == 1.0);
  }
}

TEST_CASE("half-plane feathered at radius 8 is one half at the edge") {
  // The original edge runs between columns w/2-1 and w/2; its value is the
  // mean of the two adjacent pixels.
  const int w = 64;
  const Image f = feather(half_plane(32, w), 8.0);
  for (int y = 0; y < 32; ++y) {
    const double edge = 0.5 * (f.at(0, y, w / 2 - 1) + f.at(0, y, w / 2));
    CHECK(std::abs(edge - 0.5) <= 0.02);
    for (int x = 1; x < w; ++x) CHECK(f.at(0, y, x) <= f.at(0, y, x - 1));
  }
  for (double v : f.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("feathering stays in the unit interval for any radius") {
  const Image m = testing::disk(40, 9.0);
  for (double r : {0.5, 2.0, 7.0, 30.0}) {
    const Image f = feather(m, r);
    for (double v : f.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK_THROWS_AS(feather(m, -1.0), Error);
}

TEST_CASE("partition of unity") {
  RegionMaskSet set;
  set.add("a", feather(testing::disk(30, 8.0, 1.0, 10, 10), 4.0));
  set.add("b", feather(testing::disk(30, 8.0, 1.0, 16, 16), 4.0));
  const RegionMaskSet p = normalize_partition(set);
  REQUIRE(p.index_of("background") >= 0);
  for (std::size_t i = 0; i < p.grid().size(); ++i) {
    double sum = 0.0;
    for (const Image& m : p.masks) {
      CHECK(m.data()[i] >= 0.0);
      CHECK(m.data()[i] <= 1.0);
      sum += m.data()[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
}

TEST_CASE("prepare_masks feathers and normalizes") {
  RegionMaskSet raw;
  // sigma 3, kernel half-width 9: the 19x19 support around the center lies
  // inside the radius-14 disk and the corner is far outside it.
  raw.add("object", testing::disk(48, 14.0));
  const RegionMaskSet p = prepare_masks(raw, 6.0);
  CHECK(p.size() == 2);
  const Image& obj = p.masks[p.index_of("object")];
  CHECK(obj.at(0, 24, 24) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(obj.at(0, 0, 0) == 0.0);
  CHECK(p.masks[p.index_of("background")].at(0, 0, 0) == 1.0);
}

TEST_CASE("mask set validation") {
  RegionMaskSet s;
  s.add("a", Image(4, 4, 1));
  CHECK_THROWS_AS(s.add("a", Image(4, 4, 1)), Error);
  CHECK_THROWS_AS(s.add("b", Image(4, 5, 1)), Error);
  Image bad(4, 4, 1);
  bad.at(0, 1, 1) = std::nan("");
  CHECK_THROWS_AS(s.add("c", bad), Error);
  CHECK(s.index_of("zzz") == -1);
}

TEST_CASE("single region gives the plain filter") {
  const int K = 6;
  const BandFilter h = ramp_filter(K, 0.2, 1.4, 0.7);
  const SpatialFilter sf = assemble_spatial_filter(RegionMaskSet::whole({8, 9}), {{"background", {h}}}, 2);
  CHECK(sf.bands() == K);
  CHECK(sf.channels() == 2);
  for (int c = 0; c < 2; ++c) {
    CHECK(sf.uniform_in_space(c));
    for (int k = 0; k < K; ++k) {
      for (double v : sf.weight_plane(k, c)) CHECK(v == h.weights[k]);
    }
    for (double v : sf.mean_weight_plane(c)) CHECK(v == 0.7);
  }
}

TEST_CASE("two half-planes blend their filters") {
  const int K = 5, w = 64;
  const BandFilter ha = ramp_filter(K, 0.0, 1.0, 1.0), hb = ramp_filter(K, 2.0, -1.0, 0.0);
  RegionMaskSet raw;
  raw.add("a", half_plane(16, w));
  raw.add("b", complement(half_plane(16, w)));
  const RegionMaskSet masks = prepare_masks(raw, 8.0);
  const SpatialFilter sf = assemble_spatial_filter(masks, {{"a", {ha}}, {"b", {hb}}, {"background", {ha}}}, 1);
  for (int k = 0; k < K; ++k) {
    const auto plane = sf.weight_plane(k, 0);
    CHECK(plane[8 * w + 0] == doctest::Approx(ha.weights[k]).epsilon(1e-9));
    CHECK(plane[8 * w + w - 1] == doctest::Approx(hb.weights[k]).epsilon(1e-9));
    const double mid = 0.5 * (plane[8 * w + w / 2 - 1] + plane[8 * w + w / 2]);
    CHECK(mid == doctest::Approx(0.5 * (ha.weights[k] + hb.weights[k])).epsilon(1e-9));
    // Convex combination everywhere.
    const double lo = std::min(ha.weights[k], hb.weights[k]), hi = std::max(ha.weights[k], hb.weights[k]);
    for (double v : plane) {
      CHECK(v >= lo - 1e-12);
      CHECK(v <= hi + 1e-12);
    }
  }
}

TEST_CASE("filter blending is Lipschitz in x with the mask gradients") {
  const int K = 4;
  const BandFilter ha = ramp_filter(K, 0.0, 1.0, 1.0), hb = ramp_filter(K, 3.0, -2.0, 0.0);
  RegionMaskSet raw;
  raw.add("eye", testing::disk(40, 7.0, 1.0, 15, 18));
  const RegionMaskSet masks = prepare_masks(raw, 6.0);
  const SpatialFilter sf = assemble_spatial_filter(masks, {{"eye", {ha}}, {"background", {hb}}}, 1);
  // |H(x) - H(y)| <= sum_r |m_r(x) - m_r(y)| |h_r| along each axis step.
  for (int k = 0; k < K; ++k) {
    const auto plane = sf.weight_plane(k, 0);
    const double hmax = std::max(std::abs(ha.weights[k]), std::abs(hb.weights[k]));
    for (int y = 0; y < 40; ++y) {
      for (int x = 0; x + 1 < 40; ++x) {
        const int i = y * 40 + x;
        double bound = 0.0;
        for (const Image& m : masks.masks) bound += std::abs(m.data()[i + 1] - m.data()[i]) * hmax;
        CHECK(std::abs(plane[i + 1] - plane[i]) <= bound + 1e-12);
      }
    }
  }
}

TEST_CASE("identical filters ignore the masks") {
  const int K = 3;
  const BandFilter h = ramp_filter(K, 1.0, 0.5, 0.2);
  RegionMaskSet raw;
  raw.add("x", testing::disk(20, 5.0));
  const RegionMaskSet masks = prepare_masks(raw, 3.0);
  const SpatialFilter sf = assemble_spatial_filter(masks, {{"x", {h}}, {"background", {h}}}, 1);
  for (int k = 0; k < K; ++k) {
    for (double v : sf.weight_plane(k, 0)) CHECK(v == doctest::Approx(h.weights[k]).epsilon(1e-14));
  }
}

TEST_CASE("missing or inconsistent region filters") {
  RegionMaskSet raw;
  raw.add("x", testing::disk(20, 5.0));
  const RegionMaskSet masks = prepare_masks(raw, 3.0);
  CHECK_THROWS_AS(assemble_spatial_filter(masks, {{"x", {BandFilter::identity(3)}}}, 1), Error);
  CHECK_THROWS_AS(
      assemble_spatial_filter(masks, {{"x", {BandFilter::identity(3)}}, {"background", {BandFilter::identity(4)}}}, 1),
      Error);
}

TEST_CASE("spatial filtering with one region equals the plain filter") {
  SpectralDecomposition d;
  d.height = 8;
  d.width = 8;
  d.channels = 1;
  d.mean = {0.4};
  for (int k = 0; k < 3; ++k) d.bands.push_back(testing::random_image(8, 8, 1, k));
  d.times = {3, 2, 1};
  d.reports.resize(3);
  const BandFilter h = ramp_filter(3, 0.5, 2.0, 0.3);
  const Image a = apply_spatial_filter(d, SpatialFilter::uniform(d.grid(), 1, h));
  CHECK(max_abs_diff(a, apply_filter(d, h)) <= 1e-15);
}

TEST_CASE("ellipse prior covers its landmarks") {
  const LandmarkSet pts{{10, 10, ""}, {20, 12, ""}, {15, 16, ""}};
  const Image e = ellipse_mask({32, 32}, pts);
  for (const auto& p : pts) CHECK(e.at(0, static_cast<int>(p.y), static_cast<int>(p.x)) == 1.0);
  CHECK(e.at(0, 0, 31) == 0.0);
}
