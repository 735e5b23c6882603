#include "doctest.h"
#include "fixtures.hpp"
#include "spectv/error.hpp"
#include "spectv/image.hpp"

using namespace spectv;

TEST_CASE("planar layout and arithmetic") {
  Image a(2, 3, 2, 1.0);
  a.at(1, 1, 2) = 5.0;
  CHECK(a.data()[1 * 6 + 1 * 3 + 2] == 5.0);
  CHECK(a.plane(1)[5] == 5.0);
  Image b = a + a;
  CHECK(b.at(1, 1, 2) == 10.0);
  b -= a;
  CHECK(max_abs_diff(a, b) == 0.0);
  CHECK(l2_norm(Image(2, 2, 1, 1.0)) == doctest::Approx(2.0));
}

TEST_CASE("channel means and extraction") {
  Image a(2, 2, 2);
  a.plane(0)[0] = 4.0;
  a.plane(1)[3] = 8.0;
  const auto m = channel_means(a);
  CHECK(m[0] == 1.0);
  CHECK(m[1] == 2.0);
  Image c = a.channel(1);
  CHECK(c.channels() == 1);
  CHECK(c.at(0, 1, 1) == 8.0);
}

TEST_CASE("LCC round trip is exact up to rounding") {
  Image rgb = testing::random_image(5, 7, 3, 3, 0.0, 1.0);
  rgb.set_color_space(ColorSpace::kRgb);
  const Image lcc = rgb_to_lcc(rgb);
  CHECK(lcc.color_space() == ColorSpace::kLcc);
  // Gray pixels have no chrominance.
  Image gray(1, 1, 3, ColorSpace::kRgb, 0.4);
  const Image g = rgb_to_lcc(gray);
  CHECK(g.at(0, 0, 0) == doctest::Approx(0.4));
  CHECK(std::abs(g.at(1, 0, 0)) < 1e-15);
  CHECK(std::abs(g.at(2, 0, 0)) < 1e-15);
  CHECK(max_abs_diff(lcc_to_rgb(lcc), rgb) < 1e-14);
  CHECK_THROWS_AS(rgb_to_lcc(Image(2, 2, 1)), Error);
}

TEST_CASE("area resampling preserves the mean") {
  const Image img = testing::random_image(30, 20, 1, 9);
  const Image small = resample_area(img, 12, 8);
  CHECK(small.height() == 12);
  CHECK(channel_means(small)[0] == doctest::Approx(channel_means(img)[0]).epsilon(1e-12));
  const Image half = downscale_to(img, 15);
  CHECK(half.height() == 15);
  CHECK(half.width() == 10);
  CHECK(max_abs_diff(downscale_to(img, 64), img) == 0.0);
}

TEST_CASE("finiteness check") {
  Image a(2, 2, 1);
  CHECK(a.all_finite());
  a.at(0, 1, 1) = std::nan("");
  CHECK_FALSE(a.all_finite());
}
