#include <filesystem>

#include "doctest.h"
#include "fixtures.hpp"
#include "spectv/error.hpp"
#include "spectv/formats.hpp"
#include "spectv/image_io.hpp"

using namespace spectv;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("spectv_formats_" + name);
  fs::remove_all(d);
  return d;
}

SpectralDecomposition small_decomposition(int channels) {
  PipelineConfig c;
  c.bands = 5;
  c.solver.max_iter = 2000;
  Image img = testing::natural_like(20, 24, channels, 3);
  if (channels == 3) img.set_color_space(ColorSpace::kRgb);
  return decompose(img, c);
}

std::string replace_line(const std::string& text, const std::string& key, const std::string& line) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    const std::string l = text.substr(pos, end - pos);
    out += (l.rfind(key + "=", 0) == 0 ? line : l) + "\n";
    pos = end == std::string::npos ? text.size() : end + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("band stack round trip is bit-exact") {
  for (int channels : {1, 3}) {
    const auto d = small_decomposition(channels);
    const auto dir = fresh_dir("roundtrip" + std::to_string(channels));
    save_band_stack(dir.string(), d, "iss base=30 ratio=0.6");
    const auto e = load_band_stack(dir.string());
    CHECK(e.variant == d.variant);
    CHECK(e.color_space == d.color_space);
    CHECK(e.height == d.height);
    CHECK(e.width == d.width);
    CHECK(e.channels == d.channels);
    CHECK(e.times == d.times);
    CHECK(e.mean == d.mean);
    REQUIRE(e.band_count() == d.band_count());
    for (int k = 0; k < d.band_count(); ++k) {
      CHECK(e.bands[k].data() == d.bands[k].data());
      CHECK(e.reports[k].converged == d.reports[k].converged);
      CHECK(e.reports[k].iterations == d.reports[k].iterations);
      CHECK(e.reports[k].primal_dual_gap == d.reports[k].primal_dual_gap);
      CHECK(fs::exists(dir / ("band_0" + std::to_string(k + 1) + ".png")));
    }
  }
}

TEST_CASE("manifest carries the documented keys") {
  const auto d = small_decomposition(1);
  const auto dir = fresh_dir("manifest");
  save_band_stack(dir.string(), d, "note");
  const std::string m = read_text_file((dir / "manifest.txt").string());
  for (const char* key : {"format=spectv-bandstack", "version=1", "variant=", "K=5", "height=20", "width=24",
                          "channels=1", "color_space=", "schedule=note", "times=", "mean=", "converged=",
                          "iterations=", "gap="}) {
    CHECK_MESSAGE(m.find(key) != std::string::npos, key);
  }
}

TEST_CASE("band stacks with unknown format or version are rejected") {
  const auto d = small_decomposition(1);
  const auto dir = fresh_dir("reject");
  save_band_stack(dir.string(), d);
  const auto manifest = (dir / "manifest.txt").string();
  const std::string good = read_text_file(manifest);

  write_text_file(manifest, replace_line(good, "version", "version=2"));
  CHECK_THROWS_AS(load_band_stack(dir.string()), Error);
  write_text_file(manifest, replace_line(good, "format", "format=something-else"));
  CHECK_THROWS_AS(load_band_stack(dir.string()), Error);
  write_text_file(manifest, replace_line(good, "K", "K=4"));
  CHECK_THROWS_AS(load_band_stack(dir.string()), Error);
  write_text_file(manifest, good);
  CHECK_NOTHROW(load_band_stack(dir.string()));

  fs::resize_file(dir / "bands.f64", fs::file_size(dir / "bands.f64") - 8);
  try {
    load_band_stack(dir.string());
    FAIL("truncated sidecar accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
  CHECK_THROWS_AS(load_band_stack((dir / "missing").string()), Error);
}

TEST_CASE("band png of a constant image is flat mid-gray") {
  PipelineConfig c;
  c.bands = 3;
  const auto d = decompose(Image(12, 12, 1, ColorSpace::kGray, 0.3), c);
  const auto dir = fresh_dir("flat");
  save_band_stack(dir.string(), d);
  const Image b = load_image(dir / "band_01.png");
  for (double v : b.data()) CHECK(std::abs(v - 128.0 / 255.0) <= 1e-12);
}

TEST_CASE("filter spec text round trip") {
  FilterSpec s = filter_profile("face", 7, 3);
  s.frame2 = FilterFrame::kSource;
  s.omega1 = {0.1, 1.0 / 3.0, 0.7};
  s.rows[0].filter.weights[2] = 1e-17;
  const std::string text = format_filter_spec(s);
  const FilterSpec t = parse_filter_spec(text);
  CHECK(t.bands == s.bands);
  CHECK(t.channels == s.channels);
  CHECK(t.omega1 == s.omega1);
  CHECK(t.omega2 == s.omega2);
  CHECK(t.frame2 == s.frame2);
  REQUIRE(t.rows.size() == s.rows.size());
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    CHECK(t.rows[i].image == s.rows[i].image);
    CHECK(t.rows[i].region == s.rows[i].region);
    CHECK(t.rows[i].channel == s.rows[i].channel);
    CHECK(t.rows[i].filter.weights == s.rows[i].filter.weights);
    CHECK(t.rows[i].filter.mean_weight == s.rows[i].filter.mean_weight);
  }
  CHECK(format_filter_spec(t) == text);

  const auto path = (fs::temp_directory_path() / "spectv_spec_roundtrip.txt").string();
  save_filter_spec(path, s);
  CHECK(format_filter_spec(load_filter_spec(path)) == text);
}

TEST_CASE("filter spec parsing details") {
  const FilterSpec s = parse_filter_spec(
      "# band-pass on band 2\n"
      "version=1\n"
      "\n"
      "K=3\n"
      "channels=3\n"
      "omega1=0.5\n"
      "filter=1,*,*,0,0,1,0\n"
      "filter=2, eyes , 0 ,1,1,1,1\n");
  CHECK(s.omega1 == std::vector<double>{0.5, 0.5, 0.5});
  CHECK(s.omega2 == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(s.frame2 == FilterFrame::kTarget);
  REQUIRE(s.rows.size() == 2);
  CHECK(s.rows[0].channel == -1);
  CHECK(s.rows[1].region == "eyes");
  CHECK(s.rows[1].channel == 0);
  CHECK(s.rows[0].filter.weights == std::vector<double>{0, 1, 0});

  const std::string head = "version=1\nK=2\nchannels=1\n";
  CHECK_THROWS_AS(parse_filter_spec(head + "colour=red\n"), Error);
  CHECK_THROWS_AS(parse_filter_spec(head + "filter=1,*,*,1,1\n"), Error);
  CHECK_THROWS_AS(parse_filter_spec(head + "filter=1,*,*,1,1,1,1\n"), Error);
  CHECK_THROWS_AS(parse_filter_spec(head + "frame2=sideways\n"), Error);
  CHECK_THROWS_AS(parse_filter_spec(head + "filter=3,*,*,1,1,1\n"), Error);
  CHECK_THROWS_AS(parse_filter_spec(head + "filter=1,*,*,1,x,1\n"), Error);
  CHECK_THROWS_AS(parse_filter_spec(head + "omega1=1,1\n"), Error);
  CHECK_THROWS_AS(parse_filter_spec("K=2\nchannels=1\n"), Error);
  CHECK_THROWS_AS(parse_filter_spec("version=9\nK=2\nchannels=1\n"), Error);
  CHECK_THROWS_AS(parse_filter_spec("version=1\nchannels=1\n"), Error);
  CHECK_THROWS_AS(parse_filter_spec(head + "no equals sign\n"), Error);
  try {
    parse_filter_spec(head + "colour=red\n");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidInput);
    CHECK(e.stage() == "filter");
  }
}

TEST_CASE("masks from RGB files are channel averages") {
  Image rgb(4, 5, 3, ColorSpace::kRgb);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 5; ++x) {
      rgb.at(0, y, x) = 0.0;
      rgb.at(1, y, x) = x / 4.0;
      rgb.at(2, y, x) = 1.0;
    }
  }
  const Image m = to_mask(rgb);
  CHECK(m.channels() == 1);
  CHECK(m.at(0, 2, 4) == doctest::Approx(2.0 / 3.0));
  const auto path = fs::temp_directory_path() / "spectv_mask_rgb.png";
  save_image(rgb, path, {16, false});
  CHECK(max_abs_diff(load_mask(path.string()), m) <= 1.0 / 65535);
}
