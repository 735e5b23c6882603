#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "fixtures.hpp"
#include "spectv/formats.hpp"
#include "spectv/image_io.hpp"

using namespace spectv;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "spectv_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(SPECTV_CLI_PATH) + " " + args + " >" + (kWork / "stdout.txt").string() +
                          " 2>" + (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string path(const std::string& name) { return (kWork / name).string(); }

std::string bytes(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Inputs written once as 16-bit PNGs so the CLI and in-process runs read the same values.
struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    Image a = testing::natural_like(24, 28, 3, 71), b = testing::natural_like(24, 28, 3, 72);
    a.set_color_space(ColorSpace::kRgb);
    b.set_color_space(ColorSpace::kRgb);
    save_image(a, kWork / "a.png", {16, false});
    save_image(b, kWork / "b.png", {16, false});
    save_image(testing::natural_like(24, 28, 1, 73), kWork / "g.png", {16, false});
    Image big = testing::natural_like(30, 33, 3, 74);
    big.set_color_space(ColorSpace::kRgb);
    save_image(big, kWork / "big.png", {16, false});
    Image m(24, 28, 1);
    for (int y = 6; y < 18; ++y) {
      for (int x = 8; x < 20; ++x) m.at(0, y, x) = 1.0;
    }
    save_image(m, kWork / "m.png");
    save_landmarks(path("l1.txt"), LandmarkSet{{4, 4, "eye-L"}, {22, 5, "eye-R"}, {13, 19, "mouth"}});
    save_landmarks(path("l2.txt"), LandmarkSet{{5, 3, "eye-L"}, {21, 6, "eye-R"}, {14, 18, "mouth"}});
  }
};

const Workspace& workspace() {
  static Workspace w;
  return w;
}

const std::string kFlags = " -K 5 --tol 1e-4 --max-iter 3000 ";

PipelineConfig flags_config() {
  PipelineConfig c;
  c.bands = 5;
  c.solver.tol = 1e-4;
  c.solver.max_iter = 3000;
  return c;
}

}  // namespace

TEST_CASE("decompose writes the same stack as the library and reconstructs") {
  workspace();
  REQUIRE(run("decompose " + path("a.png") + " -o " + path("stack_a") + kFlags) == 0);
  const auto d = load_band_stack(path("stack_a"));
  const auto e = decompose(load_image(kWork / "a.png"), flags_config());
  REQUIRE(d.band_count() == 5);
  for (int k = 0; k < 5; ++k) CHECK(max_abs_diff(d.bands[k], e.bands[k]) <= 1e-12);
  CHECK(d.mean == e.mean);

  REQUIRE(run("reconstruct " + path("stack_a") + " -o " + path("rec_a.png")) == 0);
  const Image rec = load_image(kWork / "rec_a.png");
  CHECK(max_abs_diff(rec, to_output_space(reconstruct(e))) <= 0.5 / 255 + 1e-9);
}

TEST_CASE("single band stack") {
  workspace();
  REQUIRE(run("decompose " + path("g.png") + " -o " + path("stack_k1") + " -K 1 --tol 1e-4") == 0);
  CHECK(read_text_file(path("stack_k1/manifest.txt")).find("\nK=1\n") != std::string::npos);
  CHECK(load_band_stack(path("stack_k1")).band_count() == 1);
}

TEST_CASE("repeated runs are byte-identical") {
  workspace();
  REQUIRE(run("decompose " + path("g.png") + " -o " + path("det1") + kFlags) == 0);
  REQUIRE(run("decompose " + path("g.png") + " -o " + path("det2") + kFlags) == 0);
  for (const char* f : {"bands.f64", "manifest.txt", "band_01.png", "band_05.png"}) {
    CHECK_MESSAGE(bytes(path(std::string("det1/") + f)) == bytes(path(std::string("det2/") + f)), f);
  }
}

TEST_CASE("filter verb") {
  workspace();
  REQUIRE(run("decompose " + path("g.png") + " -o " + path("stack_g") + kFlags) == 0);
  REQUIRE(run("reconstruct " + path("stack_g") + " -o " + path("rec_g.png")) == 0);
  const auto d = load_band_stack(path("stack_g"));

  write_text_file(path("identity.txt"), format_filter_spec(filter_profile("identity-1", 5, 1)));
  REQUIRE(run("filter " + path("stack_g") + " -s " + path("identity.txt") + " -o " + path("id_g.png")) == 0);
  CHECK(bytes(path("id_g.png")) == bytes(path("rec_g.png")));

  write_text_file(path("mean.txt"), "version=1\nK=5\nchannels=1\nfilter=1,*,*,1,0,0,0,0,0\n");
  REQUIRE(run("filter " + path("stack_g") + " -s " + path("mean.txt") + " -o " + path("mean_g.png")) == 0);
  const Image mean_img = load_image(kWork / "mean_g.png");
  for (double v : mean_img.data()) CHECK(std::abs(v - d.mean[0]) <= 0.5 / 255 + 1e-9);

  write_text_file(path("band2.txt"), "version=1\nK=5\nchannels=1\nfilter=1,*,*,0,0,1,0,0,0\n");
  REQUIRE(run("filter " + path("stack_g") + " -s " + path("band2.txt") + " -o " + path("band2.png") +
              " --offset") == 0);
  Image expected = d.bands[1];
  for (double& v : expected.data()) v = std::clamp(v + 0.5, 0.0, 1.0);
  CHECK(max_abs_diff(load_image(kWork / "band2.png"), expected) <= 0.5 / 255 + 1e-9);

  // Region rows: zero inside the mask, identity outside.
  write_text_file(path("region.txt"),
                  "version=1\nK=5\nchannels=1\nfilter=1,*,*,1,1,1,1,1,1\nfilter=1,hole,*,1,0,0,0,0,0\n");
  REQUIRE(run("filter " + path("stack_g") + " -s " + path("region.txt") + " --mask hole=" + path("m.png") +
              " --feather 0 -o " + path("region.png")) == 0);
  const Image r = load_image(kWork / "region.png"), full = load_image(kWork / "rec_g.png");
  CHECK(std::abs(r.at(0, 12, 14) - d.mean[0]) <= 0.5 / 255 + 1e-9);
  CHECK(r.at(0, 1, 1) == full.at(0, 1, 1));

  CHECK(run("filter " + path("stack_g") + " -s " + path("identity.txt") + " --mask nonsense -o " +
            path("x.png")) == 2);
}

TEST_CASE("fuse with the identity profile matches reconstruct") {
  workspace();
  REQUIRE(run("decompose " + path("a.png") + " -o " + path("stack_a2") + kFlags) == 0);
  REQUIRE(run("reconstruct " + path("stack_a2") + " -o " + path("rec_a2.png")) == 0);
  write_text_file(path("identity3.txt"), format_filter_spec(filter_profile("identity-1", 5, 3)));
  REQUIRE(run("fuse " + path("a.png") + " " + path("b.png") + " -s " + path("identity3.txt") + " -o " +
              path("fuse_id.png") + kFlags) == 0);
  CHECK(bytes(path("fuse_id.png")) == bytes(path("rec_a2.png")));
  REQUIRE(run("fuse " + path("a.png") + " " + path("b.png") + " --profile identity-1 -o " + path("fuse_id2.png") +
              kFlags) == 0);
  CHECK(bytes(path("fuse_id2.png")) == bytes(path("rec_a2.png")));
}

TEST_CASE("fuse presets and diagnostics") {
  workspace();
  REQUIRE(run("fuse " + path("a.png") + " " + path("b.png") + " --preset insertion --mask1 object=" +
              path("m.png") + " --k-lo 3 -o " + path("ins.png") + " --diagnostics " + path("diag") + kFlags) == 0);
  const Image ins = load_image(kWork / "ins.png");
  CHECK(ins.height() == 24);
  CHECK(ins.width() == 28);
  for (const char* f : {"field.bin", "field_magnitude.png", "band_energy.csv", "mask_object.png"}) {
    CHECK_MESSAGE(fs::exists(kWork / "diag" / f), f);
  }
  const auto diag_field = load_field(path("diag/field.bin"));
  for (double v : diag_field.v.x) CHECK(v == 0.0);
  for (double v : diag_field.v.y) CHECK(v == 0.0);

  REQUIRE(run("fuse " + path("a.png") + " " + path("b.png") + " --preset face --landmarks1 " + path("l1.txt") +
              " --landmarks2 " + path("l2.txt") + " -o " + path("face.png") + kFlags) == 0);
  REQUIRE(run("fuse " + path("a.png") + " " + path("big.png") + " --preset style --k-lo 3 --gain 1.5 -o " +
              path("style.png") + kFlags) == 0);
  CHECK(load_image(kWork / "style.png").width() == 28);
  CHECK(run("fuse " + path("a.png") + " " + path("g.png") + " --preset style -o " + path("mixed.png") + kFlags) ==
        2);
}

TEST_CASE("exit codes and no partial output") {
  workspace();
  CHECK(run("fuse " + path("a.png") + " " + path("b.png") + " --preset face -o " + path("noface.png") + kFlags) ==
        2);
  CHECK_FALSE(fs::exists(kWork / "noface.png"));
  CHECK(run("fuse " + path("a.png") + " " + path("b.png") + " --preset insertion -o " + path("noobj.png")) == 2);
  CHECK_FALSE(fs::exists(kWork / "noobj.png"));
  CHECK(run("fuse " + path("a.png") + " " + path("b.png") + " -o " + path("nospec.png")) == 2);
  CHECK(run("decompose " + path("missing.png") + " -o " + path("nowhere")) == 4);
  CHECK(run("decompose " + path("g.png") + " -o " + path("k0") + " -K 0") == 2);
  CHECK(run("decompose " + path("g.png") + " -o " + path("bad") + " --ratio 1.5") == 2);
  CHECK(run("decompose") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("reconstruct " + path("no_stack") + " -o " + path("x.png")) == 4);
  save_landmarks(path("collinear.txt"), LandmarkSet{{1, 1, ""}, {5, 5, ""}, {9, 9, ""}});
  CHECK(run("register --landmarks1 " + path("collinear.txt") + " --landmarks2 " + path("collinear.txt") +
            " --image1 " + path("a.png") + " -o " + path("f.bin")) == 2);
  CHECK(bytes(path("stderr.txt")).find("registration") != std::string::npos);
}

TEST_CASE("register and feather verbs") {
  workspace();
  REQUIRE(run("register --landmarks1 " + path("l1.txt") + " --landmarks2 " + path("l2.txt") + " --image1 " +
              path("a.png") + " -o " + path("field.bin") + " --warp " + path("b.png") + " --warped " +
              path("b_warped.png")) == 0);
  const auto field = load_field(path("field.bin"));
  const auto expected =
      solve_field(load_landmarks(path("l1.txt")), load_landmarks(path("l2.txt")), Grid{24, 28});
  CHECK(field.v.x == expected.v.x);
  CHECK(field.v.y == expected.v.y);
  const Image warped = load_image(kWork / "b_warped.png");
  CHECK(max_abs_diff(warped, warp(load_image(kWork / "b.png"), expected)) <= 0.5 / 255 + 1e-9);

  REQUIRE(run("feather " + path("m.png") + " -r 3 -o " + path("soft.png")) == 0);
  CHECK(max_abs_diff(load_mask(path("soft.png")), feather(load_mask(path("m.png")), 3.0)) <= 0.5 / 255 + 1e-9);
  CHECK(run("feather " + path("m.png") + " -r -1 -o " + path("soft2.png")) == 2);
}
