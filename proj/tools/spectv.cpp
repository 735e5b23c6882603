// spectv: command-line front end for decomposition, filtering and fusion.
//
// Exit codes: 0 success, 2 usage or invalid input, 3 numerical failure, 4 I/O failure.

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "spectv/error.hpp"
#include "spectv/formats.hpp"
#include "spectv/fusion.hpp"
#include "spectv/image_io.hpp"
#include "spectv/registration.hpp"

namespace fs = std::filesystem;
using namespace spectv;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct PipelineFlags {
  std::string variant = "iss";
  std::string color = "lcc";
  PipelineConfig config;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f) {
  cmd->add_option("--variant", f.variant, "Flow variant")->check(CLI::IsMember({"iss", "gf"}));
  cmd->add_option("-K,--bands", f.config.bands, "Number of bands");
  cmd->add_option("--base", f.config.base, "1/tau of the first Bregman step");
  cmd->add_option("--ratio", f.config.ratio, "Geometric ratio of 1/tau between steps");
  cmd->add_option("--tol", f.config.solver.tol, "Normalized primal-dual gap tolerance");
  cmd->add_option("--max-iter", f.config.solver.max_iter, "Iteration cap per inner solve");
  cmd->add_option("--gf-steps", f.config.gf_steps, "Implicit steps of the gradient flow");
  cmd->add_option("--t-max", f.config.gf_t_max, "Gradient flow end time (0: automatic)");
  cmd->add_option("--color", f.color, "Working color space for RGB input")
      ->check(CLI::IsMember({"lcc", "rgb"}));
  cmd->add_option("--feather", f.config.feather_radius, "Mask feather radius in pixels");
  cmd->add_option("--max-side", f.config.max_side, "Downscale so the long side is at most this (0: off)");
}

PipelineConfig finish(PipelineFlags& f) {
  f.config.variant = flow_variant_from_string(f.variant);
  f.config.color_space = color_space_from_string(f.color);
  f.config.validate();
  return f.config;
}

std::string schedule_text(const PipelineConfig& c) {
  char buf[160];
  if (c.variant == FlowVariant::kInverseScaleSpace) {
    std::snprintf(buf, sizeof buf, "base:%.17g;ratio:%.17g;tol:%.17g;max_iter:%d", c.base, c.ratio,
                  c.solver.tol, c.solver.max_iter);
  } else {
    std::snprintf(buf, sizeof buf, "steps:%d;t_max:%.17g;tol:%.17g;max_iter:%d", c.gf_steps, c.gf_t_max,
                  c.solver.tol, c.solver.max_iter);
  }
  return buf;
}

ProgressFn progress_printer(bool verbose, const std::string& what) {
  if (!verbose) return {};
  return [what](int done, int total) { std::fprintf(stderr, "%s: %d/%d\n", what.c_str(), done, total); };
}

// "name=path" pairs into a mask set.
RegionMaskSet load_masks(const std::vector<std::string>& pairs) {
  RegionMaskSet set;
  for (const auto& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorKind::kUsage, "masks", "mask arguments take the form region=path, got '" + p + "'");
    }
    set.add(p.substr(0, eq), load_mask(p.substr(eq + 1)));
  }
  return set;
}

void require_finite(const Image& img, const std::string& stage) {
  if (!img.all_finite()) throw Error(ErrorKind::kNumerical, stage, "result contains non-finite values");
}

void write_diagnostics(const std::string& dir, const PreparedFusion& p, const Image& fused) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create " + dir);
  save_field((fs::path(dir) / "field.bin").string(), p.field);
  // Displacement magnitude, scaled to the largest displacement.
  const Grid g = p.field.grid();
  Image mag(g.height, g.width, 1);
  double peak = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    mag.data()[i] = std::hypot(p.field.v.x[i], p.field.v.y[i]);
    peak = std::max(peak, mag.data()[i]);
  }
  if (peak > 0.0) mag *= 1.0 / peak;
  save_image(mag, fs::path(dir) / "field_magnitude.png");
  // Each region drawn over the output's luminance.
  const Image gray_src = fused.channels() == 3 ? rgb_to_lcc(fused).channel(0) : fused;
  for (int r = 0; r < p.masks1.size(); ++r) {
    Image overlay(g.height, g.width, 3);
    auto m = p.masks1.masks[r].plane(0);
    auto l = gray_src.plane(0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      overlay.plane(0)[i] = 0.5 * l[i] + 0.5 * m[i];
      overlay.plane(1)[i] = 0.5 * l[i];
      overlay.plane(2)[i] = 0.5 * l[i];
    }
    save_image(overlay, fs::path(dir) / ("mask_" + p.masks1.names[r] + ".png"));
  }
  const auto m1 = band_masses(*p.d1), m2 = band_masses(*p.d2);
  std::string table = "band,time,energy1,energy2\n";
  char line[160];
  for (int k = 0; k < p.d1->band_count(); ++k) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g\n", k + 1, p.d1->times[k], m1[k], m2[k]);
    table += line;
  }
  write_text_file((fs::path(dir) / "band_energy.csv").string(), table);
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kUsage:
    case ErrorKind::kInvalidInput:
      return kExitUsage;
    case ErrorKind::kNumerical:
      return kExitNumerical;
    case ErrorKind::kIo:
      return kExitIo;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("SPECTV_THREADS")) {
    const int n = std::atoi(threads);
    if (n > 0) omp_set_num_threads(n);
  }

  CLI::App app{"Nonlinear spectral TV decomposition, filtering and image fusion"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Print progress to stderr");

  // decompose
  auto* dec = app.add_subcommand("decompose", "Decompose an image into a band-stack directory");
  std::string dec_in, dec_out;
  int png_depth = 8;
  PipelineFlags dec_flags;
  dec->add_option("input", dec_in, "Input image")->required();
  dec->add_option("-o,--out", dec_out, "Output directory")->required();
  dec->add_option("--png-depth", png_depth, "Bit depth of the band previews")->check(CLI::IsMember({8, 16}));
  add_pipeline_flags(dec, dec_flags);

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "Sum a band stack back into an image");
  std::string rec_stack, rec_out;
  rec->add_option("stack", rec_stack, "Band-stack directory")->required();
  rec->add_option("-o,--out", rec_out, "Output image")->required();

  // filter
  auto* fil = app.add_subcommand("filter", "Apply a filter spec to a band stack");
  std::string fil_stack, fil_spec, fil_out;
  int fil_image = 1;
  bool fil_offset = false;
  std::vector<std::string> fil_masks;
  double fil_feather = 8.0;
  fil->add_option("stack", fil_stack, "Band-stack directory")->required();
  fil->add_option("-s,--spec", fil_spec, "Filter-spec file")->required();
  fil->add_option("-o,--out", fil_out, "Output image")->required();
  fil->add_option("--image", fil_image, "Which image's filter-spec rows to use")->check(CLI::IsMember({1, 2}));
  fil->add_option("--mask", fil_masks, "Region mask as region=path (repeatable)");
  fil->add_option("--feather", fil_feather, "Mask feather radius in pixels");
  fil->add_flag("--offset", fil_offset, "Store v + 0.5 (for band-pass output)");

  // fuse
  auto* fus = app.add_subcommand("fuse", "Fuse two images");
  std::string img1, img2, fus_out, fus_spec, lm1, lm2, preset = "custom", profile, diag_dir;
  std::vector<std::string> masks1, masks2;
  int k_lo = 0;
  double gain = 1.0;
  PipelineFlags fus_flags;
  fus->add_option("image1", img1, "Target image (defines the output frame)")->required();
  fus->add_option("image2", img2, "Source image")->required();
  fus->add_option("-o,--out", fus_out, "Output image")->required();
  fus->add_option("--preset", preset, "Workflow")->check(CLI::IsMember({"custom", "face", "insertion", "style"}));
  fus->add_option("-s,--spec", fus_spec, "Filter-spec file (overrides the preset's profile)");
  fus->add_option("--profile", profile, "Named profile for the preset");
  fus->add_option("--landmarks1", lm1, "Landmarks on image 1");
  fus->add_option("--landmarks2", lm2, "Landmarks on image 2");
  fus->add_option("--mask1", masks1, "Region mask on image 1 as region=path (repeatable)");
  fus->add_option("--mask2", masks2, "Region mask on image 2 as region=path (repeatable)");
  fus->add_option("--k-lo", k_lo, "First band taken from image 2 (insertion, style)");
  fus->add_option("--gain", gain, "Weight of image 2's bands (style)");
  fus->add_option("--diagnostics", diag_dir, "Directory for field, mask overlays and band energies");
  add_pipeline_flags(fus, fus_flags);

  // register
  auto* reg = app.add_subcommand("register", "Solve the Dirichlet-minimal displacement field");
  std::string reg_lm1, reg_lm2, reg_ref, reg_out, reg_warp, reg_warped;
  reg->add_option("--landmarks1", reg_lm1, "Landmarks on image 1")->required();
  reg->add_option("--landmarks2", reg_lm2, "Landmarks on image 2")->required();
  reg->add_option("--image1", reg_ref, "Image 1 (defines the grid)")->required();
  reg->add_option("-o,--out", reg_out, "Field file")->required();
  reg->add_option("--warp", reg_warp, "Image 2 to pull back onto image 1's grid");
  reg->add_option("--warped", reg_warped, "Where to write the warped image");

  // feather
  auto* fea = app.add_subcommand("feather", "Soften a binary mask");
  std::string fea_in, fea_out;
  double fea_radius = 8.0;
  fea->add_option("mask", fea_in, "Mask image")->required();
  fea->add_option("-r,--radius", fea_radius, "Feather radius in pixels")->required();
  fea->add_option("-o,--out", fea_out, "Output mask")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*dec) {
      const PipelineConfig config = finish(dec_flags);
      Image f = load_image(dec_in);
      if (config.max_side > 0) f = downscale_to(f, config.max_side);
      const SpectralDecomposition d = decompose(f, config, progress_printer(verbose, "decompose"));
      for (const Image& b : d.bands) require_finite(b, "decomposition");
      save_band_stack(dec_out, d, schedule_text(config), png_depth);
      if (!d.all_converged()) {
        std::fprintf(stderr, "warning: some inner solves stopped at max_iter (see manifest)\n");
      }
    } else if (*rec) {
      const Image out = to_output_space(reconstruct(load_band_stack(rec_stack)));
      require_finite(out, "reconstruct");
      save_image(out, rec_out);
    } else if (*fil) {
      const SpectralDecomposition d = load_band_stack(fil_stack);
      const FilterSpec spec = load_filter_spec(fil_spec);
      if (spec.bands != d.band_count() || spec.channels != d.channels) {
        throw invalid_input("filter", "spec K/channels do not match the band stack");
      }
      RegionMaskSet masks = load_masks(fil_masks);
      masks = masks.empty() ? RegionMaskSet::whole(d.grid()) : prepare_masks(masks, fil_feather);
      if (masks.grid() != d.grid()) throw invalid_input("masks", "masks do not match the band stack size");
      const Image out = to_output_space(apply_spatial_filter(d, spec.spatial(fil_image, masks)));
      require_finite(out, "filter");
      SaveOptions opts;
      opts.offset = fil_offset;
      save_image(out, fil_out, opts);
    } else if (*fus) {
      const PipelineConfig config = finish(fus_flags);
      if (preset == "custom" && fus_spec.empty() && profile.empty()) {
        throw Error(ErrorKind::kUsage, "filter", "custom fusion needs --spec or --profile");
      }
      FusionInputs in;
      in.image1 = load_image(img1);
      in.image2 = load_image(img2);
      if (!lm1.empty()) in.landmarks1 = load_landmarks(lm1);
      if (!lm2.empty()) in.landmarks2 = load_landmarks(lm2);
      in.masks1 = load_masks(masks1);
      in.masks2 = load_masks(masks2);
      in = stage_inputs(std::move(in), preset, config.max_side);
      const PreparedFusion prepared = prepare_fusion(in, config, progress_printer(verbose, "decompose"));
      FilterSpec spec;
      if (!fus_spec.empty()) {
        spec = load_filter_spec(fus_spec);
      } else {
        ProfileParams params;
        params.k_lo = k_lo;
        params.gain = gain;
        std::string name = profile;
        if (name.empty()) name = preset == "face" ? "face" : preset;
        spec = filter_profile(name, prepared.d1->band_count(), prepared.d1->channels, params);
      }
      const Image out = render_fusion(prepared, spec);
      require_finite(out, "fusion");
      save_image(out, fus_out);
      if (!diag_dir.empty()) write_diagnostics(diag_dir, prepared, out);
    } else if (*reg) {
      const Image ref = load_image(reg_ref);
      const RegistrationField field = solve_field(load_landmarks(reg_lm1), load_landmarks(reg_lm2), ref.grid());
      if (field.merged_duplicates) std::fprintf(stderr, "warning: landmarks sharing a pixel were averaged\n");
      save_field(reg_out, field);
      if (!reg_warp.empty()) {
        if (reg_warped.empty()) throw Error(ErrorKind::kUsage, "registration", "--warp needs --warped");
        save_image(warp(load_image(reg_warp), field), reg_warped);
      }
    } else if (*fea) {
      save_image(feather(load_mask(fea_in), fea_radius), fea_out);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e);
  } catch (const std::bad_alloc&) {
    std::fprintf(stderr, "error: out of memory\n");
    return kExitNumerical;
  }
  return 0;
}
