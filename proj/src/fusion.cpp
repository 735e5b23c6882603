#include "spectv/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "spectv/error.hpp"

namespace spectv {

void FilterSpec::validate() const {
  if (bands < 1) throw invalid_input("filter", "filter spec needs K >= 1");
  if (channels < 1) throw invalid_input("filter", "filter spec needs channels >= 1");
  if (static_cast<int>(omega1.size()) != channels || static_cast<int>(omega2.size()) != channels) {
    throw invalid_input("filter", "omega1/omega2 need one value per channel");
  }
  for (std::size_t c = 0; c < omega1.size(); ++c) {
    if (!std::isfinite(omega1[c]) || !std::isfinite(omega2[c])) {
      throw invalid_input("filter", "mean weights must be finite");
    }
  }
  for (const auto& r : rows) {
    if (r.image != 1 && r.image != 2) throw invalid_input("filter", "filter row image must be 1 or 2");
    if (r.region.empty()) throw invalid_input("filter", "filter row has an empty region");
    if (r.channel < -1 || r.channel >= channels) {
      throw invalid_input("filter", "filter row channel out of range");
    }
    if (static_cast<int>(r.filter.weights.size()) != bands) {
      throw invalid_input("filter", "filter row for region '" + r.region + "' has " +
                                        std::to_string(r.filter.weights.size()) + " weights, expected " +
                                        std::to_string(bands));
    }
    for (double w : r.filter.weights) {
      if (!std::isfinite(w)) throw invalid_input("filter", "non-finite filter weight");
    }
    if (!std::isfinite(r.filter.mean_weight)) throw invalid_input("filter", "non-finite mean weight");
  }
}

std::optional<BandFilter> FilterSpec::lookup(int image, const std::string& region, int channel) const {
  int best = -1;
  const Row* found = nullptr;
  for (const auto& r : rows) {
    if (r.image != image) continue;
    if (r.region != region && r.region != "*") continue;
    if (r.channel != channel && r.channel != -1) continue;
    const int score = (r.region == region ? 2 : 0) + (r.channel == channel ? 1 : 0);
    if (score >= best) {  // later rows override earlier ones of equal specificity
      best = score;
      found = &r;
    }
  }
  if (!found) return std::nullopt;
  return found->filter;
}

SpatialFilter FilterSpec::spatial(int image, const RegionMaskSet& masks) const {
  std::vector<std::vector<BandFilter>> filters;
  for (const auto& name : masks.names) {
    std::vector<BandFilter> per_channel;
    for (int c = 0; c < channels; ++c) {
      auto h = lookup(image, name, c);
      if (!h) {
        throw invalid_input("filter", "no filter for image " + std::to_string(image) + ", region '" +
                                          name + "', channel " + std::to_string(c));
      }
      per_channel.push_back(std::move(*h));
    }
    filters.push_back(std::move(per_channel));
  }
  return SpatialFilter(masks, std::move(filters));
}

namespace {

std::vector<double> step_weights(int bands, int k_lo, double below, double above) {
  std::vector<double> w(bands);
  for (int k = 1; k <= bands; ++k) w[k - 1] = k < k_lo ? below : above;
  return w;
}

}  // namespace

std::vector<std::string> profile_names() {
  return {"identity-1", "identity-2", "face", "insertion", "style"};
}

FilterSpec filter_profile(const std::string& name, int bands, int channels,
                          const ProfileParams& params) {
  if (bands < 1 || channels < 1) throw invalid_input("filter", "profile needs K >= 1 and channels >= 1");
  const int k_lo = params.k_lo > 0 ? params.k_lo : std::max(2, (bands + 2) / 3);
  if (k_lo < 1 || k_lo > bands + 1) {
    throw invalid_input("filter", "k_lo must lie in 1.." + std::to_string(bands + 1));
  }
  FilterSpec s;
  s.bands = bands;
  s.channels = channels;
  s.omega1.assign(channels, 1.0);
  s.omega2.assign(channels, 0.0);
  s.frame2 = FilterFrame::kTarget;
  auto row = [&](int image, const std::string& region, int channel, std::vector<double> w, double mw) {
    s.rows.push_back({image, region, channel, BandFilter{std::move(w), mw}});
  };
  const std::vector<double> ones(bands, 1.0), zeros(bands, 0.0);
  if (name == "identity-1") {
    row(1, "*", -1, ones, 1.0);
    row(2, "*", -1, zeros, 0.0);
  } else if (name == "identity-2") {
    row(1, "*", -1, zeros, 0.0);
    row(2, "*", -1, ones, 1.0);
    s.omega1.assign(channels, 0.0);
    s.omega2.assign(channels, 1.0);
  } else if (name == "face") {
    row(1, "*", -1, ones, 1.0);
    row(2, "*", -1, zeros, 0.0);
    // Chrominance leans toward image 1, the frame being written into.
    for (const char* region : {"face", "eyes", "mouth"}) {
      row(1, region, -1, std::vector<double>(bands, 0.8), 1.0);
      row(2, region, -1, std::vector<double>(bands, 0.2), 0.0);
    }
    // Luminance: coarse shape from image 1, fine detail from both.
    row(1, "face", 0, ones, 1.0);
    row(2, "face", 0, step_weights(bands, k_lo, 0.0, 1.0), 0.0);
    for (const char* region : {"eyes", "mouth"}) {
      row(1, region, 0, step_weights(bands, k_lo, 1.0, 0.0), 1.0);
      row(2, region, 0, step_weights(bands, k_lo, 0.0, 1.0), 0.0);
    }
  } else if (name == "insertion") {
    row(1, "*", -1, ones, 1.0);
    row(2, "*", -1, zeros, 0.0);
    row(1, "object", -1, step_weights(bands, k_lo, 1.0, 0.0), 1.0);
    row(2, "object", -1, step_weights(bands, k_lo, 0.0, 1.0), 0.0);
  } else if (name == "style") {
    if (!std::isfinite(params.gain)) throw invalid_input("filter", "gain must be finite");
    row(1, "*", -1, step_weights(bands, k_lo, 1.0, 0.0), 1.0);
    row(2, "*", -1, step_weights(bands, k_lo, 0.0, params.gain), 0.0);
  } else {
    throw invalid_input("filter", "unknown filter profile '" + name + "'");
  }
  return s;
}

namespace {

void check_pair(const SpectralDecomposition& d1, const SpectralDecomposition& d2) {
  if (d1.band_count() != d2.band_count()) {
    throw invalid_input("fusion", "band counts differ (" + std::to_string(d1.band_count()) + " vs " +
                                      std::to_string(d2.band_count()) + ")");
  }
  if (d1.color_space != d2.color_space || d1.channels != d2.channels) {
    throw invalid_input("fusion", "color spaces differ (" + to_string(d1.color_space) + " vs " +
                                      to_string(d2.color_space) + ")");
  }
}

Image warp_plane(const std::vector<double>& plane, Grid source, const RegistrationField& field) {
  Image img(source.height, source.width, 1);
  std::copy(plane.begin(), plane.end(), img.plane(0).begin());
  return warp(img, field);
}

// Shared by fuse() and the pipeline so both give bit-identical results.
Image combine(const SpectralDecomposition& d1, const SpectralDecomposition& warped2,
              const SpatialFilter& filter1, const SpatialFilter& filter2, FilterFrame frame2,
              const RegistrationField* field, Grid grid2, const std::vector<double>& omega1,
              const std::vector<double>& omega2) {
  check_pair(d1, warped2);
  if (warped2.grid() != d1.grid()) throw invalid_input("fusion", "warped bands are off image 1's grid");
  const int K = d1.band_count(), C = d1.channels;
  if (filter1.grid() != d1.grid()) throw invalid_input("fusion", "filter 1 is not on image 1's grid");
  const Grid expected2 = frame2 == FilterFrame::kTarget ? d1.grid() : grid2;
  if (filter2.grid() != expected2) throw invalid_input("fusion", "filter 2 grid does not match its frame");
  for (const SpatialFilter* f : {&filter1, &filter2}) {
    if (f->bands() != K) throw invalid_input("fusion", "filter band count differs from the decompositions");
    if (f->channels() != C) throw invalid_input("fusion", "filter channel count differs from the decompositions");
  }
  if (static_cast<int>(omega1.size()) != C || static_cast<int>(omega2.size()) != C) {
    throw invalid_input("fusion", "mean weights need one value per channel");
  }
  const bool resample2 = frame2 == FilterFrame::kSource;
  if (resample2 && !field) throw invalid_input("fusion", "source-frame filter needs a field");

  Image out(d1.height, d1.width, C, d1.color_space);
  const std::size_t n = out.plane_size();
  for (int c = 0; c < C; ++c) {
    auto dst = out.plane(c);
    const double base = omega1[c] * d1.mean[c] + omega2[c] * warped2.mean[c];
    std::fill(dst.begin(), dst.end(), base);
    const bool flat1 = filter1.uniform_in_space(c);
    const bool flat2 = !resample2 && filter2.uniform_in_space(c);
    for (int k = 0; k < K; ++k) {
      auto b1 = d1.bands[k].plane(c);
      auto b2 = warped2.bands[k].plane(c);
      if (flat1 && flat2) {
        const double w1 = filter1.region_filter(0, c).weights[k];
        const double w2 = filter2.region_filter(0, c).weights[k];
        for (std::size_t i = 0; i < n; ++i) dst[i] += w1 * b1[i] + w2 * b2[i];
        continue;
      }
      const auto w1 = filter1.weight_plane(k, c);
      std::vector<double> w2;
      if (resample2) {
        const Image warped = warp_plane(filter2.weight_plane(k, c), grid2, *field);
        w2.assign(warped.plane(0).begin(), warped.plane(0).end());
      } else {
        w2 = filter2.weight_plane(k, c);
      }
      for (std::size_t i = 0; i < n; ++i) dst[i] += w1[i] * b1[i] + w2[i] * b2[i];
    }
  }
  return out;
}

}  // namespace

Image fuse(const FusionJob& job) {
  if (!job.d1 || !job.d2) throw invalid_input("fusion", "missing decomposition");
  check_pair(*job.d1, *job.d2);
  if (job.field.grid() != job.d1->grid()) {
    throw invalid_input("fusion", "registration field is not on image 1's grid");
  }
  const SpectralDecomposition warped2 = warp_decomposition(*job.d2, job.field);
  return combine(*job.d1, warped2, job.filter1, job.filter2, job.frame2, &job.field,
                 job.d2->grid(), job.omega1, job.omega2);
}

Image fuse_prewarped(const SpectralDecomposition& d1, const SpectralDecomposition& warped2,
                     const SpatialFilter& filter1, const SpatialFilter& filter2_target,
                     const std::vector<double>& omega1, const std::vector<double>& omega2) {
  return combine(d1, warped2, filter1, filter2_target, FilterFrame::kTarget, nullptr, d1.grid(),
                 omega1, omega2);
}

void PipelineConfig::validate() const {
  auto bad = [](const std::string& what) { return invalid_input("config", what); };
  if (bands < 1) throw bad("K must be >= 1");
  if (!(base > 0.0) || !std::isfinite(base)) throw bad("schedule base must be positive");
  if (!(ratio > 0.0) || !(ratio < 1.0)) throw bad("schedule ratio must lie in (0, 1)");
  if (!(solver.tol > 0.0)) throw bad("solver tolerance must be positive");
  if (solver.max_iter < 1) throw bad("max_iter must be >= 1");
  if (gf_steps < 2) throw bad("gradient flow needs at least 2 steps");
  if (!(gf_t_max >= 0.0)) throw bad("t_max must be >= 0");
  if (!(feather_radius >= 0.0)) throw bad("feather radius must be >= 0");
  if (max_side < 0) throw bad("max_side must be >= 0");
}

SpectralDecomposition decompose(const Image& img, const PipelineConfig& config,
                                const ProgressFn& progress) {
  config.validate();
  Image f = img;
  if (f.channels() == 3 && f.color_space() == ColorSpace::kRgb && config.color_space == ColorSpace::kLcc) {
    f = rgb_to_lcc(f);
  }
  if (config.variant == FlowVariant::kInverseScaleSpace) {
    return decompose_iss(f, iss_schedule(config.bands, config.base, config.ratio), config.solver,
                         progress);
  }
  GradientFlowOptions gf;
  gf.steps = config.gf_steps;
  gf.t_max = config.gf_t_max;
  gf.bands = config.bands;
  gf.solver = config.solver;
  return decompose_gf(f, gf, progress);
}

Image to_output_space(const Image& img) {
  return img.color_space() == ColorSpace::kLcc ? lcc_to_rgb(img) : img;
}

FusionInputs downscale_inputs(const FusionInputs& in, int max_side) {
  if (max_side <= 0) return in;
  FusionInputs out;
  auto shrink = [&](const Image& img, const std::optional<LandmarkSet>& lm, const RegionMaskSet& masks,
                    Image& img_out, std::optional<LandmarkSet>& lm_out, RegionMaskSet& masks_out) {
    img_out = img.empty() ? img : downscale_to(img, max_side);
    if (lm) lm_out = rescale_landmarks(*lm, img.grid(), img_out.grid());
    for (int r = 0; r < masks.size(); ++r) {
      const Image& m = masks.masks[r];
      masks_out.add(masks.names[r], m.grid() == img_out.grid()
                                        ? m
                                        : resample_area(m, img_out.height(), img_out.width()));
    }
  };
  shrink(in.image1, in.landmarks1, in.masks1, out.image1, out.landmarks1, out.masks1);
  shrink(in.image2, in.landmarks2, in.masks2, out.image2, out.landmarks2, out.masks2);
  return out;
}

PreparedFusion prepare_fusion(const FusionInputs& in, const PipelineConfig& config,
                              const ProgressFn& progress,
                              std::shared_ptr<const SpectralDecomposition> d1,
                              std::shared_ptr<const SpectralDecomposition> d2) {
  config.validate();
  if (in.image1.empty() || in.image2.empty()) throw invalid_input("input", "both images are required");
  if (in.image1.channels() != in.image2.channels()) {
    throw invalid_input("fusion", "images have different channel counts");
  }
  if (in.landmarks1.has_value() != in.landmarks2.has_value()) {
    throw Error(ErrorKind::kUsage, "registration", "landmarks are needed for both images or neither");
  }
  PreparedFusion p;
  const Grid g1 = in.image1.grid(), g2 = in.image2.grid();
  if (!in.masks1.empty() && in.masks1.grid() != g1) throw invalid_input("masks", "image 1 masks do not match its size");
  if (!in.masks2.empty() && in.masks2.grid() != g2) throw invalid_input("masks", "image 2 masks do not match its size");
  p.masks1 = in.masks1.empty() ? RegionMaskSet::whole(g1) : prepare_masks(in.masks1, config.feather_radius);
  p.masks2 = in.masks2.empty() ? RegionMaskSet::whole(g2) : prepare_masks(in.masks2, config.feather_radius);

  p.field = in.landmarks1 ? solve_field(*in.landmarks1, *in.landmarks2, g1)
                          : RegistrationField::identity(g1);

  const int per_image = config.variant == FlowVariant::kInverseScaleSpace ? config.bands : config.gf_steps;
  auto stage = [&](int offset) -> ProgressFn {
    if (!progress) return {};
    return [&, offset](int done, int) { progress(offset + done, 2 * per_image); };
  };
  try {
    if (!d1) d1 = std::make_shared<const SpectralDecomposition>(decompose(in.image1, config, stage(0)));
    if (!d2) d2 = std::make_shared<const SpectralDecomposition>(decompose(in.image2, config, stage(per_image)));
  } catch (const Error& e) {
    if (e.stage() == "decomposition" || e.stage() == "tv-prox") throw;
    throw Error(e.kind(), "decomposition", e.what());
  }
  check_pair(*d1, *d2);
  if (d1->grid() != g1 || d2->grid() != g2) throw invalid_input("fusion", "cached decomposition size mismatch");
  p.d1 = std::move(d1);
  p.d2 = std::move(d2);
  p.warped2 = std::make_shared<const SpectralDecomposition>(warp_decomposition(*p.d2, p.field));
  return p;
}

Image render_fusion(const PreparedFusion& prepared, const FilterSpec& spec) {
  spec.validate();
  const auto& d1 = *prepared.d1;
  if (spec.bands != d1.band_count()) {
    throw invalid_input("filter", "spec has K=" + std::to_string(spec.bands) + ", decomposition has K=" +
                                      std::to_string(d1.band_count()));
  }
  if (spec.channels != d1.channels) throw invalid_input("filter", "spec channel count differs from the images");
  const SpatialFilter f1 = spec.spatial(1, prepared.masks1);
  const SpatialFilter f2 =
      spec.spatial(2, spec.frame2 == FilterFrame::kTarget ? prepared.masks1 : prepared.masks2);
  return to_output_space(combine(d1, *prepared.warped2, f1, f2, spec.frame2, &prepared.field,
                                 prepared.d2->grid(), spec.omega1, spec.omega2));
}

FusionInputs stage_inputs(FusionInputs in, const std::string& preset, int max_side) {
  if (preset != "custom" && preset != "face" && preset != "insertion" && preset != "style") {
    throw Error(ErrorKind::kUsage, "config", "unknown preset '" + preset + "'");
  }
  if (preset == "face" && (!in.landmarks1 || !in.landmarks2)) {
    throw Error(ErrorKind::kUsage, "registration", "the face preset needs landmarks on both images");
  }
  if (preset == "insertion" && in.masks1.index_of("object") < 0) {
    throw Error(ErrorKind::kUsage, "masks", "the insertion preset needs an 'object' mask on image 1");
  }
  if (preset == "style" && !in.image1.empty() && !in.image2.empty() && in.image2.grid() != in.image1.grid()) {
    in.image2 = resample_area(in.image2, in.image1.height(), in.image1.width());
  }
  in = downscale_inputs(in, max_side);
  if (preset == "face" && in.masks1.empty()) in.masks1 = face_region_priors(in.image1.grid(), *in.landmarks1);
  return in;
}

RegionMaskSet face_region_priors(Grid grid, const LandmarkSet& points) {
  RegionMaskSet set;
  LandmarkSet eyes, mouth;
  for (const auto& p : points) {
    if (p.label.rfind("eye", 0) == 0) eyes.push_back(p);
    if (p.label.rfind("mouth", 0) == 0) mouth.push_back(p);
  }
  set.add("face", ellipse_mask(grid, points, 2.0));
  if (!eyes.empty()) set.add("eyes", ellipse_mask(grid, eyes, 1.5));
  if (!mouth.empty()) set.add("mouth", ellipse_mask(grid, mouth, 1.5));
  // Later regions win where priors overlap.
  for (int r = 0; r + 1 < set.size(); ++r) {
    auto base = set.masks[r].plane(0);
    for (int s = r + 1; s < set.size(); ++s) {
      auto top = set.masks[s].plane(0);
      for (std::size_t i = 0; i < base.size(); ++i) base[i] = std::min(base[i], 1.0 - top[i]);
    }
  }
  return set;
}

Image preset_face_fusion(const FusionInputs& in, const std::string& profile, const PipelineConfig& config) {
  if (!in.landmarks1 || !in.landmarks2) {
    throw Error(ErrorKind::kUsage, "registration", "face fusion needs landmark files for both images");
  }
  if (in.image1.channels() != 3 || in.image2.channels() != 3) {
    throw invalid_input("input", "face fusion needs two RGB images");
  }
  FusionInputs scaled = downscale_inputs(in, config.max_side);
  if (scaled.masks1.empty()) scaled.masks1 = face_region_priors(scaled.image1.grid(), *scaled.landmarks1);
  const PreparedFusion p = prepare_fusion(scaled, config);
  return render_fusion(p, filter_profile(profile, config.bands, p.d1->channels));
}

Image preset_object_insertion(const FusionInputs& in, int k_lo, const PipelineConfig& config) {
  if (in.masks1.index_of("object") < 0) {
    throw Error(ErrorKind::kUsage, "masks", "object insertion needs an 'object' mask on image 1");
  }
  const FusionInputs scaled = downscale_inputs(in, config.max_side);
  const PreparedFusion p = prepare_fusion(scaled, config);
  ProfileParams params;
  params.k_lo = k_lo;
  return render_fusion(p, filter_profile("insertion", config.bands, p.d1->channels, params));
}

Image preset_style_transfer(const Image& content, const Image& style, int k_lo, double gain,
                            const PipelineConfig& config) {
  if (k_lo < 1 || k_lo > config.bands + 1) {
    throw invalid_input("filter", "k_lo must lie in 1.." + std::to_string(config.bands + 1));
  }
  FusionInputs in;
  in.image1 = content;
  in.image2 = style.grid() == content.grid() ? style : resample_area(style, content.height(), content.width());
  const FusionInputs scaled = downscale_inputs(in, config.max_side);
  const PreparedFusion p = prepare_fusion(scaled, config);
  ProfileParams params;
  params.k_lo = k_lo;
  params.gain = gain;
  return render_fusion(p, filter_profile("style", config.bands, p.d1->channels, params));
}

}  // namespace spectv
