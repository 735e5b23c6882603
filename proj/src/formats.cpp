#include "spectv/formats.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "spectv/error.hpp"
#include "spectv/image_io.hpp"

namespace fs = std::filesystem;

namespace spectv {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out << text;
  if (!out) throw io_error("write failed: " + path);
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& values, F to_text) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += to_text(values[i]);
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& stage, const std::string& what) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size() || !std::isfinite(v)) {
    throw invalid_input(stage, "bad number '" + t + "' in " + what);
  }
  return v;
}

int parse_int(const std::string& text, const std::string& stage, const std::string& what) {
  const double v = parse_double(text, stage, what);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw invalid_input(stage, "bad integer in " + what);
  return static_cast<int>(v);
}

// key=value lines with '#' comments. Repeated keys are kept in order.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text,
                                                                  const std::string& stage) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw invalid_input(stage, "line " + std::to_string(line_no) + ": expected key=value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

constexpr char kSidecarMagic[4] = {'S', 'P', 'B', 'S'};

}  // namespace

Image band_visual(const SpectralDecomposition& d, int k) {
  if (k < 0 || k >= d.band_count()) throw invalid_input("io", "band index out of range");
  return to_output_space(d.bands[k]);
}

void save_band_stack(const std::string& dir, const SpectralDecomposition& d,
                     const std::string& schedule, int png_bit_depth) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory " + dir + ": " + ec.message());

  std::string m;
  m += "format=spectv-bandstack\n";
  m += "version=" + std::to_string(kBandStackVersion) + "\n";
  m += "variant=" + to_string(d.variant) + "\n";
  m += "K=" + std::to_string(d.band_count()) + "\n";
  m += "height=" + std::to_string(d.height) + "\n";
  m += "width=" + std::to_string(d.width) + "\n";
  m += "channels=" + std::to_string(d.channels) + "\n";
  m += "color_space=" + to_string(d.color_space) + "\n";
  m += "schedule=" + schedule + "\n";
  m += "times=" + join(d.times, fmt) + "\n";
  m += "mean=" + join(d.mean, fmt) + "\n";
  m += "converged=" + join(d.reports, [](const SolverReport& r) { return std::string(r.converged ? "1" : "0"); }) + "\n";
  m += "iterations=" + join(d.reports, [](const SolverReport& r) { return std::to_string(r.iterations); }) + "\n";
  m += "gap=" + join(d.reports, [](const SolverReport& r) { return fmt(r.primal_dual_gap); }) + "\n";
  write_text_file((fs::path(dir) / "manifest.txt").string(), m);

  SaveOptions png;
  png.offset = true;
  png.bit_depth = png_bit_depth;
  for (int k = 0; k < d.band_count(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "band_%02d.png", k + 1);
    save_image(band_visual(d, k), fs::path(dir) / name, png);
  }

  const std::string path = (fs::path(dir) / "bands.f64").string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  const std::int32_t dims[4] = {d.band_count(), d.channels, d.height, d.width};
  out.write(kSidecarMagic, 4);
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  for (const Image& b : d.bands) {
    out.write(reinterpret_cast<const char*>(b.data().data()), b.data().size() * sizeof(double));
  }
  if (!out) throw io_error("write failed: " + path);
}

SpectralDecomposition load_band_stack(const std::string& dir) {
  const auto kv = parse_key_values(read_text_file((fs::path(dir) / "manifest.txt").string()), "io");
  std::map<std::string, std::string> m(kv.begin(), kv.end());
  auto get = [&](const std::string& key) {
    const auto it = m.find(key);
    if (it == m.end()) throw io_error("manifest lacks '" + key + "'");
    return it->second;
  };
  if (get("format") != "spectv-bandstack") throw io_error("not a band stack: " + dir);
  const int version = parse_int(get("version"), "io", "version");
  if (version != kBandStackVersion) {
    throw io_error("unsupported band-stack version " + std::to_string(version));
  }
  SpectralDecomposition d;
  try {
    d.variant = flow_variant_from_string(get("variant"));
    d.color_space = color_space_from_string(get("color_space"));
  } catch (const Error& e) {
    throw io_error(std::string("manifest: ") + e.what());
  }
  const int K = parse_int(get("K"), "io", "K");
  d.height = parse_int(get("height"), "io", "height");
  d.width = parse_int(get("width"), "io", "width");
  d.channels = parse_int(get("channels"), "io", "channels");
  if (K < 1 || d.height < 1 || d.width < 1 || d.channels < 1) throw io_error("manifest has bad dimensions");
  for (const auto& t : split(get("times"), ',')) d.times.push_back(parse_double(t, "io", "times"));
  for (const auto& v : split(get("mean"), ',')) d.mean.push_back(parse_double(v, "io", "mean"));
  if (static_cast<int>(d.times.size()) != K || static_cast<int>(d.mean.size()) != d.channels) {
    throw io_error("manifest times/mean lengths disagree with K/channels");
  }
  const auto conv = split(get("converged"), ',');
  const auto iters = m.count("iterations") ? split(m["iterations"], ',') : std::vector<std::string>{};
  const auto gaps = m.count("gap") ? split(m["gap"], ',') : std::vector<std::string>{};
  if (static_cast<int>(conv.size()) != K) throw io_error("manifest converged flags disagree with K");
  for (int k = 0; k < K; ++k) {
    SolverReport r;
    r.converged = trim(conv[k]) == "1";
    if (static_cast<int>(iters.size()) == K) r.iterations = parse_int(iters[k], "io", "iterations");
    if (static_cast<int>(gaps.size()) == K) r.primal_dual_gap = parse_double(gaps[k], "io", "gap");
    d.reports.push_back(r);
  }

  const std::string path = (fs::path(dir) / "bands.f64").string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read " + path);
  char magic[4];
  std::int32_t dims[4];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in || std::memcmp(magic, kSidecarMagic, 4) != 0) throw io_error("bad band sidecar " + path);
  if (dims[0] != K || dims[1] != d.channels || dims[2] != d.height || dims[3] != d.width) {
    throw io_error("band sidecar disagrees with the manifest");
  }
  for (int k = 0; k < K; ++k) {
    Image b(d.height, d.width, d.channels, d.color_space);
    in.read(reinterpret_cast<char*>(b.data().data()), b.data().size() * sizeof(double));
    if (!in) throw io_error("truncated band sidecar " + path);
    d.bands.push_back(std::move(b));
  }
  return d;
}

FilterSpec parse_filter_spec(const std::string& text) {
  const std::string stage = "filter";
  FilterSpec s;
  int version = -1;
  std::vector<double> omega1, omega2;
  std::vector<std::string> rows;
  for (const auto& [key, value] : parse_key_values(text, stage)) {
    if (key == "version") {
      version = parse_int(value, stage, "version");
    } else if (key == "K") {
      s.bands = parse_int(value, stage, "K");
    } else if (key == "channels") {
      s.channels = parse_int(value, stage, "channels");
    } else if (key == "omega1" || key == "omega2") {
      auto& target = key == "omega1" ? omega1 : omega2;
      target.clear();
      for (const auto& v : split(value, ',')) target.push_back(parse_double(v, stage, key));
    } else if (key == "frame2") {
      if (value == "target") {
        s.frame2 = FilterFrame::kTarget;
      } else if (value == "source") {
        s.frame2 = FilterFrame::kSource;
      } else {
        throw invalid_input(stage, "frame2 must be 'target' or 'source'");
      }
    } else if (key == "filter") {
      rows.push_back(value);
    } else {
      throw invalid_input(stage, "unknown key '" + key + "'");
    }
  }
  if (version != kFilterSpecVersion) {
    throw invalid_input(stage, version < 0 ? "missing version" : "unsupported version " + std::to_string(version));
  }
  if (s.bands < 1 || s.channels < 1) throw invalid_input(stage, "K and channels are required");
  auto widen = [&](std::vector<double> v, double fallback) {
    if (v.empty()) v.push_back(fallback);
    if (v.size() == 1) v.assign(s.channels, v.front());
    return v;
  };
  s.omega1 = widen(omega1, 1.0);
  s.omega2 = widen(omega2, 0.0);
  for (const auto& r : rows) {
    const auto fields = split(r, ',');
    if (static_cast<int>(fields.size()) != 4 + s.bands) {
      throw invalid_input(stage, "filter row needs image,region,channel,mean and " + std::to_string(s.bands) +
                                     " weights");
    }
    FilterSpec::Row row;
    row.image = parse_int(fields[0], stage, "filter image");
    row.region = trim(fields[1]);
    const std::string ch = trim(fields[2]);
    row.channel = ch == "*" ? -1 : parse_int(ch, stage, "filter channel");
    row.filter.mean_weight = parse_double(fields[3], stage, "mean weight");
    for (int k = 0; k < s.bands; ++k) row.filter.weights.push_back(parse_double(fields[4 + k], stage, "weight"));
    s.rows.push_back(std::move(row));
  }
  s.validate();
  return s;
}

std::string format_filter_spec(const FilterSpec& spec) {
  std::string out;
  out += "version=" + std::to_string(kFilterSpecVersion) + "\n";
  out += "K=" + std::to_string(spec.bands) + "\n";
  out += "channels=" + std::to_string(spec.channels) + "\n";
  out += "omega1=" + join(spec.omega1, fmt) + "\n";
  out += "omega2=" + join(spec.omega2, fmt) + "\n";
  out += std::string("frame2=") + (spec.frame2 == FilterFrame::kTarget ? "target" : "source") + "\n";
  for (const auto& r : spec.rows) {
    out += "filter=" + std::to_string(r.image) + "," + r.region + "," +
           (r.channel < 0 ? std::string("*") : std::to_string(r.channel)) + "," + fmt(r.filter.mean_weight);
    for (double w : r.filter.weights) out += "," + fmt(w);
    out += "\n";
  }
  return out;
}

FilterSpec load_filter_spec(const std::string& path) { return parse_filter_spec(read_text_file(path)); }

void save_filter_spec(const std::string& path, const FilterSpec& spec) {
  write_text_file(path, format_filter_spec(spec));
}

Image load_mask(const std::string& path) { return to_mask(load_image(path)); }

Image to_mask(const Image& img) {
  if (img.channels() == 1) return img;
  Image out(img.height(), img.width(), 1);
  auto dst = out.plane(0);
  for (int c = 0; c < img.channels(); ++c) {
    auto src = img.plane(c);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i] / img.channels();
  }
  return out;
}

}  // namespace spectv
