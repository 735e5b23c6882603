#include "spectv/registration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "spectv/error.hpp"

namespace spectv {

RegistrationField RegistrationField::identity(Grid grid) {
  RegistrationField f;
  f.v = VectorField2(grid.height, grid.width);
  f.report_x.converged = f.report_y.converged = true;
  return f;
}

void validate_landmarks(const LandmarkSet& src, const LandmarkSet& dst, Grid grid) {
  if (src.size() != dst.size()) {
    throw invalid_input("registration", "landmark counts differ (" + std::to_string(src.size()) +
                                            " vs " + std::to_string(dst.size()) + ")");
  }
  if (src.size() < 3) throw invalid_input("registration", "need at least 3 landmarks");
  if (grid.height < 1 || grid.width < 1) throw invalid_input("registration", "empty grid");

  double mx = 0.0, my = 0.0;
  for (const auto& p : src) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < -0.5 || p.y < -0.5 ||
        p.x > grid.width - 0.5 || p.y > grid.height - 0.5) {
      throw invalid_input("registration", "landmark outside the image");
    }
    mx += p.x;
    my += p.y;
  }
  for (const auto& p : dst) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw invalid_input("registration", "non-finite target landmark");
    }
  }
  mx /= src.size();
  my /= src.size();
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& p : src) {
    sxx += (p.x - mx) * (p.x - mx);
    syy += (p.y - my) * (p.y - my);
    sxy += (p.x - mx) * (p.y - my);
  }
  if (sxx * syy - sxy * sxy <= 1e-9 * std::max(1.0, (sxx + syy) * (sxx + syy))) {
    throw invalid_input("registration", "landmarks are collinear");
  }
}

RegistrationField solve_field(const LandmarkSet& src, const LandmarkSet& dst, Grid grid,
                              const LaplaceOptions& opts) {
  validate_landmarks(src, dst, grid);

  // Nearest-pixel sites; duplicates are averaged.
  struct Acc {
    double dx = 0.0, dy = 0.0;
    int count = 0;
  };
  std::map<std::pair<int, int>, Acc> sites;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const int y = std::clamp(static_cast<int>(std::lround(src[i].y)), 0, grid.height - 1);
    const int x = std::clamp(static_cast<int>(std::lround(src[i].x)), 0, grid.width - 1);
    Acc& a = sites[{y, x}];
    a.dx += dst[i].x - src[i].x;
    a.dy += dst[i].y - src[i].y;
    ++a.count;
  }
  RegistrationField field;
  field.merged_duplicates = sites.size() < src.size();
  std::vector<PixelConstraint> cx, cy;
  for (const auto& [pos, a] : sites) {
    cx.push_back({pos.first, pos.second, a.dx / a.count});
    cy.push_back({pos.first, pos.second, a.dy / a.count});
  }
  const Image vx = laplace_solve_with_constraints(grid, cx, opts, &field.report_x);
  const Image vy = laplace_solve_with_constraints(grid, cy, opts, &field.report_y);
  field.v = VectorField2(grid.height, grid.width);
  std::copy(vx.plane(0).begin(), vx.plane(0).end(), field.v.x.begin());
  std::copy(vy.plane(0).begin(), vy.plane(0).end(), field.v.y.begin());
  return field;
}

Image warp(const Image& img, const RegistrationField& field) {
  const Grid g = field.grid();
  Image out(g.height, g.width, img.channels(), img.color_space());
  if (img.empty()) return out;
  const int h = img.height(), w = img.width();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * g.width + x;
      const double sx = std::clamp(x + field.v.x[i], 0.0, w - 1.0);
      const double sy = std::clamp(y + field.v.y[i], 0.0, h - 1.0);
      const int x0 = std::min(static_cast<int>(sx), w - 1), y0 = std::min(static_cast<int>(sy), h - 1);
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double ax = sx - x0, ay = sy - y0;
      for (int c = 0; c < img.channels(); ++c) {
        const double top = (1 - ax) * img.at(c, y0, x0) + ax * img.at(c, y0, x1);
        const double bottom = (1 - ax) * img.at(c, y1, x0) + ax * img.at(c, y1, x1);
        out.at(c, y, x) = (1 - ay) * top + ay * bottom;
      }
    }
  }
  return out;
}

SpectralDecomposition warp_decomposition(const SpectralDecomposition& d,
                                         const RegistrationField& field) {
  SpectralDecomposition out = d;
  out.height = field.grid().height;
  out.width = field.grid().width;
  for (auto& band : out.bands) band = warp(band, field);
  return out;
}

LandmarkSet parse_landmarks(const std::string& text) {
  LandmarkSet points;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto number = [&](const std::string& token, double& value) {
    std::size_t used = 0;
    try {
      value = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size() || !std::isfinite(value)) {
      throw invalid_input("registration", "landmark line " + std::to_string(line_no) +
                                              ": expected 'x y [label]'");
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    for (std::string t; ls >> t;) tokens.push_back(t);
    if (tokens.empty()) continue;
    if (tokens.size() < 2 || tokens.size() > 3) {
      throw invalid_input("registration", "landmark line " + std::to_string(line_no) +
                                              ": expected 'x y [label]'");
    }
    Landmark p;
    number(tokens[0], p.x);
    number(tokens[1], p.y);
    if (tokens.size() == 3) p.label = tokens[2];
    points.push_back(p);
  }
  return points;
}

std::string format_landmarks(const LandmarkSet& points) {
  std::string out;
  char buf[96];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g", p.x, p.y);
    out += buf;
    if (!p.label.empty()) out += " " + p.label;
    out += "\n";
  }
  return out;
}

LandmarkSet load_landmarks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read landmark file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_landmarks(ss.str());
}

void save_landmarks(const std::string& path, const LandmarkSet& points) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write landmark file " + path);
  out << format_landmarks(points);
  if (!out) throw io_error("write failed: " + path);
}

LandmarkSet rescale_landmarks(const LandmarkSet& points, Grid from, Grid to) {
  const double sx = static_cast<double>(to.width) / from.width;
  const double sy = static_cast<double>(to.height) / from.height;
  LandmarkSet out = points;
  for (auto& p : out) {
    p.x = (p.x + 0.5) * sx - 0.5;
    p.y = (p.y + 0.5) * sy - 0.5;
  }
  return out;
}

void save_field(const std::string& path, const RegistrationField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write field file " + path);
  const std::int32_t dims[2] = {field.v.height, field.v.width};
  out.write("SPFD", 4);
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(field.v.x.data()), field.v.x.size() * sizeof(double));
  out.write(reinterpret_cast<const char*>(field.v.y.data()), field.v.y.size() * sizeof(double));
  if (!out) throw io_error("write failed: " + path);
}

RegistrationField load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read field file " + path);
  char magic[4];
  std::int32_t dims[2];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in || std::memcmp(magic, "SPFD", 4) != 0 || dims[0] < 1 || dims[1] < 1) {
    throw io_error("not a field file: " + path);
  }
  RegistrationField f = RegistrationField::identity({dims[0], dims[1]});
  in.read(reinterpret_cast<char*>(f.v.x.data()), f.v.x.size() * sizeof(double));
  in.read(reinterpret_cast<char*>(f.v.y.data()), f.v.y.size() * sizeof(double));
  if (!in) throw io_error("truncated field file: " + path);
  return f;
}

}  // namespace spectv
