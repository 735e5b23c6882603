#include "spectv/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "spectv/error.hpp"

namespace spectv {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw io_error("short write to '" + path.string() + "'");
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext;
}

struct MemoryReader {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset;
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

void png_read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* reader = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (reader->offset + n > reader->bytes->size()) png_error(png, "truncated PNG data");
  std::memcpy(out, reader->bytes->data() + reader->offset, n);
  reader->offset += n;
}

void png_write_fn(png_structp png, png_bytep data, png_size_t n) {
  auto* sink = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  sink->insert(sink->end(), data, data + n);
}

void png_flush_fn(png_structp) {}

double quantize_unit(double v) { return std::clamp(v, 0.0, 1.0); }

// ---- PNM ----

bool is_pnm(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 2 && bytes[0] == 'P' &&
         (bytes[1] == '2' || bytes[1] == '3' || bytes[1] == '5' || bytes[1] == '6');
}

Image decode_pnm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw io_error("malformed PNM header");
    long value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) value = value * 10 + (bytes[pos++] - '0');
    return value;
  };
  const char kind = static_cast<char>(bytes[1]);
  const int channels = (kind == '3' || kind == '6') ? 3 : 1;
  const long width = next_token();
  const long height = next_token();
  const long maxval = next_token();
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) throw io_error("unsupported PNM header");
  Image img(static_cast<int>(height), static_cast<int>(width), channels);
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  std::vector<double> raw(count);
  if (kind == '5' || kind == '6') {
    ++pos;  // single whitespace after maxval
    const std::size_t bps = maxval > 255 ? 2 : 1;
    if (pos + count * bps > bytes.size()) throw io_error("truncated PNM data");
    for (std::size_t i = 0; i < count; ++i) {
      raw[i] = bps == 2 ? (bytes[pos + 2 * i] << 8 | bytes[pos + 2 * i + 1]) : bytes[pos + i];
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) raw[i] = static_cast<double>(next_token());
  }
  const std::size_t plane = img.plane_size();
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < channels; ++c) {
      img.data()[c * plane + i] = raw[i * channels + c] / static_cast<double>(maxval);
    }
  }
  return img;
}

std::vector<std::uint8_t> encode_pnm(const Image& img, const SaveOptions& opts) {
  if (img.channels() != 1 && img.channels() != 3) throw invalid_input("io", "PNM needs 1 or 3 channels");
  const int maxval = opts.bit_depth == 16 ? 65535 : 255;
  std::ostringstream header;
  header << (img.channels() == 3 ? "P6" : "P5") << "\n" << img.width() << " " << img.height() << "\n" << maxval << "\n";
  const std::string h = header.str();
  std::vector<std::uint8_t> bytes(h.begin(), h.end());
  const std::size_t plane = img.plane_size();
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < img.channels(); ++c) {
      double v = img.data()[c * plane + i];
      if (opts.offset) v += 0.5;
      const auto q = static_cast<unsigned>(std::lround(quantize_unit(v) * maxval));
      if (maxval > 255) bytes.push_back(static_cast<std::uint8_t>(q >> 8));
      bytes.push_back(static_cast<std::uint8_t>(q & 0xff));
    }
  }
  return bytes;
}

}  // namespace

Image decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw io_error("not a PNG stream");
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  if (!png) throw io_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  MemoryReader reader{&bytes, 0};
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  Image img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("PNG decode failed: " + message);
  }
  png_set_read_fn(png, &reader, png_read_fn);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int out_depth = png_get_bit_depth(png, info);
  int channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  pixels.resize(rowbytes * height);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const int stored = channels;
  channels = (stored >= 3) ? 3 : 1;
  img = Image(height, width, channels);
  const double maxval = out_depth == 16 ? 65535.0 : 255.0;
  const std::size_t plane = img.plane_size();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t k = static_cast<std::size_t>(x) * stored + c;
        const double raw = out_depth == 16 ? (rows[y][2 * k] << 8 | rows[y][2 * k + 1]) : rows[y][k];
        img.data()[c * plane + static_cast<std::size_t>(y) * width + x] = raw / maxval;
      }
    }
  }
  return img;
}

std::vector<std::uint8_t> encode_png(const Image& img, SaveOptions opts) {
  if (img.channels() != 1 && img.channels() != 3) throw invalid_input("io", "PNG needs 1 or 3 channels");
  if (opts.bit_depth != 8 && opts.bit_depth != 16) throw invalid_input("io", "bit depth must be 8 or 16");
  std::vector<std::uint8_t> out;
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  if (!png) throw io_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  const int channels = img.channels();
  const int bytes_per_sample = opts.bit_depth / 8;
  const std::size_t rowbytes = static_cast<std::size_t>(img.width()) * channels * bytes_per_sample;
  std::vector<png_byte> pixels(rowbytes * img.height());
  const double maxval = opts.bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t plane = img.plane_size();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < channels; ++c) {
        double v = img.data()[c * plane + static_cast<std::size_t>(y) * img.width() + x];
        if (opts.offset) v += 0.5;
        const auto q = static_cast<unsigned>(std::lround(quantize_unit(v) * maxval));
        const std::size_t k = y * rowbytes + (static_cast<std::size_t>(x) * channels + c) * bytes_per_sample;
        if (bytes_per_sample == 2) {
          pixels[k] = static_cast<png_byte>(q >> 8);
          pixels[k + 1] = static_cast<png_byte>(q & 0xff);
        } else {
          pixels[k] = static_cast<png_byte>(q);
        }
      }
    }
  }
  std::vector<png_bytep> rows(img.height());
  for (int y = 0; y < img.height(); ++y) rows[y] = pixels.data() + y * rowbytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw io_error("PNG encode failed: " + message);
  }
  png_set_write_fn(png, &out, png_write_fn, png_flush_fn);
  // Fast deflate: previews are encoded on every filter edit.
  png_set_compression_level(png, 1);
  png_set_IHDR(png, info, img.width(), img.height(), opts.bit_depth,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes);
  if (is_pnm(bytes)) return decode_pnm(bytes);
  throw io_error("unsupported image format: '" + path.string() + "'");
}

void save_image(const Image& img, const std::filesystem::path& path, SaveOptions opts) {
  if (!img.all_finite()) throw Error(ErrorKind::kNumerical, "io", "refusing to save non-finite image");
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    write_file(path, encode_png(img, opts));
  } else if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
    if ((ext == ".ppm") != (img.channels() == 3) && ext != ".pnm") {
      throw invalid_input("io", "channel count does not match '" + ext + "'");
    }
    write_file(path, encode_pnm(img, opts));
  } else {
    throw io_error("unsupported output extension '" + ext + "'");
  }
}

Image offset_encode(const Image& band) {
  Image out = band;
  for (double& v : out.data()) v += 0.5;
  return out;
}

Image offset_decode(const Image& encoded) {
  Image out = encoded;
  for (double& v : out.data()) v -= 0.5;
  return out;
}

}  // namespace spectv
