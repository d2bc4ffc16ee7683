#pragma once

// Float-binary image files with a text sidecar, and 16-bit grayscale PNG export.

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "smgaa/grid.hpp"

namespace smgaa {

namespace fs = std::filesystem;

using Metadata = std::map<std::string, std::string>;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void write_le_f32(std::ostream& os, float v) {
  static_assert(sizeof(float) == 4);
  auto bits = std::bit_cast<std::uint32_t>(v);
  unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                        static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline float read_le_f32(const unsigned char* b) {
  std::uint32_t bits = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                       (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
  return std::bit_cast<float>(bits);
}

}  // namespace detail

inline fs::path sidecar_path(const fs::path& image_path) {
  auto p = image_path;
  p += ".meta";
  return p;
}

/// Writes `key = value` lines in key order.
inline void write_metadata(const fs::path& path, const Metadata& meta) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& [k, v] : meta) os << k << " = " << v << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

inline Metadata read_metadata(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  Metadata meta;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("malformed metadata line in " + path.string() + ": " + line);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    meta[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return meta;
}

/// Row-major little-endian float32 payload plus `<path>.meta` sidecar holding
/// the shape and any caller-supplied provenance keys.
template <typename T>
void write_float_image(const fs::path& path, const Grid<T>& img, Metadata meta = {}) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& v : img) detail::write_le_f32(os, static_cast<float>(v));
  if (!os) throw IoError("write failed: " + path.string());
  meta["rows"] = std::to_string(img.rows());
  meta["cols"] = std::to_string(img.cols());
  meta["dtype"] = "float32-le";
  write_metadata(sidecar_path(path), meta);
}

inline Image read_float_image(const fs::path& path, Metadata* meta_out = nullptr) {
  const auto meta = read_metadata(sidecar_path(path));
  std::size_t rows = 0;
  std::size_t cols = 0;
  try {
    rows = std::stoul(meta.at("rows"));
    cols = std::stoul(meta.at("cols"));
  } catch (const std::exception&) {
    throw IoError("sidecar of " + path.string() + " lacks a valid shape");
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes(rows * cols * 4);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(is.gcount()) != bytes.size()) {
    throw IoError("truncated image payload: " + path.string());
  }
  Image img(rows, cols);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = detail::read_le_f32(&bytes[4 * i]);
  if (meta_out) *meta_out = meta;
  return img;
}

inline void write_png16_rows(const fs::path& path, const unsigned char* pixels, std::size_t rows, std::size_t cols);

/// 16-bit grayscale PNG. Values are scaled by 1/max (or by `scale` when positive)
/// and clamped to [0, 1] before quantization.
template <typename T>
void write_png16(const fs::path& path, const Grid<T>& img, double scale = 0.0) {
  if (img.empty()) throw IoError("write_png16: empty image");
  if (!(scale > 0.0)) {
    const double peak = static_cast<double>(max_value(img));
    scale = peak > 0.0 ? 1.0 / peak : 1.0;
  }
  // quantize up front: nothing with a destructor may live across the setjmp
  std::vector<unsigned char> pixels(img.size() * 2);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = std::clamp(static_cast<double>(img[i]) * scale, 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    pixels[2 * i] = static_cast<unsigned char>(q >> 8);  // PNG is big-endian
    pixels[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
  }
  write_png16_rows(path, pixels.data(), img.rows(), img.cols());
}

inline void write_png16_rows(const fs::path& path, const unsigned char* pixels, std::size_t rows, std::size_t cols) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng error while writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < rows; ++r) png_write_row(png, const_cast<unsigned char*>(pixels + 2 * cols * r));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace smgaa
