#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include "stomakit/error.hpp"

namespace stomakit {

// Row-major grayscale intensity grid with values in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
};

inline GrayImage make_image(int width, int height, double fill = 0.0) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::BadParams, "image dimensions must be positive");
  }
  GrayImage img;
  img.width = width;
  img.height = height;
  img.data.assign(static_cast<std::size_t>(width) * height, fill);
  return img;
}

// ---------------------------------------------------------------------------
// PGM (P2 ASCII / P5 binary, 8- or 16-bit)
// ---------------------------------------------------------------------------

namespace detail {

inline int next_pgm_token(std::istream& is) {
  // Skip whitespace and '#' comments, then read one nonnegative integer.
  for (;;) {
    int c = is.peek();
    if (c == EOF) throw Error(ErrorCode::IoFailure, "truncated PGM header");
    if (std::isspace(c)) {
      is.get();
      continue;
    }
    if (c == '#') {
      std::string line;
      std::getline(is, line);
      continue;
    }
    break;
  }
  int value = 0;
  if (!(is >> value) || value < 0) {
    throw Error(ErrorCode::IoFailure, "malformed PGM header");
  }
  return value;
}

}  // namespace detail

inline GrayImage decode_pgm(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  char m0 = 0, m1 = 0;
  is.get(m0);
  is.get(m1);
  if (m0 != 'P' || (m1 != '2' && m1 != '5')) {
    throw Error(ErrorCode::IoFailure, "not a PGM file");
  }
  const bool binary = m1 == '5';
  const int width = detail::next_pgm_token(is);
  const int height = detail::next_pgm_token(is);
  const int maxval = detail::next_pgm_token(is);
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw Error(ErrorCode::IoFailure, "bad PGM dimensions");
  }
  GrayImage img = make_image(width, height);
  const std::size_t n = img.data.size();
  if (binary) {
    is.get();  // single whitespace after maxval
    const int bytes_per = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(n * bytes_per);
    is.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(is.gcount()) != raw.size()) {
      throw Error(ErrorCode::IoFailure, "truncated PGM pixel data");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const int v = bytes_per == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1]
                                   : raw[i];
      img.data[i] = static_cast<double>(v) / maxval;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      img.data[i] = static_cast<double>(detail::next_pgm_token(is)) / maxval;
    }
  }
  return img;
}

inline std::string encode_pgm(const GrayImage& img, int maxval = 255) {
  if (maxval != 255 && maxval != 65535) {
    throw Error(ErrorCode::BadParams, "PGM maxval must be 255 or 65535");
  }
  std::string out = "P5\n" + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n" +
                    std::to_string(maxval) + "\n";
  for (double v : img.data) {
    const double c = std::clamp(v, 0.0, 1.0);
    const long q = std::lround(c * maxval);
    if (maxval == 255) {
      out.push_back(static_cast<char>(q));
    } else {
      out.push_back(static_cast<char>(q >> 8));
      out.push_back(static_cast<char>(q & 0xff));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// PNG via libpng (8/16-bit gray or color; color collapses to luminance with
// weights 0.299/0.587/0.114)
// ---------------------------------------------------------------------------

inline GrayImage load_png(const std::filesystem::path& path) {
  std::FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (!fp) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error(ErrorCode::IoFailure, "libpng initialization failed");
  }
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error(ErrorCode::IoFailure, "failed to decode " + path.string());
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  int color_type = png_get_color_type(png, info);
  int bit_depth = png_get_bit_depth(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  color_type = png_get_color_type(png, info);
  bit_depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  buffer.resize(row_bytes * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);

  GrayImage img = make_image(static_cast<int>(width), static_cast<int>(height));
  const double maxval = bit_depth == 16 ? 65535.0 : 255.0;
  auto sample = [&](const unsigned char* p, int c) {
    // PNG 16-bit samples are big-endian.
    return bit_depth == 16
               ? static_cast<double>((p[2 * c] << 8) | p[2 * c + 1])
               : static_cast<double>(p[c]);
  };
  for (png_uint_32 y = 0; y < height; ++y) {
    const unsigned char* row = buffer.data() + y * row_bytes;
    const int stride = channels * (bit_depth == 16 ? 2 : 1);
    for (png_uint_32 x = 0; x < width; ++x) {
      const unsigned char* p = row + x * stride;
      double v = 0.0;
      if (channels >= 3) {
        v = 0.299 * sample(p, 0) + 0.587 * sample(p, 1) + 0.114 * sample(p, 2);
      } else {
        v = sample(p, 0);
      }
      img.at(static_cast<int>(y), static_cast<int>(x)) = v / maxval;
    }
  }
  return img;
}

inline void save_png(const std::filesystem::path& path, const GrayImage& img) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(ErrorCode::IoFailure, "libpng initialization failed");
  }
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(ErrorCode::IoFailure, "failed to encode " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      row[x] = static_cast<unsigned char>(
          std::lround(std::clamp(img.at(y, x), 0.0, 1.0) * 255.0));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

// ---------------------------------------------------------------------------
// File dispatch
// ---------------------------------------------------------------------------

inline std::string read_binary_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return std::move(ss).str();
}

inline void write_binary_file(const std::filesystem::path& path,
                              const std::string& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Loads a PGM or PNG image, deciding by file magic.
inline GrayImage load_image(const std::filesystem::path& path) {
  const std::string bytes = read_binary_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '5')) {
    return decode_pgm(bytes);
  }
  if (bytes.size() >= 8 && static_cast<unsigned char>(bytes[0]) == 0x89 &&
      bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G') {
    return load_png(path);
  }
  throw Error(ErrorCode::IoFailure,
              path.string() + " is neither PGM nor PNG");
}

inline void save_image(const std::filesystem::path& path, const GrayImage& img) {
  const std::string ext = path.extension().string();
  if (ext == ".png") {
    save_png(path, img);
  } else {
    write_binary_file(path, encode_pgm(img));
  }
}

}  // namespace stomakit
