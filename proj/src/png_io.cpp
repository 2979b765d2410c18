#include "zonescan/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "zonescan/error.hpp"

namespace zonescan {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_gray_png(const std::string& path, const GrayImage8& img) {
  if (img.width < 1 || img.height < 1)
    throw ValidationError("write_gray_png: empty image");

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open " + path + " for writing");

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng error while writing " + path);
  }

  png_init_io(png, f.get());
  png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int v = 0; v < img.height; ++v)
    png_write_row(png, const_cast<png_bytep>(
                           img.pixels.data() + std::size_t(v) * img.width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

GrayImage8 read_gray_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path);

  png_byte header[8];
  if (std::fread(header, 1, 8, f.get()) != 8 || png_sig_cmp(header, 0, 8))
    throw FormatError(path + " is not a PNG file");

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("libpng error while reading " + path);
  }

  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  // Normalize whatever comes in to 8-bit grayscale.
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_strip_16(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);

  GrayImage8 img{int(w), int(h)};
  for (png_uint_32 v = 0; v < h; ++v)
    png_read_row(png, img.pixels.data() + std::size_t(v) * w, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

GrayImage8 quantize_minmax(const SliceImage& img) {
  GrayImage8 out(img.width, img.height);
  if (img.pixels.empty()) return out;
  float lo = img.pixels[0], hi = img.pixels[0];
  for (float v : img.pixels) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi <= lo) return out;  // constant image maps to zeros
  const double scale = 255.0 / (double(hi) - double(lo));
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const double q = (double(img.pixels[i]) - double(lo)) * scale;
    out.pixels[i] = std::uint8_t(q + 0.5);
  }
  return out;
}

SliceImage to_slice_image(const GrayImage8& img) {
  SliceImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    out.pixels[i] = float(img.pixels[i]);
  return out;
}

void dump_png(const std::string& path, const SliceImage& img) {
  write_gray_png(path, quantize_minmax(img));
}

void dump_png(const std::string& path, const BinaryMask& mask) {
  GrayImage8 out(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.bits.size(); ++i)
    out.pixels[i] = mask.bits[i] ? 255 : 0;
  write_gray_png(path, out);
}

}  // namespace zonescan
