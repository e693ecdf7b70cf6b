#include "swtsr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "swtsr/error.hpp"

namespace swtsr {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

struct Raster {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int channels = 0;
  int depth = 0;
  std::vector<png_byte> bytes;
  std::vector<png_bytep> rows;
};

double max_level(int bit_depth) { return bit_depth == 16 ? 65535.0 : 255.0; }

// Returns an empty message on success; libpng failures longjmp back here.
std::string read_raster(std::FILE* fp, Raster* r) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) return "cannot allocate decoder";
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return "cannot allocate decoder";
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return "corrupt or unsupported PNG data";
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if ((color & PNG_COLOR_MASK_ALPHA) != 0 || png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_destroy_read_struct(&png, &info, nullptr);
    return "images with an alpha channel are not supported";
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  r->width = png_get_image_width(png, info);
  r->height = png_get_image_height(png, info);
  r->channels = png_get_channels(png, info);
  r->depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  r->bytes.resize(stride * r->height);
  r->rows.resize(r->height);
  for (png_uint_32 y = 0; y < r->height; ++y) r->rows[y] = r->bytes.data() + y * stride;
  png_read_image(png, r->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return {};
}

std::string write_raster(std::FILE* fp, Raster* r) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) return "cannot allocate encoder";
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return "cannot allocate encoder";
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return "PNG encoding failed";
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, r->width, r->height, r->depth,
               r->channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (r->depth == 16) png_set_swap(png);
  png_write_image(png, r->rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return {};
}

}  // namespace

Tensor load_png(const std::string& path) {
  File fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open '" + path + "'");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("'" + path + "' is not a PNG file");
  }
  std::rewind(fp.get());
  Raster r;
  const std::string err = read_raster(fp.get(), &r);
  if (!err.empty()) throw IoError("'" + path + "': " + err);
  if (r.channels != 1 && r.channels != 3) {
    throw IoError("'" + path + "': unsupported channel count " + std::to_string(r.channels));
  }
  const std::size_t c = static_cast<std::size_t>(r.channels);
  Tensor out(Shape{1, c, r.height, r.width});
  const double top = max_level(r.depth);
  for (std::size_t y = 0; y < r.height; ++y) {
    const png_byte* row = r.rows[y];
    for (std::size_t x = 0; x < r.width; ++x) {
      for (std::size_t k = 0; k < c; ++k) {
        const std::size_t i = x * c + k;
        double v;
        if (r.depth == 16) {
          v = static_cast<double>(row[2 * i] | (row[2 * i + 1] << 8));
        } else {
          v = static_cast<double>(row[i]);
        }
        out(0, k, y, x) = v / top;
      }
    }
  }
  return out;
}

void save_png(const Tensor& image, const std::string& path, int bit_depth) {
  const Shape& s = image.shape();
  if (s.n != 1 || (s.c != 1 && s.c != 3)) {
    throw DimensionError("save_png expects (1, 1 or 3, h, w), got " + s.str());
  }
  if (bit_depth != 8 && bit_depth != 16) throw ConfigError("PNG bit depth must be 8 or 16");
  Raster r;
  r.width = static_cast<png_uint_32>(s.w);
  r.height = static_cast<png_uint_32>(s.h);
  r.channels = static_cast<int>(s.c);
  r.depth = bit_depth;
  const std::size_t bytes_per = bit_depth / 8;
  const std::size_t stride = s.w * s.c * bytes_per;
  r.bytes.resize(stride * s.h);
  r.rows.resize(s.h);
  const double top = max_level(bit_depth);
  for (std::size_t y = 0; y < s.h; ++y) {
    png_byte* row = r.bytes.data() + y * stride;
    r.rows[y] = row;
    for (std::size_t x = 0; x < s.w; ++x) {
      for (std::size_t k = 0; k < s.c; ++k) {
        const double v = std::clamp(image(0, k, y, x), 0.0, 1.0);
        const auto level = static_cast<unsigned>(std::lround(v * top));
        const std::size_t i = x * s.c + k;
        if (bit_depth == 16) {
          row[2 * i] = static_cast<png_byte>(level & 0xff);
          row[2 * i + 1] = static_cast<png_byte>(level >> 8);
        } else {
          row[i] = static_cast<png_byte>(level);
        }
      }
    }
  }
  File fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write '" + path + "'");
  const std::string err = write_raster(fp.get(), &r);
  if (!err.empty()) throw IoError("'" + path + "': " + err);
  if (std::fflush(fp.get()) != 0) throw IoError("failed while writing '" + path + "'");
}

Tensor quantize(const Tensor& image, int bit_depth) {
  const double top = max_level(bit_depth);
  Tensor out = image;
  for (double& v : out.data()) v = static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * top)) / top;
  return out;
}

}  // namespace swtsr
