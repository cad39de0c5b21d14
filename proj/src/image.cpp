#include "pase/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "pase/common.hpp"

namespace pase {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open png file: " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png reader init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("png reader init failed");
  }
  std::vector<png_bytep> rows;
  std::vector<png_byte> data;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("malformed png file: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  // Normalize everything to 8-bit RGB.
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const size_t rowbytes = png_get_rowbytes(png, info);
  data.resize(rowbytes * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = data.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img{int(w), int(h)};
  for (png_uint_32 y = 0; y < h; ++y) {
    const png_bytep row = data.data() + y * rowbytes;
    for (png_uint_32 x = 0; x < w; ++x) {
      float* px = img.at(int(x), int(y));
      px[0] = float(row[3 * x + 0]) / 255.f;
      px[1] = float(row[3 * x + 1]) / 255.f;
      px[2] = float(row[3 * x + 2]) / 255.f;
    }
  }
  return img;
}

void write_png(const std::string& path, const Image& img) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot write png file: " + path);

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png writer init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png writer init failed");
  }
  std::vector<png_byte> data(size_t(img.width) * img.height * 3);
  std::vector<png_bytep> rows(size_t(img.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png write failed: " + path);
  }
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float* px = img.at(x, y);
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(px[c], 0.f, 1.f);
        data[3 * (size_t(y) * img.width + x) + c] =
            png_byte(std::lround(v * 255.f));
      }
    }
    rows[size_t(y)] = data.data() + 3 * size_t(y) * img.width;
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image sample_box(const Image& src, double x0, double y0, double x1, double y1,
                 int out_size) {
  Image out(out_size, out_size);
  const double sx = (x1 - x0) / out_size;
  const double sy = (y1 - y0) / out_size;
  for (int j = 0; j < out_size; ++j) {
    const double yc = y0 + (j + 0.5) * sy - 0.5;
    for (int i = 0; i < out_size; ++i) {
      const double xc = x0 + (i + 0.5) * sx - 0.5;
      const double xs = std::clamp(xc, 0.0, double(src.width - 1));
      const double ys = std::clamp(yc, 0.0, double(src.height - 1));
      const int ix = std::min(int(xs), src.width - 2 >= 0 ? src.width - 2 : 0);
      const int iy = std::min(int(ys), src.height - 2 >= 0 ? src.height - 2 : 0);
      const double fx = xs - ix;
      const double fy = ys - iy;
      const int ix1 = std::min(ix + 1, src.width - 1);
      const int iy1 = std::min(iy + 1, src.height - 1);
      const float* p00 = src.at(ix, iy);
      const float* p10 = src.at(ix1, iy);
      const float* p01 = src.at(ix, iy1);
      const float* p11 = src.at(ix1, iy1);
      float* dst = out.at(i, j);
      for (int c = 0; c < 3; ++c) {
        const double top = p00[c] * (1 - fx) + p10[c] * fx;
        const double bot = p01[c] * (1 - fx) + p11[c] * fx;
        dst[c] = float(top * (1 - fy) + bot * fy);
      }
    }
  }
  return out;
}

std::array<double, 4> lip_bounding_box(const Landmarks& marks, int img_w,
                                       int img_h) {
  double x0 = marks[48].x, x1 = marks[48].x;
  double y0 = marks[48].y, y1 = marks[48].y;
  for (int i = 48; i < 68; ++i) {
    x0 = std::min(x0, marks[size_t(i)].x);
    x1 = std::max(x1, marks[size_t(i)].x);
    y0 = std::min(y0, marks[size_t(i)].y);
    y1 = std::max(y1, marks[size_t(i)].y);
  }
  const double mx = 0.1 * (x1 - x0);
  const double my = 0.1 * (y1 - y0);
  x0 = std::clamp(x0 - mx, 0.0, double(img_w));
  x1 = std::clamp(x1 + mx, 0.0, double(img_w));
  y0 = std::clamp(y0 - my, 0.0, double(img_h));
  y1 = std::clamp(y1 + my, 0.0, double(img_h));
  return {x0, y0, x1, y1};
}

Image crop_lips(const Image& frame, const Landmarks& marks, int crop_size) {
  const auto box = lip_bounding_box(marks, frame.width, frame.height);
  if (!(box[2] > box[0]) || !(box[3] > box[1]))
    throw DataError("degenerate landmarks");
  return sample_box(frame, box[0], box[1], box[2], box[3], crop_size);
}

}  // namespace pase
