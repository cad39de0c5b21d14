#pragma once

#include <array>
#include <string>
#include <vector>

namespace pase {

/// RGB image, interleaved row-major floats in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // size = width * height * 3

  Image() = default;
  Image(int w, int h, float fill = 0.f)
      : width(w), height(h), pixels(size_t(w) * h * 3, fill) {}

  float* at(int x, int y) { return pixels.data() + 3 * (size_t(y) * width + x); }
  const float* at(int x, int y) const {
    return pixels.data() + 3 * (size_t(y) * width + x);
  }
};

struct Point {
  double x = 0;
  double y = 0;
};

using Landmarks = std::array<Point, 68>;

Image read_png(const std::string& path);

/// Writes 8-bit RGB. Pixels of the form k/255 round-trip exactly.
void write_png(const std::string& path, const Image& img);

/// Bilinear sample of the axis-aligned box [x0,x1]x[y0,y1] (continuous pixel
/// coordinates) into an out_size x out_size image.
Image sample_box(const Image& src, double x0, double y0, double x1, double y1,
                 int out_size);

/// Axis-aligned bounding box of the 20 mouth landmarks (indices 48..67),
/// expanded to 120% of its size (10% of width/height on each side) and
/// clamped to the image bounds. Returns {x0, y0, x1, y1}.
std::array<double, 4> lip_bounding_box(const Landmarks& marks, int img_w,
                                       int img_h);

/// Crops the expanded mouth box and resizes it to crop_size x crop_size.
/// Throws DataError("degenerate landmarks") when the clamped box has zero
/// area.
Image crop_lips(const Image& frame, const Landmarks& marks, int crop_size = 96);

}  // namespace pase
