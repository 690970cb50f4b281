#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace aerialmpt {

/// Interleaved 8-bit RGB raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, std::array<std::uint8_t, 3> fill = {0, 0, 0});

  bool empty() const { return width <= 0 || height <= 0; }
  std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  friend bool operator==(const Image&, const Image&) = default;
};

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);
/// Reads only the header; returns {width, height}.
std::array<int, 2> png_dimensions(const std::filesystem::path& path);

/// Reads PNG or binary PPM (P6) based on the extension.
Image read_image(const std::filesystem::path& path);

/// Bilinear resample of the square-or-rectangular region [x0, x0+w) x [y0, y0+h) of `src`
/// into an out_w x out_h raster. Samples falling outside the image take `fill`.
/// Pixel centers sit at integer + 0.5.
Image resample_region(const Image& src, double x0, double y0, double w, double h, int out_w, int out_h,
                      std::array<std::uint8_t, 3> fill);

// Overlay drawing (used by the report command).
void draw_rect(Image& img, double x1, double y1, double x2, double y2, std::array<std::uint8_t, 3> color);
void draw_line(Image& img, double xa, double ya, double xb, double yb, std::array<std::uint8_t, 3> color);
void draw_disc(Image& img, double cx, double cy, double r, std::array<std::uint8_t, 3> color);

/// Deterministic distinct color per id.
std::array<std::uint8_t, 3> id_color(int id);

}  // namespace aerialmpt
