#include "aerialmpt/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "aerialmpt/error.hpp"

namespace aerialmpt {

Image::Image(int w, int h, std::array<std::uint8_t, 3> fill) : width(w), height(h) {
  pixels.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = fill[0];
    pixels[i + 1] = fill[1];
    pixels[i + 2] = fill[2];
  }
}

Image read_png(const std::filesystem::path& path) {
  png_image meta{};
  meta.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&meta, path.string().c_str())) {
    throw FormatError("png: " + path.string() + ": " + meta.message);
  }
  meta.format = PNG_FORMAT_RGB;
  Image img(static_cast<int>(meta.width), static_cast<int>(meta.height));
  if (!png_image_finish_read(&meta, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = meta.message;
    png_image_free(&meta);
    throw FormatError("png: " + path.string() + ": " + msg);
  }
  return img;
}

std::array<int, 2> png_dimensions(const std::filesystem::path& path) {
  png_image meta{};
  meta.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&meta, path.string().c_str())) {
    throw FormatError("png: " + path.string() + ": " + meta.message);
  }
  std::array<int, 2> dims{static_cast<int>(meta.width), static_cast<int>(meta.height)};
  png_image_free(&meta);
  return dims;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.empty()) throw ConfigError("write_png: empty image");
  png_image meta{};
  meta.version = PNG_IMAGE_VERSION;
  meta.width = static_cast<png_uint_32>(image.width);
  meta.height = static_cast<png_uint_32>(image.height);
  meta.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&meta, path.string().c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw IoError("png: cannot write " + path.string() + ": " + meta.message);
  }
}

namespace {

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P6") throw FormatError("ppm: only binary P6 supported: " + path.string());
  auto next_int = [&]() {
    int v = 0;
    while (in >> std::ws && in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
    }
    if (!(in >> v)) throw FormatError("ppm: truncated header: " + path.string());
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxv = next_int();
  if (w <= 0 || h <= 0 || maxv != 255) throw FormatError("ppm: unsupported header: " + path.string());
  in.get();
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw FormatError("ppm: truncated pixel data: " + path.string());
  return img;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".ppm") return read_ppm(path);
  return read_png(path);
}

Image resample_region(const Image& src, double x0, double y0, double w, double h, int out_w, int out_h,
                      std::array<std::uint8_t, 3> fill) {
  Image out(out_w, out_h, fill);
  const double sx = w / out_w;
  const double sy = h / out_h;
  auto sample = [&](int x, int y, int c) -> double {
    if (!src.contains(x, y)) return fill[c];
    return src.at(x, y, c);
  };
  for (int v = 0; v < out_h; ++v) {
    const double iy = y0 + (v + 0.5) * sy - 0.5;
    const int y_lo = static_cast<int>(std::floor(iy));
    const double fy = iy - y_lo;
    for (int u = 0; u < out_w; ++u) {
      const double ix = x0 + (u + 0.5) * sx - 0.5;
      const int x_lo = static_cast<int>(std::floor(ix));
      const double fx = ix - x_lo;
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - fx) * sample(x_lo, y_lo, c) + fx * sample(x_lo + 1, y_lo, c);
        const double bot = (1.0 - fx) * sample(x_lo, y_lo + 1, c) + fx * sample(x_lo + 1, y_lo + 1, c);
        const double val = (1.0 - fy) * top + fy * bot;
        out.at(u, v, c) = static_cast<std::uint8_t>(std::clamp(std::lround(val), 0L, 255L));
      }
    }
  }
  return out;
}

namespace {

void put(Image& img, int x, int y, std::array<std::uint8_t, 3> color) {
  if (!img.contains(x, y)) return;
  for (int c = 0; c < 3; ++c) img.at(x, y, c) = color[c];
}

}  // namespace

void draw_line(Image& img, double xa, double ya, double xb, double yb, std::array<std::uint8_t, 3> color) {
  const double len = std::max(std::abs(xb - xa), std::abs(yb - ya));
  const int steps = std::max(1, static_cast<int>(std::ceil(len)));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    put(img, static_cast<int>(std::floor(xa + t * (xb - xa))), static_cast<int>(std::floor(ya + t * (yb - ya))), color);
  }
}

void draw_rect(Image& img, double x1, double y1, double x2, double y2, std::array<std::uint8_t, 3> color) {
  draw_line(img, x1, y1, x2, y1, color);
  draw_line(img, x2, y1, x2, y2, color);
  draw_line(img, x2, y2, x1, y2, color);
  draw_line(img, x1, y2, x1, y1, color);
}

void draw_disc(Image& img, double cx, double cy, double r, std::array<std::uint8_t, 3> color) {
  const int lo_x = static_cast<int>(std::floor(cx - r)), hi_x = static_cast<int>(std::ceil(cx + r));
  const int lo_y = static_cast<int>(std::floor(cy - r)), hi_y = static_cast<int>(std::ceil(cy + r));
  for (int y = lo_y; y <= hi_y; ++y) {
    for (int x = lo_x; x <= hi_x; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r) put(img, x, y, color);
    }
  }
}

std::array<std::uint8_t, 3> id_color(int id) {
  // Golden-ratio hue walk, fixed saturation/value.
  const double hue = std::fmod(0.618033988749895 * id, 1.0) * 6.0;
  const int sector = static_cast<int>(hue);
  const double f = hue - sector;
  const double v = 255.0, p = 255.0 * 0.15, q = 255.0 * (1.0 - 0.85 * f), t = 255.0 * (0.15 + 0.85 * f);
  double r = v, gr = t, b = p;
  switch (sector % 6) {
    case 0: r = v; gr = t; b = p; break;
    case 1: r = q; gr = v; b = p; break;
    case 2: r = p; gr = v; b = t; break;
    case 3: r = p; gr = q; b = v; break;
    case 4: r = t; gr = p; b = v; break;
    default: r = v; gr = p; b = q; break;
  }
  return {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(gr), static_cast<std::uint8_t>(b)};
}

}  // namespace aerialmpt
