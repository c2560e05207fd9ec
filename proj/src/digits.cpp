#include "et/digits.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "et/error.hpp"
#include "et/random.hpp"

namespace et {
namespace {

struct Point {
  double x;
  double y;
};

using Stroke = std::vector<Point>;
using Glyph = std::vector<Stroke>;

Stroke ellipse(Point c, double rx, double ry, int segments = 14) {
  Stroke s;
  for (int i = 0; i <= segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    s.push_back({c.x + rx * std::cos(a), c.y + ry * std::sin(a)});
  }
  return s;
}

// Skeletons in unit coordinates, x to the right and y downwards.
const std::array<Glyph, 10>& glyphs() {
  static const std::array<Glyph, 10> table = {
      Glyph{ellipse({0.5, 0.5}, 0.26, 0.37)},
      Glyph{{{0.34, 0.26}, {0.52, 0.12}, {0.52, 0.88}}},
      Glyph{{{0.26, 0.3}, {0.36, 0.15}, {0.6, 0.12}, {0.72, 0.25}, {0.7, 0.42}, {0.26, 0.88},
             {0.78, 0.88}}},
      Glyph{{{0.25, 0.15}, {0.7, 0.15}, {0.45, 0.45}, {0.7, 0.6}, {0.68, 0.8}, {0.5, 0.9},
             {0.25, 0.82}}},
      Glyph{{{0.62, 0.88}, {0.62, 0.12}, {0.22, 0.65}, {0.8, 0.65}}},
      Glyph{{{0.72, 0.12}, {0.3, 0.12}, {0.27, 0.45}, {0.55, 0.4}, {0.72, 0.55}, {0.7, 0.78},
             {0.5, 0.9}, {0.25, 0.83}}},
      Glyph{{{0.68, 0.14}, {0.45, 0.2}, {0.3, 0.45}, {0.28, 0.7}, {0.4, 0.88}, {0.62, 0.87},
             {0.72, 0.7}, {0.6, 0.53}, {0.4, 0.53}, {0.3, 0.65}}},
      Glyph{{{0.22, 0.12}, {0.78, 0.12}, {0.45, 0.88}}},
      Glyph{ellipse({0.5, 0.3}, 0.19, 0.17), ellipse({0.5, 0.68}, 0.23, 0.2)},
      Glyph{ellipse({0.5, 0.33}, 0.2, 0.19), Stroke{{0.7, 0.35}, {0.66, 0.88}}},
  };
  return table;
}

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x;
  const double ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

Vector render(const Glyph& skeleton, std::size_t side, Rng& rng) {
  const double angle = rng.uniform(-8.0, 8.0) * std::numbers::pi / 180.0;
  const double sx = rng.uniform(0.85, 1.05);
  const double sy = sx * rng.uniform(0.95, 1.05);
  const double shear = rng.uniform(-0.15, 0.15);
  const double tx = rng.uniform(-0.06, 0.06);
  const double ty = rng.uniform(-0.06, 0.06);
  const double thickness = rng.uniform(0.07, 0.11);
  const double c = std::cos(angle);
  const double s = std::sin(angle);

  Glyph glyph = skeleton;
  for (auto& stroke : glyph) {
    for (auto& p : stroke) {
      const double jx = p.x + 0.02 * rng.normal() - 0.5;
      const double jy = p.y + 0.02 * rng.normal() - 0.5;
      const double ax = sx * (jx + shear * jy);
      const double ay = sy * jy;
      p = {0.5 + tx + c * ax - s * ay, 0.5 + ty + s * ax + c * ay};
    }
  }

  constexpr int kSuper = 4;
  Vector pixels(side * side, 0.0);
  const double cell = 1.0 / static_cast<double>(side);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t col = 0; col < side; ++col) {
      int covered = 0;
      for (int i = 0; i < kSuper; ++i) {
        for (int j = 0; j < kSuper; ++j) {
          const Point p{(static_cast<double>(col) + (j + 0.5) / kSuper) * cell,
                        (static_cast<double>(r) + (i + 0.5) / kSuper) * cell};
          double best = 1e9;
          for (const auto& stroke : glyph)
            for (std::size_t k = 0; k + 1 < stroke.size(); ++k)
              best = std::min(best, segment_distance(p, stroke[k], stroke[k + 1]));
          covered += best <= thickness;
        }
      }
      pixels[r * side + col] = static_cast<double>(covered) / (kSuper * kSuper);
    }
  }
  return pixels;
}

}  // namespace

LabeledDataset gen_digits(std::size_t per_class, std::size_t side, std::uint64_t seed) {
  if (per_class == 0 || side < 4) throw Error("gen_digits: per_class must be positive and side >= 4");
  Rng rng(seed);
  LabeledDataset d;
  d.class_count = 10;
  d.samples.reserve(10 * per_class);
  for (std::size_t k = 0; k < 10; ++k) {
    for (std::size_t n = 0; n < per_class; ++n) {
      d.samples.push_back(render(glyphs()[k], side, rng));
      d.labels.push_back(k);
    }
  }
  return d;
}

LabeledDataset rotate_images(const LabeledDataset& d, std::size_t side, double degrees,
                             double noise_sigma, std::uint64_t seed) {
  if (noise_sigma < 0.0) throw Error("rotate_images: noise sigma must be non-negative");
  for (const auto& x : d.samples)
    if (x.size() != side * side) throw Error("rotate_images: sample is not side*side pixels");
  const double theta = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double centre = 0.5 * static_cast<double>(side - 1);
  const auto n = static_cast<std::ptrdiff_t>(side);
  auto pixel = [&](const Vector& img, std::ptrdiff_t r, std::ptrdiff_t col) {
    if (r < 0 || col < 0 || r >= n || col >= n) return 0.0;
    return img[static_cast<std::size_t>(r) * side + static_cast<std::size_t>(col)];
  };

  Rng rng(seed);
  LabeledDataset out = d;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const Vector& img = d.samples[k];
    Vector& dst = out.samples[k];
    for (std::size_t r = 0; r < side; ++r) {
      for (std::size_t col = 0; col < side; ++col) {
        // Inverse map: output pixel -> source location.
        const double dx = static_cast<double>(col) - centre;
        const double dy = static_cast<double>(r) - centre;
        const double src_x = centre + c * dx + s * dy;
        const double src_y = centre - s * dx + c * dy;
        const double fx = std::floor(src_x);
        const double fy = std::floor(src_y);
        const double wx = src_x - fx;
        const double wy = src_y - fy;
        const auto x0 = static_cast<std::ptrdiff_t>(fx);
        const auto y0 = static_cast<std::ptrdiff_t>(fy);
        double v = (1 - wx) * (1 - wy) * pixel(img, y0, x0) + wx * (1 - wy) * pixel(img, y0, x0 + 1) +
                   (1 - wx) * wy * pixel(img, y0 + 1, x0) + wx * wy * pixel(img, y0 + 1, x0 + 1);
        if (noise_sigma > 0.0) v += noise_sigma * rng.normal();
        dst[r * side + col] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace et
