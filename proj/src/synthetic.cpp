#include "sfuse/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "sfuse/image.hpp"

namespace sfuse {
namespace {

struct Point {
  double x;
  double y;
};

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

// Distance from p (glyph-local units, box [-1,1]^2) to the glyph's ink; 0 inside filled parts.
double glyph_distance(int label, Point p) {
  auto seg = [&](double x0, double y0, double x1, double y1) { return segment_distance(p, {x0, y0}, {x1, y1}); };
  switch (label) {
    case 0:  // ring
      return std::abs(std::hypot(p.x, p.y) - 0.75);
    case 1:  // filled square
      return std::max(0.0, std::max(std::abs(p.x), std::abs(p.y)) - 0.8);
    case 2:  // plus
      return std::min(seg(-0.9, 0, 0.9, 0), seg(0, -0.9, 0, 0.9));
    case 3:  // cross
      return std::min(seg(-0.85, -0.85, 0.85, 0.85), seg(-0.85, 0.85, 0.85, -0.85));
    case 4:  // two horizontal bars
      return std::min(seg(-0.9, -0.6, 0.9, -0.6), seg(-0.9, 0.6, 0.9, 0.6));
    case 5:  // two vertical bars
      return std::min(seg(-0.6, -0.9, -0.6, 0.9), seg(0.6, -0.9, 0.6, 0.9));
    case 6:  // triangle outline
      return std::min({seg(0, -0.9, 0.9, 0.8), seg(0.9, 0.8, -0.9, 0.8), seg(-0.9, 0.8, 0, -0.9)});
    case 7:  // single slash
      return seg(-0.8, 0.9, 0.8, -0.9);
    case 8:  // small disk
      return std::max(0.0, std::hypot(p.x, p.y) - 0.45);
    case 9:  // L shape
      return std::min(seg(-0.7, -0.9, -0.7, 0.8), seg(-0.7, 0.8, 0.8, 0.8));
    case 10:  // chevron
      return std::min(seg(-0.9, 0.8, 0, -0.8), seg(0, -0.8, 0.9, 0.8));
    default:
      throw Error("synthetic: label " + std::to_string(label) + " out of range");
  }
}

}  // namespace

TensorD render_synthetic_word(int label, Rng& rng, std::size_t height, std::size_t width) {
  const double background = rng.uniform(0.85, 1.0);
  const double ink = rng.uniform(0.0, 0.25);
  const std::size_t glyphs = 2 + rng.below(2);
  const double slot = static_cast<double>(width) / static_cast<double>(glyphs);

  struct Placement {
    double cx, cy, half, stroke;
  };
  std::vector<Placement> placed;
  for (std::size_t g = 0; g < glyphs; ++g) {
    const double size = rng.uniform(0.40, 0.55) * static_cast<double>(height);
    placed.push_back({slot * (static_cast<double>(g) + 0.5) + rng.uniform(-0.1, 0.1) * slot,
                      0.5 * static_cast<double>(height) + rng.uniform(-0.08, 0.08) * static_cast<double>(height),
                      0.5 * size, rng.uniform(4.0, 6.0)});
  }

  TensorD img({height, width});
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double coverage = 0.0;
      for (const auto& pl : placed) {
        const Point local{(static_cast<double>(x) - pl.cx) / pl.half, (static_cast<double>(y) - pl.cy) / pl.half};
        if (std::abs(local.x) > 1.5 || std::abs(local.y) > 1.5) continue;
        const double d = glyph_distance(label, local) * pl.half;
        coverage = std::max(coverage, std::clamp(0.5 * pl.stroke + 0.5 - d, 0.0, 1.0));
      }
      const double v = background * (1.0 - coverage) + ink * coverage + rng.uniform(-0.03, 0.03);
      img(y, x) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

DatasetManifest write_synthetic_corpus(const std::filesystem::path& root, const SyntheticOptions& options) {
  if (options.per_class == 0) throw Error("synthetic: per_class must be positive");
  const auto& names = script_names();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto dir = root / names[c];
    std::filesystem::create_directories(dir);
    Rng rng(mix_seed(options.seed, 0x5700 + c));
    for (std::size_t i = 0; i < options.per_class; ++i) {
      char file[64];
      std::snprintf(file, sizeof(file), "%s_%03zu.png", names[c].c_str(), i);
      save_gray8(render_synthetic_word(static_cast<int>(c), rng, options.height, options.width), dir / file);
    }
  }
  return discover_corpus(root);
}

}  // namespace sfuse
