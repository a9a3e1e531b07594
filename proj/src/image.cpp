#include "sfuse/image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace sfuse {

TensorD load_image(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw Error("load_image: no such file: " + path.string());
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw Error("load_image: cannot decode image: " + path.string());

  double scale;
  switch (raw.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    default: throw Error("load_image: unsupported sample depth in " + path.string());
  }
  cv::Mat wide;
  raw.convertTo(wide, CV_64F, scale);

  const auto rows = static_cast<std::size_t>(wide.rows);
  const auto cols = static_cast<std::size_t>(wide.cols);
  const int channels = wide.channels();
  TensorD out({rows, cols});
  for (std::size_t y = 0; y < rows; ++y) {
    const double* px = wide.ptr<double>(static_cast<int>(y));
    for (std::size_t x = 0; x < cols; ++x, px += channels) {
      double v;
      if (channels <= 2) {
        v = px[0];
      } else {
        // OpenCV stores color as B, G, R[, A].
        v = 0.299 * px[2] + 0.587 * px[1] + 0.114 * px[0];
      }
      out(y, x) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

void save_gray8(const TensorD& image, const std::filesystem::path& path) {
  if (image.rank() != 2) throw Error("save_gray8: expected [H,W], got " + to_string(image.shape()));
  cv::Mat out(static_cast<int>(image.dim(0)), static_cast<int>(image.dim(1)), CV_8UC1);
  for (std::size_t y = 0; y < image.dim(0); ++y) {
    auto* row = out.ptr<unsigned char>(static_cast<int>(y));
    for (std::size_t x = 0; x < image.dim(1); ++x) {
      row[x] = static_cast<unsigned char>(std::lround(std::clamp(image(y, x), 0.0, 1.0) * 255.0));
    }
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), out);
  } catch (const cv::Exception& e) {
    throw Error("save_gray8: cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw Error("save_gray8: cannot write " + path.string());
}

TensorD rescale_unit(const TensorD& image) {
  TensorD out(image.shape());
  const auto [lo, hi] = std::minmax_element(image.values().begin(), image.values().end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (image[i] - *lo) / range;
  return out;
}

namespace {

// Source coordinate and interpolation weight for output index i.
struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

std::vector<Tap> taps(std::size_t src, std::size_t dst) {
  std::vector<Tap> out(dst);
  for (std::size_t i = 0; i < dst; ++i) {
    const double pos = dst == 1 ? 0.5 * static_cast<double>(src - 1)
                                : static_cast<double>(i) * static_cast<double>(src - 1) /
                                      static_cast<double>(dst - 1);
    const auto lo = std::min(static_cast<std::size_t>(pos), src - 1);
    out[i] = {lo, std::min(lo + 1, src - 1), pos - static_cast<double>(lo)};
  }
  return out;
}

}  // namespace

TensorD resize_bilinear(const TensorD& image, std::size_t height, std::size_t width) {
  if (image.rank() != 2) throw Error("resize_bilinear: expected [H,W], got " + to_string(image.shape()));
  if (height == 0 || width == 0) {
    throw Error("resize_bilinear: zero-sized target " + std::to_string(height) + "x" + std::to_string(width));
  }
  if (image.dim(0) == height && image.dim(1) == width) return image;
  const auto ty = taps(image.dim(0), height);
  const auto tx = taps(image.dim(1), width);
  TensorD out({height, width});
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double top = image(ty[y].lo, tx[x].lo) * (1.0 - tx[x].frac) + image(ty[y].lo, tx[x].hi) * tx[x].frac;
      const double bottom =
          image(ty[y].hi, tx[x].lo) * (1.0 - tx[x].frac) + image(ty[y].hi, tx[x].hi) * tx[x].frac;
      out(y, x) = top * (1.0 - ty[y].frac) + bottom * ty[y].frac;
    }
  }
  return out;
}

}  // namespace sfuse
