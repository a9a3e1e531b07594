#include "sfuse/wavelet.hpp"

#include "sfuse/image.hpp"

namespace sfuse {
namespace {

void check_haar(const WaveletConfig& config) {
  if (config.wavelet != "haar") throw Error("wavelet: unsupported wavelet '" + config.wavelet + "'");
  if (config.levels < 1) throw Error("wavelet: levels must be positive, got " + std::to_string(config.levels));
}

template <class T>
void check_same(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw Error(std::string("haar_idwt2: ") + what + " band " + to_string(b.shape()) + " does not match " +
                to_string(a.shape()));
  }
}

}  // namespace

template <class T>
std::size_t WaveletPyramid<T>::coefficient_count() const {
  std::size_t n = approximation.size();
  for (const auto& d : details) n += d.horizontal.size() + d.vertical.size() + d.diagonal.size();
  return n;
}

template <class T>
T WaveletPyramid<T>::energy() const {
  auto sq = [](const BasicTensor<T>& t) {
    T s{};
    for (T v : t.values()) s += v * v;
    return s;
  };
  T e = sq(approximation);
  for (const auto& d : details) e += sq(d.horizontal) + sq(d.vertical) + sq(d.diagonal);
  return e;
}

template <class T>
HaarLevel<T> haar_dwt2_level(const BasicTensor<T>& image) {
  if (image.rank() != 2) throw Error("haar_dwt2_level: expected [H,W], got " + to_string(image.shape()));
  const std::size_t h = image.dim(0);
  const std::size_t w = image.dim(1);
  if (h % 2 || w % 2) throw Error("haar_dwt2_level: side lengths must be even, got " + to_string(image.shape()));
  const Shape half{h / 2, w / 2};
  HaarLevel<T> r{BasicTensor<T>(half), {BasicTensor<T>(half), BasicTensor<T>(half), BasicTensor<T>(half)}};
  const T k = T{1} / T{2};
  for (std::size_t y = 0; y < h / 2; ++y) {
    for (std::size_t x = 0; x < w / 2; ++x) {
      const T a = image(2 * y, 2 * x);
      const T b = image(2 * y, 2 * x + 1);
      const T c = image(2 * y + 1, 2 * x);
      const T d = image(2 * y + 1, 2 * x + 1);
      r.approx(y, x) = (a + b + c + d) * k;
      r.details.horizontal(y, x) = (a + b - c - d) * k;
      r.details.vertical(y, x) = (a - b + c - d) * k;
      r.details.diagonal(y, x) = (a - b - c + d) * k;
    }
  }
  return r;
}

template <class T>
BasicTensor<T> haar_idwt2_level(const BasicTensor<T>& approx, const DetailBands<T>& details) {
  if (approx.rank() != 2) throw Error("haar_idwt2: approximation must be [H,W], got " + to_string(approx.shape()));
  check_same(approx, details.horizontal, "horizontal");
  check_same(approx, details.vertical, "vertical");
  check_same(approx, details.diagonal, "diagonal");
  const std::size_t h = approx.dim(0);
  const std::size_t w = approx.dim(1);
  BasicTensor<T> out({2 * h, 2 * w});
  const T k = T{1} / T{2};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const T A = approx(y, x);
      const T H = details.horizontal(y, x);
      const T V = details.vertical(y, x);
      const T D = details.diagonal(y, x);
      out(2 * y, 2 * x) = (A + H + V + D) * k;
      out(2 * y, 2 * x + 1) = (A + H - V - D) * k;
      out(2 * y + 1, 2 * x) = (A - H + V - D) * k;
      out(2 * y + 1, 2 * x + 1) = (A - H - V + D) * k;
    }
  }
  return out;
}

template <class T>
WaveletPyramid<T> haar_dwt2_multi(const BasicTensor<T>& image, const WaveletConfig& config) {
  check_haar(config);
  if (image.rank() != 2) throw Error("haar_dwt2_multi: expected [H,W], got " + to_string(image.shape()));
  const std::size_t block = std::size_t{1} << config.levels;
  if (image.dim(0) % block || image.dim(1) % block) {
    throw Error("haar_dwt2_multi: side " + to_string(image.shape()) + " is not divisible by 2^" +
                std::to_string(config.levels) + " = " + std::to_string(block) + " for " +
                std::to_string(config.levels) + " levels");
  }
  WaveletPyramid<T> p;
  p.approximation = image;
  for (int l = 0; l < config.levels; ++l) {
    HaarLevel<T> level = haar_dwt2_level(p.approximation);
    p.approximation = std::move(level.approx);
    p.details.push_back(std::move(level.details));
  }
  return p;
}

template <class T>
BasicTensor<T> haar_idwt2_multi(const WaveletPyramid<T>& pyramid) {
  if (pyramid.details.empty()) throw Error("haar_idwt2_multi: pyramid has no detail levels");
  BasicTensor<T> current = pyramid.approximation;
  for (std::size_t l = pyramid.details.size(); l-- > 0;) {
    current = haar_idwt2_level(current, pyramid.details[l]);
  }
  return current;
}

template <class T>
WaveletPyramid<T> suppress_approximation(WaveletPyramid<T> pyramid) {
  pyramid.approximation.fill(T{});
  return pyramid;
}

template <class T>
BasicTensor<T> high_pass_reconstruction(const BasicTensor<T>& image, const WaveletConfig& config) {
  return haar_idwt2_multi(suppress_approximation(haar_dwt2_multi(image, config)));
}

template <class T>
BasicTensor<T> wavelet_preprocess(const BasicTensor<T>& image, const WaveletConfig& config) {
  const BasicTensor<T> rec = high_pass_reconstruction(image, config);
  return rescale_unit(rec.template cast<double>()).template cast<T>();
}

void export_pyramid_bands(const WaveletPyramid<double>& pyramid, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_gray8(rescale_unit(pyramid.approximation), dir / "approx.png");
  for (std::size_t l = 0; l < pyramid.details.size(); ++l) {
    const std::string stem = "level" + std::to_string(l + 1);
    save_gray8(rescale_unit(pyramid.details[l].horizontal), dir / (stem + "_h.png"));
    save_gray8(rescale_unit(pyramid.details[l].vertical), dir / (stem + "_v.png"));
    save_gray8(rescale_unit(pyramid.details[l].diagonal), dir / (stem + "_d.png"));
  }
}

#define SFUSE_INSTANTIATE_WAVELET(T)                                                           \
  template struct WaveletPyramid<T>;                                                           \
  template HaarLevel<T> haar_dwt2_level(const BasicTensor<T>&);                                \
  template BasicTensor<T> haar_idwt2_level(const BasicTensor<T>&, const DetailBands<T>&);      \
  template WaveletPyramid<T> haar_dwt2_multi(const BasicTensor<T>&, const WaveletConfig&);     \
  template BasicTensor<T> haar_idwt2_multi(const WaveletPyramid<T>&);                          \
  template WaveletPyramid<T> suppress_approximation(WaveletPyramid<T>);                        \
  template BasicTensor<T> high_pass_reconstruction(const BasicTensor<T>&, const WaveletConfig&); \
  template BasicTensor<T> wavelet_preprocess(const BasicTensor<T>&, const WaveletConfig&);

SFUSE_INSTANTIATE_WAVELET(float)
SFUSE_INSTANTIATE_WAVELET(double)

}  // namespace sfuse
