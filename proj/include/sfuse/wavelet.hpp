#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sfuse/tensor.hpp"

namespace sfuse {

struct WaveletConfig {
  int levels = 7;
  std::string wavelet = "haar";
};

template <class T>
struct DetailBands {
  BasicTensor<T> horizontal;
  BasicTensor<T> vertical;
  BasicTensor<T> diagonal;
};

template <class T>
struct HaarLevel {
  BasicTensor<T> approx;
  DetailBands<T> details;
};

/// Multilevel decomposition. details[0] is the finest level (N/2 x N/2),
/// details.back() the coarsest, which shares its size with `approximation`.
template <class T>
struct WaveletPyramid {
  BasicTensor<T> approximation;
  std::vector<DetailBands<T>> details;

  std::size_t coefficient_count() const;
  T energy() const;
};

/// One level of the orthonormal 2D Haar analysis on 2x2 blocks [[a,b],[c,d]]:
///   approx = (a+b+c+d)/2   horizontal = (a+b-c-d)/2
///   vertical = (a-b+c-d)/2 diagonal = (a-b-c+d)/2
template <class T>
HaarLevel<T> haar_dwt2_level(const BasicTensor<T>& image);

template <class T>
BasicTensor<T> haar_idwt2_level(const BasicTensor<T>& approx, const DetailBands<T>& details);

template <class T>
WaveletPyramid<T> haar_dwt2_multi(const BasicTensor<T>& image, const WaveletConfig& config = {});

template <class T>
BasicTensor<T> haar_idwt2_multi(const WaveletPyramid<T>& pyramid);

/// Zeroes the approximation band, leaving every detail band untouched.
template <class T>
WaveletPyramid<T> suppress_approximation(WaveletPyramid<T> pyramid);

/// Decompose, drop the approximation band and reconstruct, without rescaling.
template <class T>
BasicTensor<T> high_pass_reconstruction(const BasicTensor<T>& image, const WaveletConfig& config = {});

/// Frequency-domain representation of a 128x128 image: the high-pass
/// reconstruction min-max rescaled to [0,1]. A flat result maps to zeros.
template <class T>
BasicTensor<T> wavelet_preprocess(const BasicTensor<T>& image, const WaveletConfig& config = {});

/// Writes every band as an 8-bit grayscale PNG (min-max scaled per band):
/// approx.png and level<l>_{h,v,d}.png.
void export_pyramid_bands(const WaveletPyramid<double>& pyramid, const std::filesystem::path& dir);

}  // namespace sfuse
