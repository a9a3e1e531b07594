#pragma once

#include <filesystem>

#include "sfuse/tensor.hpp"

namespace sfuse {

/// Decodes a raster (PNG, PGM, JPEG, ...) into a [H,W] tensor of luminance in
/// [0,1]. Color is reduced with weights 0.299 R + 0.587 G + 0.114 B; alpha is
/// ignored; 16-bit inputs are scaled by 1/65535.
TensorD load_image(const std::filesystem::path& path);

/// Writes values already in [0,1] as 8-bit grayscale, rounding to nearest.
void save_gray8(const TensorD& image, const std::filesystem::path& path);

/// Min-max scales to [0,1]; a flat input maps to all zeros.
TensorD rescale_unit(const TensorD& image);

/// Bilinear resampling on a corner-aligned grid: output (i,j) samples the
/// input at (i*(H-1)/(h-1), j*(W-1)/(w-1)). Aspect ratio is not preserved.
TensorD resize_bilinear(const TensorD& image, std::size_t height, std::size_t width);

}  // namespace sfuse
