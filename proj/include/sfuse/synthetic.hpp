#pragma once

#include <cstdint>
#include <filesystem>

#include "sfuse/dataset.hpp"
#include "sfuse/random.hpp"

namespace sfuse {

/// Word-like test images: each class is a distinct geometric glyph repeated
/// two or three times with random size, placement, stroke width, contrast and
/// pixel noise. Used for smoke tests and the acceptance run, not as a
/// stand-in for real handwriting.
struct SyntheticOptions {
  std::size_t per_class = 33;
  std::uint64_t seed = 0;
  std::size_t height = 64;
  std::size_t width = 128;
};

TensorD render_synthetic_word(int label, Rng& rng, std::size_t height, std::size_t width);

/// Writes `<root>/<class>/<class>_<i>.png` for every class and returns the
/// discovered manifest.
DatasetManifest write_synthetic_corpus(const std::filesystem::path& root, const SyntheticOptions& options);

}  // namespace sfuse
