#pragma once

// Procedural stand-in for a photographic corpus: images with smooth
// gradients, hard and soft shape edges, strokes and low-amplitude texture,
// the structures a blur kernel visibly destroys.

#include <cstdint>
#include <filesystem>

#include "deblur/image.hpp"

namespace corpus {

deblur::ImageU8 make_image(int size, std::uint64_t seed);

/// Writes `count` generated PPMs (img_0000.ppm, ...) into dir.
void write_corpus(const std::filesystem::path& dir, int count, int size, std::uint64_t seed);

} // namespace corpus
