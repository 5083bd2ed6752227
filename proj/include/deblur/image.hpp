#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deblur/tensor.hpp"

namespace deblur {

/// 8-bit image, row-major with interleaved channels. channels is 1 (PGM)
/// or 3 (PPM).
struct ImageU8 {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::uint8_t> samples;

    std::size_t sample_count() const {
        return static_cast<std::size_t>(height) * width * channels;
    }
};

/// Reads a binary PPM (P6) or PGM (P5) file with maxval 255. Any other
/// magic or maxval is rejected with a FormatError carrying the byte offset.
ImageU8 read_image(const std::filesystem::path& path);

/// Writes P6 for 3-channel images, P5 for 1-channel. The byte stream is
/// canonical so read(write(img)) round-trips bit-exactly.
void write_image(const ImageU8& img, const std::filesystem::path& path);

/// Maps samples to floats: v -> v / 255.
Tensor to_tensor(const ImageU8& img);

/// Maps values to samples: t -> round(clamp(t, 0, 1) * 255).
ImageU8 to_image(const Tensor& t);

} // namespace deblur
