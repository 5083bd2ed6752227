#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deblur/tensor.hpp"

namespace deblur {

enum class Split { Train, Val, Test };

std::string split_name(Split s);
Split parse_split(const std::string& name);

/// One (degraded, clean) pair. Test rows may omit the clean reference.
struct PairRow {
    std::string id;
    std::filesystem::path degraded;
    std::filesystem::path clean; // empty for reference-free test rows
    Split split = Split::Train;

    bool has_clean() const { return !clean.empty(); }
};

/// Ordered list of pairs with split assignment. Paths inside the manifest
/// file are relative to the file's directory; rows here carry them already
/// resolved.
struct PairManifest {
    std::vector<PairRow> rows;

    std::vector<PairRow> rows_for(Split s) const;
    std::size_t count(Split s) const;
};

/// Manifest CSV: header `id,degraded,clean,split`, one row per pair,
/// paths stored relative to the manifest's directory.
void write_manifest(const PairManifest& manifest, const std::filesystem::path& path);
PairManifest read_manifest(const std::filesystem::path& path);

/// Synthetic degradation: Gaussian blur of the given sigma/kernel size,
/// plus optional additive Gaussian pixel noise.
struct BlurSpec {
    double sigma = 1.5;
    int kernel_size = 9;
    std::uint64_t seed = 0;  // noise stream seed
    double noise_std = 0.0;

    void validate() const;
};

/// Blurs per channel with a normalized Gaussian kernel through the
/// same-padding convolution primitive, adds seeded noise when configured,
/// and clamps to [0,1]. Internally evaluated in double.
Tensor gaussian_blur(const Tensor& img, const BlurSpec& spec);

struct SplitFractions {
    double train = 0.8;
    double val = 0.2;
    double test = 0.0;
};

/// Reads every P6/P5 image under clean_dir (sorted by filename), writes a
/// blurred counterpart for each under out_dir/degraded/, assigns splits by
/// a seeded shuffle honoring the fractions, and writes
/// out_dir/manifest.csv. Returns the manifest with resolved paths.
PairManifest build_synthetic_dataset(const std::filesystem::path& clean_dir,
                                     const std::filesystem::path& out_dir, const BlurSpec& spec,
                                     const SplitFractions& fractions, std::uint64_t seed);

/// Rows shuffled by a generator seeded with (seed, epoch), chunked into
/// batches; the last short batch is kept.
std::vector<std::vector<PairRow>> chunk_rows(std::vector<PairRow> rows, int batch_size,
                                             std::uint64_t seed, std::uint32_t epoch);

/// chunk_rows over the rows of one split.
std::vector<std::vector<PairRow>> batches(const PairManifest& manifest, Split split,
                                          int batch_size, std::uint64_t seed,
                                          std::uint32_t epoch);

} // namespace deblur
