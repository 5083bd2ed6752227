#include "deblur/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "deblur/errors.hpp"
#include "deblur/image.hpp"
#include "deblur/ops.hpp"
#include "deblur/rng.hpp"

namespace deblur {

namespace fs = std::filesystem;

std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    throw std::logic_error("split_name: bad split");
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw std::invalid_argument("unknown split '" + name + "', expected train|val|test");
}

std::vector<PairRow> PairManifest::rows_for(Split s) const {
    std::vector<PairRow> out;
    for (const PairRow& r : rows)
        if (r.split == s) out.push_back(r);
    return out;
}

std::size_t PairManifest::count(Split s) const {
    std::size_t n = 0;
    for (const PairRow& r : rows)
        if (r.split == s) ++n;
    return n;
}

namespace {

std::string relative_to(const fs::path& target, const fs::path& base) {
    std::error_code ec;
    fs::path rel = fs::relative(target, base, ec);
    if (ec || rel.empty()) return target.string();
    return rel.generic_string();
}

} // namespace

void write_manifest(const PairManifest& manifest, const fs::path& path) {
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "id,degraded,clean,split\n";
    for (const PairRow& r : manifest.rows) {
        out << r.id << ',' << relative_to(r.degraded, base) << ','
            << (r.has_clean() ? relative_to(r.clean, base) : std::string()) << ','
            << split_name(r.split) << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

PairManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path.string());
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

    PairManifest manifest;
    std::string line;
    std::size_t lineno = 0;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t line_offset = offset;
        offset += line.size() + 1;
        ++lineno;
        if (lineno == 1) {
            if (line != "id,degraded,clean,split")
                throw FormatError("bad manifest header '" + line + "'", 0);
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (line.back() == ',') fields.push_back("");
        if (fields.size() != 4)
            throw FormatError("manifest line " + std::to_string(lineno) + " has " +
                                  std::to_string(fields.size()) + " fields, expected 4",
                              line_offset);
        PairRow row;
        row.id = fields[0];
        row.degraded = base / fs::path(fields[1]);
        row.clean = fields[2].empty() ? fs::path() : base / fs::path(fields[2]);
        row.split = parse_split(fields[3]);
        if (row.split != Split::Test && !row.has_clean())
            throw FormatError("manifest line " + std::to_string(lineno) +
                                  ": non-test row missing clean path",
                              line_offset);
        manifest.rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < manifest.rows.size(); ++i)
        for (std::size_t j = i + 1; j < manifest.rows.size(); ++j)
            if (manifest.rows[i].id == manifest.rows[j].id)
                throw FormatError("duplicate manifest id '" + manifest.rows[i].id + "'", 0);
    return manifest;
}

void BlurSpec::validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("blur sigma must be positive");
    if (kernel_size < 3 || kernel_size % 2 == 0)
        throw std::invalid_argument("blur kernel size must be an odd integer >= 3");
    if (noise_std < 0.0) throw std::invalid_argument("noise std must be nonnegative");
}

Tensor gaussian_blur(const Tensor& img, const BlurSpec& spec) {
    spec.validate();
    if (img.height() < spec.kernel_size || img.width() < spec.kernel_size)
        throw std::invalid_argument("gaussian_blur: image " + std::to_string(img.height()) + "x" +
                                    std::to_string(img.width()) + " smaller than kernel " +
                                    std::to_string(spec.kernel_size));

    // normalized 2-D Gaussian, arranged as a per-channel (diagonal) kernel
    // for the shared same-padding convolution
    const int n = spec.kernel_size;
    const int half = n / 2;
    const int c = img.channels();
    ConvKernelT<double> k(n, n, c, c);
    double sum = 0.0;
    std::vector<double> g2(static_cast<std::size_t>(n) * n);
    for (int r = 0; r < n; ++r)
        for (int col = 0; col < n; ++col) {
            const double dy = r - half, dx = col - half;
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * spec.sigma * spec.sigma));
            g2[static_cast<std::size_t>(r) * n + col] = v;
            sum += v;
        }
    for (int r = 0; r < n; ++r)
        for (int col = 0; col < n; ++col)
            for (int ch = 0; ch < c; ++ch)
                k.weights[k.windex(ch, ch, r, col)] = g2[static_cast<std::size_t>(r) * n + col] / sum;

    TensorT<double> blurred = conv2d(img.cast<double>(), k);

    if (spec.noise_std > 0.0) {
        GaussianSampler noise(spec.seed);
        for (std::size_t i = 0; i < blurred.size(); ++i)
            blurred.data()[i] += spec.noise_std * noise.next();
    }
    for (std::size_t i = 0; i < blurred.size(); ++i)
        blurred.data()[i] = std::min(1.0, std::max(0.0, blurred.data()[i]));
    return blurred.cast<float>();
}

PairManifest build_synthetic_dataset(const fs::path& clean_dir, const fs::path& out_dir,
                                     const BlurSpec& spec, const SplitFractions& fractions,
                                     std::uint64_t seed) {
    spec.validate();
    const double fsum = fractions.train + fractions.val + fractions.test;
    if (std::abs(fsum - 1.0) > 1e-6)
        throw std::invalid_argument("split fractions must sum to 1, got " + std::to_string(fsum));

    std::vector<fs::path> clean_files;
    if (!fs::is_directory(clean_dir))
        throw std::runtime_error("clean dir " + clean_dir.string() + " is not a directory");
    for (const auto& entry : fs::directory_iterator(clean_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".ppm" || ext == ".pgm") clean_files.push_back(entry.path());
    }
    if (clean_files.empty())
        throw std::runtime_error("no .ppm/.pgm images found in " + clean_dir.string());
    std::sort(clean_files.begin(), clean_files.end());

    fs::create_directories(out_dir / "degraded");

    // split assignment: seeded shuffle of indices, then cut at the
    // fraction boundaries
    const std::size_t n = clean_files.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    deterministic_shuffle(order, mix_seed(seed, 0x5917ULL));
    const auto cut1 = static_cast<std::size_t>(std::llround(fractions.train * n));
    const auto cut2 = static_cast<std::size_t>(std::llround((fractions.train + fractions.val) * n));
    std::vector<Split> split_of(n);
    for (std::size_t i = 0; i < n; ++i)
        split_of[order[i]] = i < cut1 ? Split::Train : (i < cut2 ? Split::Val : Split::Test);

    PairManifest manifest;
    for (std::size_t i = 0; i < n; ++i) {
        const fs::path& clean_path = clean_files[i];
        const ImageU8 clean = read_image(clean_path);

        BlurSpec per_image = spec;
        per_image.seed = mix_seed(spec.seed, i);
        const Tensor degraded = gaussian_blur(to_tensor(clean), per_image);

        const fs::path degraded_path = out_dir / "degraded" / clean_path.filename();
        write_image(to_image(degraded), degraded_path);

        PairRow row;
        row.id = clean_path.stem().string();
        row.degraded = degraded_path;
        row.clean = clean_path;
        row.split = split_of[i];
        manifest.rows.push_back(std::move(row));
    }

    write_manifest(manifest, out_dir / "manifest.csv");
    return manifest;
}

std::vector<std::vector<PairRow>> chunk_rows(std::vector<PairRow> rows, int batch_size,
                                             std::uint64_t seed, std::uint32_t epoch) {
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    deterministic_shuffle(rows, mix_seed(seed, 0x9e3779b9ULL + epoch));

    std::vector<std::vector<PairRow>> out;
    for (std::size_t i = 0; i < rows.size(); i += batch_size) {
        const std::size_t end = std::min(rows.size(), i + batch_size);
        out.emplace_back(rows.begin() + i, rows.begin() + end);
    }
    return out;
}

std::vector<std::vector<PairRow>> batches(const PairManifest& manifest, Split split,
                                          int batch_size, std::uint64_t seed,
                                          std::uint32_t epoch) {
    return chunk_rows(manifest.rows_for(split), batch_size, seed, epoch);
}

} // namespace deblur
