#include "deblur/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "deblur/errors.hpp"

namespace deblur {

namespace {

class ByteReader {
public:
    explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    int peek() const { return pos_ < bytes_.size() ? static_cast<unsigned char>(bytes_[pos_]) : -1; }
    int get() { return pos_ < bytes_.size() ? static_cast<unsigned char>(bytes_[pos_++]) : -1; }

    // PNM header tokens are separated by whitespace; '#' starts a comment
    // running to end of line.
    void skip_separators() {
        while (pos_ < bytes_.size()) {
            const char c = bytes_[pos_];
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos_;
            } else if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    int read_number(const char* what) {
        skip_separators();
        const std::size_t start = pos_;
        long value = 0;
        bool any = false;
        while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1 << 30) throw FormatError(std::string(what) + " out of range", start);
            ++pos_;
            any = true;
        }
        if (!any) throw FormatError(std::string("expected ") + what, pos_);
        return static_cast<int>(value);
    }

    const char* data() const { return bytes_.data(); }

private:
    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

std::vector<char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

} // namespace

ImageU8 read_image(const std::filesystem::path& path) {
    ByteReader r(slurp(path));

    const int m0 = r.get(), m1 = r.get();
    int channels = 0;
    if (m0 == 'P' && m1 == '6')
        channels = 3;
    else if (m0 == 'P' && m1 == '5')
        channels = 1;
    else
        throw FormatError("bad magic, expected P6 or P5", 0);

    ImageU8 img;
    img.channels = channels;
    img.width = r.read_number("width");
    img.height = r.read_number("height");
    if (img.width <= 0 || img.height <= 0)
        throw FormatError("image dimensions must be positive", r.offset());

    const std::size_t maxval_at = r.offset();
    const int maxval = r.read_number("maxval");
    if (maxval != 255)
        throw FormatError("unsupported maxval " + std::to_string(maxval) + ", only 255", maxval_at);

    // exactly one whitespace byte separates the header from the raster
    const int sep = r.get();
    if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
        throw FormatError("expected whitespace after maxval", r.offset() - 1);

    const std::size_t need = img.sample_count();
    if (r.remaining() < need)
        throw FormatError("truncated raster, need " + std::to_string(need) + " bytes, have " +
                              std::to_string(r.remaining()),
                          r.offset() + r.remaining());
    if (r.remaining() > need)
        throw FormatError("trailing bytes after raster", r.offset() + need);

    img.samples.resize(need);
    const char* src = r.data() + r.offset();
    for (std::size_t i = 0; i < need; ++i) img.samples[i] = static_cast<std::uint8_t>(src[i]);
    return img;
}

void write_image(const ImageU8& img, const std::filesystem::path& path) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("write_image: channels must be 1 or 3, got " +
                                    std::to_string(img.channels));
    if (img.samples.size() != img.sample_count())
        throw std::invalid_argument("write_image: sample count mismatch");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << (img.channels == 3 ? "P6" : "P5") << '\n'
        << img.width << ' ' << img.height << '\n'
        << "255\n";
    out.write(reinterpret_cast<const char*>(img.samples.data()),
              static_cast<std::streamsize>(img.samples.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Tensor to_tensor(const ImageU8& img) {
    Tensor t(img.height, img.width, img.channels);
    for (std::size_t i = 0; i < img.samples.size(); ++i)
        t.data()[i] = static_cast<float>(img.samples[i]) / 255.0f;
    return t;
}

ImageU8 to_image(const Tensor& t) {
    ImageU8 img;
    img.height = t.height();
    img.width = t.width();
    img.channels = t.channels();
    img.samples.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const float v = std::min(1.0f, std::max(0.0f, t.data()[i]));
        img.samples[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    return img;
}

} // namespace deblur
