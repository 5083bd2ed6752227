#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace deblur {

/// Raised when a serialized file (PPM, checkpoint, manifest) is malformed.
/// Carries the byte offset at which parsing failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Raised when training cannot continue (non-finite loss, unreadable pair).
class TrainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace deblur
