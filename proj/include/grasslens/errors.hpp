#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace grasslens {

/// Bad input: malformed file, shape mismatch, violated precondition.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine failed to produce a usable result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor container problem, located by byte offset within the file.
class TensorFormatError : public ValidationError {
public:
    TensorFormatError(const std::string& path, std::uint64_t offset, const std::string& what)
        : ValidationError(path + " @ byte " + std::to_string(offset) + ": " + what),
          path_(path), offset_(offset) {}

    const std::string& path() const noexcept { return path_; }
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::string path_;
    std::uint64_t offset_;
};

}  // namespace grasslens
