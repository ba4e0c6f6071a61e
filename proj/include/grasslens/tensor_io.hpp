#pragma once

// Dense tensor container: the .npy v1.0 subset (little-endian <f4 / <f8,
// C order, 1 to 3 dimensions).

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace grasslens::io {

enum class ElementKind { Float32, Float64 };

std::size_t element_size(ElementKind kind);
const char* descr(ElementKind kind);

struct TensorHeader {
    std::vector<std::size_t> shape;
    ElementKind kind = ElementKind::Float64;
    std::uint64_t payload_offset = 0;

    std::size_t element_count() const;
};

class TensorFile {
public:
    TensorFile() = default;
    TensorFile(std::vector<std::size_t> shape, std::vector<float> values);
    TensorFile(std::vector<std::size_t> shape, std::vector<double> values);

    static TensorFile from_matrix(const Eigen::MatrixXd& m);
    static TensorFile from_vector(const Eigen::VectorXd& v);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    ElementKind kind() const noexcept;
    std::size_t size() const noexcept;

    std::span<const float> f32() const;
    std::span<const double> f64() const;

    /// Values promoted to double, row-major order.
    std::vector<double> as_doubles() const;
    /// 2-D tensor as a matrix; 1-D tensors become a single column.
    Eigen::MatrixXd to_matrix() const;
    Eigen::VectorXd to_vector() const;

    bool bitwise_equal(const TensorFile& other) const;

private:
    void check_invariants() const;

    std::vector<std::size_t> shape_;
    std::variant<std::vector<double>, std::vector<float>> data_;
};

/// Parse only the header; validates magic, version, dict and, when the file
/// size is known, that the payload is complete.
TensorHeader read_tensor_header(const std::filesystem::path& path);

TensorFile read_tensor(const std::filesystem::path& path);
void write_tensor(const TensorFile& tensor, const std::filesystem::path& path);

/// Encode into the exact bytes write_tensor would produce.
std::vector<std::uint8_t> encode_tensor(const TensorFile& tensor);
TensorFile decode_tensor(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");

}  // namespace grasslens::io
