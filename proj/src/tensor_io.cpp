#include "grasslens/tensor_io.hpp"

#include "grasslens/errors.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>

static_assert(std::endian::native == std::endian::little,
              "tensor container I/O assumes a little-endian host");

namespace grasslens::io {

namespace {

constexpr std::uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPreambleSize = 10;  // magic + version + header length
constexpr std::size_t kAlignment = 64;

// Minimal reader for the python-literal dict in the header, e.g.
// {'descr': '<f8', 'fortran_order': False, 'shape': (3, 4), }
class HeaderParser {
public:
    HeaderParser(std::string_view text, std::string path, std::uint64_t base)
        : text_(text), path_(std::move(path)), base_(base) {}

    struct Value {
        std::optional<std::string> str;
        std::optional<bool> boolean;
        std::optional<std::vector<std::size_t>> tuple;
    };

    std::map<std::string, Value> parse() {
        std::map<std::string, Value> out;
        skip_ws();
        expect('{');
        while (true) {
            skip_ws();
            if (peek() == '}') {
                ++pos_;
                break;
            }
            std::string key = parse_string();
            skip_ws();
            expect(':');
            skip_ws();
            Value v;
            char c = peek();
            if (c == '\'' || c == '"') {
                v.str = parse_string();
            } else if (c == '(') {
                v.tuple = parse_tuple();
            } else if (text_.substr(pos_, 4) == "True") {
                v.boolean = true;
                pos_ += 4;
            } else if (text_.substr(pos_, 5) == "False") {
                v.boolean = false;
                pos_ += 5;
            } else {
                fail("unsupported value in header dict");
            }
            if (out.count(key)) fail("duplicate header key '" + key + "'");
            out.emplace(std::move(key), std::move(v));
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            skip_ws();
            expect('}');
            break;
        }
        skip_ws();
        if (pos_ != text_.size()) fail("trailing characters after header dict");
        return out;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw TensorFormatError(path_, base_ + pos_, "malformed header: " + what);
    }

private:
    char peek() const {
        if (pos_ >= text_.size()) fail("unexpected end of header");
        return text_[pos_];
    }
    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }
    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\n' || text_[pos_] == '\t'))
            ++pos_;
    }
    std::string parse_string() {
        char quote = peek();
        if (quote != '\'' && quote != '"') fail("expected quoted string");
        ++pos_;
        std::size_t end = text_.find(quote, pos_);
        if (end == std::string_view::npos) fail("unterminated string");
        std::string s(text_.substr(pos_, end - pos_));
        pos_ = end + 1;
        return s;
    }
    std::vector<std::size_t> parse_tuple() {
        expect('(');
        std::vector<std::size_t> dims;
        while (true) {
            skip_ws();
            if (peek() == ')') {
                ++pos_;
                return dims;
            }
            std::size_t start = pos_;
            std::size_t value = 0;
            while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') {
                value = value * 10 + static_cast<std::size_t>(text_[pos_] - '0');
                ++pos_;
            }
            if (pos_ == start) fail("expected integer extent in shape");
            // L suffix emitted by python 2 era writers
            if (pos_ < text_.size() && text_[pos_] == 'L') ++pos_;
            dims.push_back(value);
            skip_ws();
            if (peek() == ',') {
                ++pos_;
            } else if (peek() != ')') {
                fail("expected ',' or ')' in shape");
            }
        }
    }

    std::string_view text_;
    std::string path_;
    std::uint64_t base_;
    std::size_t pos_ = 0;
};

std::string shape_literal(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    if (shape.size() == 1) s += ",";
    s += ")";
    return s;
}

std::size_t product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

TensorHeader parse_header(std::span<const std::uint8_t> bytes, const std::string& origin,
                          std::optional<std::uint64_t> total_size) {
    if (bytes.size() < kPreambleSize)
        throw TensorFormatError(origin, bytes.size(), "malformed header: file shorter than preamble");
    if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw TensorFormatError(origin, 0, "malformed header: bad magic");
    if (bytes[6] != 1 || bytes[7] != 0)
        throw TensorFormatError(origin, 6,
                                "malformed header: unsupported version " + std::to_string(bytes[6]) + "." +
                                    std::to_string(bytes[7]));
    const std::size_t header_len = static_cast<std::size_t>(bytes[8]) | (static_cast<std::size_t>(bytes[9]) << 8);
    if (bytes.size() < kPreambleSize + header_len)
        throw TensorFormatError(origin, bytes.size(), "malformed header: header dict truncated");

    std::string_view text(reinterpret_cast<const char*>(bytes.data() + kPreambleSize), header_len);
    HeaderParser parser(text, origin, kPreambleSize);
    auto dict = parser.parse();

    auto need = [&](const char* key) -> const HeaderParser::Value& {
        auto it = dict.find(key);
        if (it == dict.end()) parser.fail(std::string("missing key '") + key + "'");
        return it->second;
    };

    TensorHeader h;
    const auto& d = need("descr");
    if (!d.str) parser.fail("'descr' must be a string");
    if (*d.str == "<f8") {
        h.kind = ElementKind::Float64;
    } else if (*d.str == "<f4") {
        h.kind = ElementKind::Float32;
    } else {
        throw TensorFormatError(origin, kPreambleSize, "unsupported element kind '" + *d.str + "'");
    }
    const auto& f = need("fortran_order");
    if (!f.boolean) parser.fail("'fortran_order' must be a boolean");
    if (*f.boolean)
        throw TensorFormatError(origin, kPreambleSize, "unsupported layout: fortran_order is True");
    const auto& s = need("shape");
    if (!s.tuple) parser.fail("'shape' must be a tuple");
    h.shape = *s.tuple;
    if (h.shape.empty() || h.shape.size() > 3)
        throw TensorFormatError(origin, kPreambleSize,
                                "unsupported rank " + std::to_string(h.shape.size()) + " (expected 1 to 3)");

    h.payload_offset = kPreambleSize + header_len;
    if (total_size) {
        const std::uint64_t want = h.payload_offset + h.element_count() * element_size(h.kind);
        if (*total_size < want)
            throw TensorFormatError(origin, *total_size,
                                    "truncated payload: expected " + std::to_string(want) + " bytes, found " +
                                        std::to_string(*total_size));
        if (*total_size > want)
            throw TensorFormatError(origin, want,
                                    "trailing bytes after payload (" + std::to_string(*total_size - want) + ")");
    }
    return h;
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open tensor file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

}  // namespace

std::size_t element_size(ElementKind kind) { return kind == ElementKind::Float32 ? 4 : 8; }

const char* descr(ElementKind kind) { return kind == ElementKind::Float32 ? "<f4" : "<f8"; }

std::size_t TensorHeader::element_count() const { return product(shape); }

TensorFile::TensorFile(std::vector<std::size_t> shape, std::vector<float> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    check_invariants();
}

TensorFile::TensorFile(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    check_invariants();
}

TensorFile TensorFile::from_matrix(const Eigen::MatrixXd& m) {
    std::vector<double> values(static_cast<std::size_t>(m.size()));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), m.rows(), m.cols()) = m;
    return TensorFile({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                      std::move(values));
}

TensorFile TensorFile::from_vector(const Eigen::VectorXd& v) {
    return TensorFile({static_cast<std::size_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size()));
}

void TensorFile::check_invariants() const {
    if (shape_.empty() || shape_.size() > 3)
        throw ValidationError("tensor rank must be 1 to 3, got " + std::to_string(shape_.size()));
    if (product(shape_) != size())
        throw ValidationError("tensor shape " + shape_literal(shape_) + " does not match " +
                              std::to_string(size()) + " elements");
}

ElementKind TensorFile::kind() const noexcept {
    return std::holds_alternative<std::vector<float>>(data_) ? ElementKind::Float32 : ElementKind::Float64;
}

std::size_t TensorFile::size() const noexcept {
    return std::visit([](const auto& v) { return v.size(); }, data_);
}

std::span<const float> TensorFile::f32() const {
    if (kind() != ElementKind::Float32) throw ValidationError("tensor is not float32");
    return std::get<std::vector<float>>(data_);
}

std::span<const double> TensorFile::f64() const {
    if (kind() != ElementKind::Float64) throw ValidationError("tensor is not float64");
    return std::get<std::vector<double>>(data_);
}

std::vector<double> TensorFile::as_doubles() const {
    return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, data_);
}

Eigen::MatrixXd TensorFile::to_matrix() const {
    if (shape_.size() > 2) throw ValidationError("expected a matrix, got rank-3 tensor");
    const auto rows = static_cast<Eigen::Index>(shape_[0]);
    const auto cols = shape_.size() == 2 ? static_cast<Eigen::Index>(shape_[1]) : Eigen::Index{1};
    auto values = as_doubles();
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), rows, cols);
}

Eigen::VectorXd TensorFile::to_vector() const {
    if (shape_.size() != 1) throw ValidationError("expected a vector, got rank-" + std::to_string(shape_.size()));
    auto values = as_doubles();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

bool TensorFile::bitwise_equal(const TensorFile& other) const {
    if (shape_ != other.shape_ || kind() != other.kind()) return false;
    return std::visit(
        [&](const auto& mine) {
            using V = std::decay_t<decltype(mine)>;
            const auto& theirs = std::get<V>(other.data_);
            return mine.empty() ||
                   std::memcmp(mine.data(), theirs.data(), mine.size() * sizeof(typename V::value_type)) == 0;
        },
        data_);
}

std::vector<std::uint8_t> encode_tensor(const TensorFile& tensor) {
    std::string dict = std::string("{'descr': '") + descr(tensor.kind()) +
                       "', 'fortran_order': False, 'shape': " + shape_literal(tensor.shape()) + ", }";
    // pad with spaces so that preamble + dict + '\n' is a multiple of 64
    std::size_t total = kPreambleSize + dict.size() + 1;
    std::size_t padded = (total + kAlignment - 1) / kAlignment * kAlignment;
    dict.append(padded - total, ' ');
    dict.push_back('\n');
    if (dict.size() > 0xFFFF) throw ValidationError("tensor header too long for format version 1.0");

    const std::size_t payload = tensor.size() * element_size(tensor.kind());
    const std::size_t at = kPreambleSize + dict.size();
    std::vector<std::uint8_t> out(at + payload);
    std::copy(std::begin(kMagic), std::end(kMagic), out.begin());
    out[sizeof kMagic] = 1;
    out[sizeof kMagic + 1] = 0;
    out[sizeof kMagic + 2] = static_cast<std::uint8_t>(dict.size() & 0xFF);
    out[sizeof kMagic + 3] = static_cast<std::uint8_t>(dict.size() >> 8);
    std::copy(dict.begin(), dict.end(), out.begin() + kPreambleSize);
    if (payload) {
        if (tensor.kind() == ElementKind::Float32)
            std::memcpy(out.data() + at, tensor.f32().data(), payload);
        else
            std::memcpy(out.data() + at, tensor.f64().data(), payload);
    }
    return out;
}

TensorFile decode_tensor(std::span<const std::uint8_t> bytes, const std::string& origin) {
    TensorHeader h = parse_header(bytes, origin, bytes.size());
    const std::size_t n = h.element_count();
    const std::uint8_t* payload = bytes.data() + h.payload_offset;
    if (h.kind == ElementKind::Float32) {
        std::vector<float> v(n);
        if (n) std::memcpy(v.data(), payload, n * sizeof(float));
        return TensorFile(std::move(h.shape), std::move(v));
    }
    std::vector<double> v(n);
    if (n) std::memcpy(v.data(), payload, n * sizeof(double));
    return TensorFile(std::move(h.shape), std::move(v));
}

TensorHeader read_tensor_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open tensor file " + path.string());
    std::vector<std::uint8_t> head(kPreambleSize);
    in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
    head.resize(static_cast<std::size_t>(in.gcount()));
    if (head.size() == kPreambleSize) {
        const std::size_t header_len = static_cast<std::size_t>(head[8]) | (static_cast<std::size_t>(head[9]) << 8);
        head.resize(kPreambleSize + header_len);
        in.read(reinterpret_cast<char*>(head.data() + kPreambleSize), static_cast<std::streamsize>(header_len));
        head.resize(kPreambleSize + static_cast<std::size_t>(in.gcount()));
    }
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    return parse_header(head, path.string(), ec ? std::nullopt : std::optional<std::uint64_t>(size));
}

TensorFile read_tensor(const std::filesystem::path& path) {
    auto bytes = read_all(path);
    return decode_tensor(bytes, path.string());
}

void write_tensor(const TensorFile& tensor, const std::filesystem::path& path) {
    auto bytes = encode_tensor(tensor);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ValidationError("write failed for " + path.string());
}

}  // namespace grasslens::io
