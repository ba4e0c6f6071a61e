#include "doctest.h"
#include "testing.hpp"

#include "grasslens/errors.hpp"
#include "grasslens/tensor_io.hpp"

#include <cstring>
#include <functional>

using namespace grasslens;
using io::TensorFile;

namespace {

// A file laid out the way numpy.save writes it (header padded to 128 bytes).
std::vector<std::uint8_t> numpy_style(const std::string& dict, const void* payload, std::size_t n) {
    std::string header = dict;
    header.append(127 - 10 - header.size(), ' ');
    header.push_back('\n');
    std::vector<std::uint8_t> out{0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0, static_cast<std::uint8_t>(header.size()), 0};
    out.insert(out.end(), header.begin(), header.end());
    const auto* p = static_cast<const std::uint8_t*>(payload);
    out.insert(out.end(), p, p + n);
    return out;
}

std::uint64_t offset_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const TensorFormatError& e) {
        return e.offset();
    }
    FAIL("no TensorFormatError");
    return 0;
}

}  // namespace

TEST_SUITE("tensor_io") {

TEST_CASE("reads numpy-written headers") {
    const double v[3] = {0.0, 1.0, 2.0};
    auto bytes = numpy_style("{'descr': '<f8', 'fortran_order': False, 'shape': (3,), }", v, sizeof v);
    const auto t = io::decode_tensor(bytes);
    CHECK(t.shape() == std::vector<std::size_t>{3});
    CHECK(t.kind() == io::ElementKind::Float64);
    CHECK(t.as_doubles() == std::vector<double>{0, 1, 2});

    const float m[4] = {1.5f, -2.f, 0.25f, 4.f};
    bytes = numpy_style("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2), }", m, sizeof m);
    const auto tm = io::decode_tensor(bytes).to_matrix();
    CHECK(tm(0, 1) == -2.0);  // row-major
    CHECK(tm(1, 0) == 0.25);

    const double z[6] = {};
    bytes = numpy_style("{'descr': '<f8', 'fortran_order': False, 'shape': (2, 1, 3), }", z, sizeof z);
    CHECK(io::decode_tensor(bytes).shape() == std::vector<std::size_t>{2, 1, 3});
}

TEST_CASE("written header is aligned and parseable") {
    for (std::size_t n : {1, 7, 100}) {
        const auto bytes = io::encode_tensor(TensorFile({n}, std::vector<double>(n, 1.0)));
        const std::size_t hlen = bytes[8] | (bytes[9] << 8);
        CHECK((10 + hlen) % 64 == 0);
        CHECK(bytes[10 + hlen - 1] == '\n');
        CHECK(bytes.size() == 10 + hlen + 8 * n);
    }
}

TEST_CASE("round trip is bitwise over random shapes and values") {
    Rng rng(20261);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::size_t> shape(1 + rng.next() % 3);
        std::size_t n = 1;
        for (auto& s : shape) n *= (s = rng.next() % 6);  // zero-length axes included
        TensorFile t;
        if (rng.next() % 2) {
            std::vector<double> v(n);
            for (auto& x : v) {
                const auto bits = rng.next();
                std::memcpy(&x, &bits, sizeof x);  // arbitrary bit patterns, NaN payloads too
            }
            t = TensorFile(shape, std::move(v));
        } else {
            std::vector<float> v(n);
            for (auto& x : v) {
                const auto bits = static_cast<std::uint32_t>(rng.next());
                std::memcpy(&x, &bits, sizeof x);
            }
            t = TensorFile(shape, std::move(v));
        }
        const auto back = io::decode_tensor(io::encode_tensor(t));
        REQUIRE(back.bitwise_equal(t));
    }
}

TEST_CASE("file round trip") {
    testing::TempDir dir("tio");
    Eigen::MatrixXd m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    io::write_tensor(TensorFile::from_matrix(m), dir / "m.npy");
    CHECK(io::read_tensor(dir / "m.npy").to_matrix() == m);
    const auto h = io::read_tensor_header(dir / "m.npy");
    CHECK(h.shape == std::vector<std::size_t>{2, 3});
    CHECK(h.payload_offset % 64 == 0);
}

TEST_CASE("malformed inputs carry byte offsets") {
    auto good = io::encode_tensor(TensorFile({4}, std::vector<double>{1, 2, 3, 4}));
    auto bad_magic = good;
    bad_magic[1] = 'X';
    CHECK(offset_of([&] { io::decode_tensor(bad_magic); }) == 0);

    auto bad_version = good;
    bad_version[6] = 3;
    CHECK(offset_of([&] { io::decode_tensor(bad_version); }) == 6);

    auto truncated = good;
    truncated.resize(good.size() - 3);
    CHECK(offset_of([&] { io::decode_tensor(truncated); }) == truncated.size());
    CHECK_THROWS_WITH_AS(io::decode_tensor(truncated), doctest::Contains("truncated payload"), ValidationError);

    auto trailing = good;
    trailing.push_back(0);
    CHECK(offset_of([&] { io::decode_tensor(trailing); }) == good.size());

    std::vector<std::uint8_t> tiny(good.begin(), good.begin() + 5);
    CHECK_THROWS_AS(io::decode_tensor(tiny), TensorFormatError);
}

TEST_CASE("unsupported element kinds and layouts are named") {
    const double v[2] = {1, 2};
    auto be = numpy_style("{'descr': '>f8', 'fortran_order': False, 'shape': (2,), }", v, sizeof v);
    CHECK_THROWS_WITH_AS(io::decode_tensor(be), doctest::Contains("unsupported element kind '>f8'"), TensorFormatError);
    auto ints = numpy_style("{'descr': '<i8', 'fortran_order': False, 'shape': (2,), }", v, sizeof v);
    CHECK_THROWS_WITH_AS(io::decode_tensor(ints), doctest::Contains("unsupported element kind"), TensorFormatError);
    auto fortran = numpy_style("{'descr': '<f8', 'fortran_order': True, 'shape': (2,), }", v, sizeof v);
    CHECK_THROWS_WITH_AS(io::decode_tensor(fortran), doctest::Contains("fortran_order"), TensorFormatError);
    auto rank4 = numpy_style("{'descr': '<f8', 'fortran_order': False, 'shape': (1, 1, 1, 2), }", v, sizeof v);
    CHECK_THROWS_AS(io::decode_tensor(rank4), TensorFormatError);
    auto scalar = numpy_style("{'descr': '<f8', 'fortran_order': False, 'shape': (), }", v, 8);
    CHECK_THROWS_AS(io::decode_tensor(scalar), TensorFormatError);
    auto missing = numpy_style("{'descr': '<f8', 'shape': (2,), }", v, sizeof v);
    CHECK_THROWS_WITH_AS(io::decode_tensor(missing), doctest::Contains("fortran_order"), TensorFormatError);
    auto garbage = numpy_style("{'descr': '<f8', 'fortran_order': False, 'shape': (2,", v, sizeof v);
    CHECK_THROWS_WITH_AS(io::decode_tensor(garbage), doctest::Contains("malformed header"), TensorFormatError);
}

TEST_CASE("error names the file") {
    testing::TempDir dir("tio_err");
    testing::spit(dir / "broken.npy", "not a tensor at all");
    CHECK_THROWS_WITH_AS(io::read_tensor(dir / "broken.npy"), doctest::Contains("broken.npy"), ValidationError);
    CHECK_THROWS_AS(io::read_tensor(dir / "absent.npy"), ValidationError);
}

TEST_CASE("container invariants") {
    CHECK_THROWS_AS(TensorFile({2, 2}, std::vector<double>{1, 2, 3}), ValidationError);
    CHECK_THROWS_AS(TensorFile({1, 1, 1, 1}, std::vector<double>{1}), ValidationError);
    const TensorFile v({3}, std::vector<float>{1, 2, 3});
    CHECK_THROWS_AS(v.f64(), ValidationError);
    CHECK(v.to_matrix().cols() == 1);
    CHECK_THROWS_AS(TensorFile({1, 3}, std::vector<double>{1, 2, 3}).to_vector(), ValidationError);
    CHECK_THROWS_AS(TensorFile({1, 1, 3}, std::vector<double>{1, 2, 3}).to_matrix(), ValidationError);
}

}  // TEST_SUITE
