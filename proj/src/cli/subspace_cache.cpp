#include "grasslens/cli.hpp"

#include "grasslens/errors.hpp"
#include "grasslens/tensor_io.hpp"

#include <cstdio>
#include <fstream>
#include <unistd.h>

namespace grasslens::cli {

namespace fs = std::filesystem;

namespace {

// Bump when the cached representation changes.
constexpr const char* kCacheVersion = "grasslens-subspace-v1";

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Write-once: concurrent writers race on rename, and all of them carry the
// same bytes.
void publish(const io::TensorFile& t, const fs::path& target) {
    if (fs::exists(target)) return;
    fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
    io::write_tensor(t, tmp);
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) fs::remove(tmp, ec);
}

}  // namespace

SubspaceStore::SubspaceStore(const io::ModelManifest& manifest, std::optional<fs::path> cache_dir)
    : manifest_(manifest), cache_dir_(std::move(cache_dir)) {}

const std::string& SubspaceStore::key(std::size_t layer) {
    auto it = keys_.find(layer);
    if (it != keys_.end()) return it->second;
    const auto& path = manifest_.lenses.at(layer - 1).matrix;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return keys_.emplace(layer, hex(fnv1a(bytes, fnv1a(kCacheVersion)))).first->second;
}

const grassmann::LensSvd& SubspaceStore::svd(std::size_t layer) {
    auto it = svds_.find(layer);
    if (it != svds_.end()) return it->second;
    const Eigen::MatrixXd A = io::load_lens_matrix(manifest_, layer);
    grassmann::LensSvd s;
    try {
        s = grassmann::decompose(A);
    } catch (const ValidationError& e) {
        throw ValidationError(manifest_.lenses[layer - 1].matrix.string() + ": " + e.what());
    }
    ++svds_computed_;
    return svds_.emplace(layer, std::move(s)).first->second;
}

const Eigen::VectorXd& SubspaceStore::spectrum(std::size_t layer) {
    auto it = spectra_.find(layer);
    if (it != spectra_.end()) return it->second;
    Eigen::VectorXd s;
    if (cache_dir_) {
        const fs::path f = *cache_dir_ / (key(layer) + "_spectrum.npy");
        if (fs::exists(f)) {
            s = io::read_tensor(f).to_vector();
            ++cache_hits_;
        } else {
            s = svd(layer).sigma;
            publish(io::TensorFile::from_vector(s), f);
        }
    } else {
        s = svd(layer).sigma;
    }
    return spectra_.emplace(layer, std::move(s)).first->second;
}

grassmann::ReadoutSubspace SubspaceStore::subspace(std::size_t layer, std::size_t k) {
    if (layer < 1 || layer > manifest_.depth) throw ValidationError("layer index out of range");
    if (!cache_dir_) return grassmann::subspace_from_svd(svd(layer), k, layer);

    const fs::path f = *cache_dir_ / (key(layer) + "_k" + std::to_string(k) + ".npy");
    grassmann::ReadoutSubspace s;
    if (fs::exists(f)) {
        s.basis = io::read_tensor(f).to_matrix();
        if (static_cast<std::size_t>(s.basis.rows()) != manifest_.width || s.k() != k)
            throw ValidationError("cache entry " + f.string() + " has the wrong shape");
        ++cache_hits_;
    } else {
        s = grassmann::subspace_from_svd(svd(layer), k, layer);
        publish(io::TensorFile::from_matrix(s.basis), f);
    }
    s.layer = layer;
    s.spectrum = spectrum(layer);
    s.degenerate = grassmann::spectrum_degenerate_at(s.spectrum, k);
    return s;
}

std::vector<grassmann::ReadoutSubspace> SubspaceStore::subspaces(std::size_t k) {
    std::vector<grassmann::ReadoutSubspace> out;
    out.reserve(manifest_.depth);
    for (std::size_t l = 1; l <= manifest_.depth; ++l) out.push_back(subspace(l, k));
    return out;
}

std::vector<Eigen::VectorXd> SubspaceStore::spectra() {
    std::vector<Eigen::VectorXd> out;
    for (std::size_t l = 1; l <= manifest_.depth; ++l) out.push_back(spectrum(l));
    return out;
}

}  // namespace grasslens::cli
