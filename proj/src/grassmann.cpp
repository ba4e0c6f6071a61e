#include "grasslens/grassmann.hpp"

#include "grasslens/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace grasslens::grassmann {

namespace {

constexpr double kOrthonormalTol = 1e-8;
constexpr double kReorthTol = 1e-10;
constexpr double kGapTol = 1e-12;

void check_pair(const Eigen::MatrixXd& QA, const Eigen::MatrixXd& QB) {
    if (QA.rows() != QB.rows() || QA.cols() != QB.cols())
        throw ValidationError("principal angles need bases of equal shape, got " + std::to_string(QA.rows()) + "x" +
                              std::to_string(QA.cols()) + " and " + std::to_string(QB.rows()) + "x" +
                              std::to_string(QB.cols()));
    if (QA.cols() == 0) throw ValidationError("principal angles need k >= 1");
    if (gram_deviation(QA) > kOrthonormalTol || gram_deviation(QB) > kOrthonormalTol)
        throw ValidationError("principal angles need orthonormal bases (Gram deviation above 1e-8)");
}

}  // namespace

LensSvd decompose(const Eigen::MatrixXd& A) {
    if (A.rows() != A.cols() || A.rows() == 0) throw ValidationError("lens matrix must be square and non-empty");
    if (!A.allFinite()) throw ValidationError("lens matrix has non-finite entries");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success) throw NumericalError("SVD did not converge");
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

double gram_deviation(const Eigen::MatrixXd& Q) {
    if (Q.size() == 0) return 0.0;
    const Eigen::MatrixXd G = Q.transpose() * Q - Eigen::MatrixXd::Identity(Q.cols(), Q.cols());
    return G.cwiseAbs().maxCoeff();
}

bool spectrum_degenerate_at(const Eigen::VectorXd& spectrum, std::size_t k) {
    const auto n = static_cast<std::size_t>(spectrum.size());
    if (k == 0 || k >= n) return false;
    const double scale = std::max(1.0, spectrum(0));
    return spectrum(static_cast<Eigen::Index>(k - 1)) - spectrum(static_cast<Eigen::Index>(k)) <= kGapTol * scale;
}

ReadoutSubspace subspace_from_svd(const LensSvd& svd, std::size_t k, std::size_t layer) {
    const auto d = static_cast<std::size_t>(svd.V.rows());
    if (k < 1 || k > d)
        throw ValidationError("subspace dimension k=" + std::to_string(k) + " out of range [1, " + std::to_string(d) +
                              "]");
    ReadoutSubspace s;
    s.layer = layer;
    s.spectrum = svd.sigma;
    s.basis = svd.V.leftCols(static_cast<Eigen::Index>(k));
    if (gram_deviation(s.basis) > kReorthTol) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(s.basis);
        s.basis = qr.householderQ() * Eigen::MatrixXd::Identity(s.basis.rows(), s.basis.cols());
    }
    s.degenerate = spectrum_degenerate_at(s.spectrum, k);
    return s;
}

ReadoutSubspace extract_subspace(const Eigen::MatrixXd& A, std::size_t k, std::size_t layer) {
    if (k < 1 || k > static_cast<std::size_t>(A.cols()))
        throw ValidationError("subspace dimension k=" + std::to_string(k) + " out of range [1, " +
                              std::to_string(A.cols()) + "]");
    return subspace_from_svd(decompose(A), k, layer);
}

PrincipalAngles principal_angles(const Eigen::MatrixXd& QA, const Eigen::MatrixXd& QB) {
    check_pair(QA, QB);
    const Eigen::MatrixXd C = QA.transpose() * QB;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
    PrincipalAngles out;
    out.cosines = svd.singularValues();
    out.overshoot = std::max(0.0, out.cosines.maxCoeff() - 1.0);
    for (Eigen::Index i = 0; i < out.cosines.size(); ++i) out.cosines(i) = std::clamp(out.cosines(i), 0.0, 1.0);
    std::sort(out.cosines.data(), out.cosines.data() + out.cosines.size(), std::greater<>());
    return out;
}

double rss(const Eigen::MatrixXd& QA, const Eigen::MatrixXd& QB) {
    const auto pa = principal_angles(QA, QB);
    return std::clamp(pa.cosines.mean(), 0.0, 1.0);
}

double max_principal_angle(const Eigen::MatrixXd& QA, const Eigen::MatrixXd& QB) {
    check_pair(QA, QB);
    const Eigen::MatrixXd R = QB - QA * (QA.transpose() * QB);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
    const double s = std::clamp(svd.singularValues().size() ? svd.singularValues()(0) : 0.0, 0.0, 1.0);
    return std::asin(s);
}

double effective_rank(std::span<const double> values) {
    double total = 0.0;
    std::size_t nonzero = 0;
    for (double v : values) {
        if (!std::isfinite(v) || v < 0.0) throw ValidationError("effective rank needs finite non-negative values");
        total += v;
        if (v > 0.0) ++nonzero;
    }
    if (nonzero == 0) throw ValidationError("effective rank of an all-zero spectrum is undefined");

    // Uniform distribution over the non-zero entries: entropy is ln(count).
    double first = 0.0;
    bool uniform = true;
    for (double v : values) {
        if (v == 0.0) continue;
        if (first == 0.0) first = v;
        else if (v != first) {
            uniform = false;
            break;
        }
    }
    if (uniform) return static_cast<double>(nonzero);

    double entropy = 0.0;
    for (double v : values) {
        if (v == 0.0) continue;
        const double p = v / total;
        entropy -= p * std::log(p);
    }
    return std::exp(entropy);
}

double effective_rank(const Eigen::VectorXd& values) {
    return effective_rank(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

}  // namespace grasslens::grassmann
