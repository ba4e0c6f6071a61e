#pragma once

// Readout subspaces on the Grassmannian Gr(k, d): extraction from a lens
// matrix, principal angles, readout subspace similarity and effective rank.

#include <Eigen/Dense>

#include <cstddef>
#include <span>

namespace grasslens::grassmann {

/// Full SVD of a lens matrix, singular values non-increasing.
struct LensSvd {
    Eigen::MatrixXd U;
    Eigen::VectorXd sigma;
    Eigen::MatrixXd V;
};

LensSvd decompose(const Eigen::MatrixXd& A);

/// Orthonormal basis of the top-k right singular subspace of A_l.
struct ReadoutSubspace {
    std::size_t layer = 0;     // 1-based; 0 when not attached to a layer
    Eigen::MatrixXd basis;     // d x k
    Eigen::VectorXd spectrum;  // all d singular values of A_l
    // sigma_k == sigma_{k+1} within 1e-12 (relative to max(1, sigma_1)):
    // the subspace is not unique and the basis is the SVD routine's choice.
    bool degenerate = false;

    std::size_t k() const { return static_cast<std::size_t>(basis.cols()); }
    std::size_t d() const { return static_cast<std::size_t>(basis.rows()); }
};

ReadoutSubspace extract_subspace(const Eigen::MatrixXd& A, std::size_t k, std::size_t layer = 0);
ReadoutSubspace subspace_from_svd(const LensSvd& svd, std::size_t k, std::size_t layer = 0);

/// Whether the spectrum has no gap between positions k and k+1.
bool spectrum_degenerate_at(const Eigen::VectorXd& spectrum, std::size_t k);

/// max |Q^T Q - I|.
double gram_deviation(const Eigen::MatrixXd& Q);

struct PrincipalAngles {
    Eigen::VectorXd cosines;    // clamped to [0, 1], non-increasing
    double overshoot = 0.0;     // how far the raw singular values exceeded 1
};

/// Cosines of the principal angles: singular values of Q_A^T Q_B.
/// Both bases must be orthonormal to 1e-8 and share (d, k).
PrincipalAngles principal_angles(const Eigen::MatrixXd& QA, const Eigen::MatrixXd& QB);

/// Readout subspace similarity: mean principal-angle cosine.
double rss(const Eigen::MatrixXd& QA, const Eigen::MatrixXd& QB);

/// Largest principal angle in radians, from the sines (singular values of
/// (I - Q_A Q_A^T) Q_B). Accurate for nearly coincident subspaces where
/// acos of the cosine loses half the digits.
double max_principal_angle(const Eigen::MatrixXd& QA, const Eigen::MatrixXd& QB);

/// exp of the Shannon entropy of p_i = s_i / sum(s); zero entries dropped.
double effective_rank(std::span<const double> singular_values);
double effective_rank(const Eigen::VectorXd& singular_values);

}  // namespace grasslens::grassmann
