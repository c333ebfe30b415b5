// linalg.hpp: Eigen aliases and small matrix helpers shared by all modules

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace cavlink {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<cplx>;

inline constexpr cplx I{0.0, 1.0};
inline constexpr double pi = 3.14159265358979323846;

// Entries whose modulus is at or below this are treated as structural zeros.
inline constexpr double zero_cutoff = 0.0;

inline SpMat sparse_from_triplets(Eigen::Index rows, Eigen::Index cols,
                                  const std::vector<Triplet>& t) {
    SpMat m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    m.prune([](Eigen::Index, Eigen::Index, const cplx& v) { return std::abs(v) > zero_cutoff; });
    m.makeCompressed();
    return m;
}

inline SpMat sparse_identity(Eigen::Index n) {
    SpMat m(n, n);
    m.setIdentity();
    return m;
}

// Kronecker product, first argument is the slow index.
inline SpMat kron(const SpMat& a, const SpMat& b) {
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
    for (Eigen::Index i = 0; i < a.outerSize(); ++i)
        for (SpMat::InnerIterator ia(a, i); ia; ++ia)
            for (Eigen::Index k = 0; k < b.outerSize(); ++k)
                for (SpMat::InnerIterator ib(b, k); ib; ++ib)
                    t.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                                   ia.value() * ib.value());
    return sparse_from_triplets(a.rows() * b.rows(), a.cols() * b.cols(), t);
}

inline Mat kron(const Mat& a, const Mat& b) {
    Mat k(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
}

inline Vec kron(const Vec& a, const Vec& b) {
    Vec k(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) k.segment(i * b.size(), b.size()) = a(i) * b;
    return k;
}

inline double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline double max_abs(const SpMat& m) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < m.outerSize(); ++i)
        for (SpMat::InnerIterator it(m, i); it; ++it) r = std::max(r, std::abs(it.value()));
    return r;
}

inline double hermiticity_error(const SpMat& m) {
    SpMat d = m - SpMat(m.adjoint());
    return max_abs(d);
}

inline SpMat commutator(const SpMat& a, const SpMat& b) { return SpMat(a * b) - SpMat(b * a); }

inline Mat commutator(const Mat& a, const Mat& b) { return a * b - b * a; }

// exp(-i h t) for a Hermitian dense h.
inline Mat expm_hermitian(const Mat& h, double t) {
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    if (es.info() != Eigen::Success) throw std::runtime_error("expm_hermitian: eigensolver failed");
    Vec phases = (es.eigenvalues().cast<cplx>() * (-I * t)).array().exp();
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

inline RVec hermitian_eigenvalues(const Mat& h) {
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("hermitian_eigenvalues: eigensolver failed");
    return es.eigenvalues();
}

}  // namespace cavlink
